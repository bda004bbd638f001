#include <catch2/catch.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef PLCLI_PATH
#define PLCLI_PATH "plcli"
#endif

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PLCLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

void wipe(const std::string& dir) {
    const int rc = std::system(("rm -rf " + dir).c_str());
    (void)rc;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

const char* kHeader =
    "device_id,timestamp,distance_m,wall_brick,wall_wood,co2_ppm,rh_pct,temp_c,pressure_hpa,"
    "pm25_ugm3,snr_db,sf,freq_mhz,path_loss_db\n";

} // namespace

TEST_CASE("ingest on a valid fixture exits 0 and the ledger adds up", "[cli]") {
    const std::string dir = "/tmp/plcli_ingest_ok";
    wipe(dir);
    const std::string input = "/tmp/plcli_fixture_ok.csv";
    {
        std::ofstream out(input);
        out << kHeader;
        for (int i = 0; i < 30; ++i)
            out << "ed0," << 100 + 60 * i << ",8.0,0,0," << 640 + i << ",44,21.5,1004,8,"
                << -2.5 + 0.01 * i << ",7,868," << 61.2 + 0.05 * i << "\n";
    }
    REQUIRE(run_cli("--out-dir " + dir + " --seed 3 ingest --input " + input) == 0);
    const std::string ledger = slurp(dir + "/drop_ledger.json");
    REQUIRE(contains(ledger, "\"input_rows\": 30"));
    REQUIRE(contains(ledger, "\"kept\": 29")); // ceil(0.01*30) = 1 outlier flagged
    REQUIRE(contains(slurp(dir + "/cleaned.csv"), "config_hash"));
}

TEST_CASE("missing column exits 2 and names the column", "[cli]") {
    const std::string input = "/tmp/plcli_fixture_nocol.csv";
    {
        std::ofstream out(input);
        out << "device_id,timestamp,distance_m,wall_brick,wall_wood,co2_ppm,rh_pct,temp_c,"
               "pressure_hpa,pm25_ugm3,snr_db,sf,freq_mhz\n";
        out << "ed0,100,8.0,0,0,640,44,21.5,1004,8,-2.5,7,868\n";
    }
    const std::string dir = "/tmp/plcli_ingest_nocol";
    wipe(dir);
    REQUIRE(run_cli("--out-dir " + dir + " ingest --input " + input) == 2);
    REQUIRE(contains(slurp(dir + "/error.json"), "path_loss_db"));
}

TEST_CASE("a fixture that cleans down to nothing exits 3", "[cli]") {
    // 4 rows: a duplicate pair plus out-of-profile spreading factors leave
    // nothing behind, whatever contamination is requested
    const std::string input = "/tmp/plcli_fixture_tiny.csv";
    {
        std::ofstream out(input);
        out << kHeader;
        out << "ed0,100,8.0,0,0,640,44,21.5,1004,8,-2.5,12,868,61.2\n";
        out << "ed0,100,8.0,0,0,640,44,21.5,1004,8,-2.5,12,868,61.2\n";
        out << "ed0,160,8.0,0,0,641,44,21.5,1004,8,-2.4,12,868,61.0\n";
        out << "ed0,220,8.0,0,0,642,44,21.5,1004,8,-2.3,11,868,61.1\n";
    }
    const std::string dir = "/tmp/plcli_ingest_tiny";
    wipe(dir);
    REQUIRE(run_cli("--out-dir " + dir + " ingest --input " + input +
                    " --contamination 0.49") == 3);
}

TEST_CASE("full pipeline on a synthetic fixture produces the fm table", "[cli]") {
    const std::string dir = "/tmp/plcli_pipeline";
    wipe(dir);

    REQUIRE(run_cli("--out-dir " + dir + " --seed 11 synth --n-per-device 250") == 0);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 11 ingest --input " + dir + "/campaign.csv") ==
            0);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 11 fit --input " + dir +
                    "/cleaned.csv --model mlr --gap-hours 0.5") == 0);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 11 anova --input " + dir +
                    "/cleaned.csv --type 2 --robust") == 0);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 11 residuals --input " + dir +
                    "/oof_residuals_mlr.csv --cleaned " + dir + "/cleaned.csv --n-boot 60") == 0);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 11 calibrate --residuals " + dir +
                    "/oof_residuals_mlr.csv --holdout " + dir +
                    "/holdout_mlr.csv --bootstrap-b 250 --model-name mlr") == 0);

    const std::string fm = slurp(dir + "/fm_report.csv");
    REQUIRE(contains(fm, "model,p_pct,estimator,fm_db,ci_lo_db,ci_hi_db,achieved_pdr,fm_fold_sd"));
    REQUIRE(contains(fm, "mlr,5,"));
    REQUIRE(contains(fm, "mlr,2,"));
    REQUIRE(contains(fm, "mlr,1,"));
    REQUIRE(contains(fm, "heuristic"));
    REQUIRE(contains(slurp(dir + "/anova.csv"), "z_d"));
    REQUIRE(contains(slurp(dir + "/fit_table.csv"), "gmm_k3"));
    REQUIRE(contains(slurp(dir + "/diagnostics.json"), "critical_bandwidth_db"));
}

TEST_CASE("column remapping and timestamp override work from flags", "[cli]") {
    const std::string input = "/tmp/plcli_fixture_remap.csv";
    {
        std::ofstream out(input);
        out << "node,when,dist,nbrick,nwood,c,h,t,b,p,s,spread,f,loss\n";
        for (int i = 0; i < 25; ++i)
            out << "ed0," << 100 + 60 * i << "," << 8.0 + 0.1 * i << ",0,0,640,44,21.5,1004,8,"
                << -2.5 + 0.01 * i << ",8,868," << 61.0 + 0.1 * i << "\n";
    }
    const std::string dir = "/tmp/plcli_remap";
    wipe(dir);
    REQUIRE(run_cli("--out-dir " + dir + " ingest --input " + input +
                    " --col-device node --col-timestamp when --col-distance dist"
                    " --col-brick nbrick --col-wood nwood --col-co2 c --col-rh h --col-temp t"
                    " --col-pressure b --col-pm25 p --col-snr s --col-sf spread --col-freq f"
                    " --col-pathloss loss --timestamp-format unix") == 0);
    REQUIRE(contains(slurp(dir + "/drop_ledger.json"), "\"input_rows\": 25"));
}

TEST_CASE("report orchestrates the pipeline from a json config", "[cli]") {
    const std::string dir = "/tmp/plcli_report";
    wipe(dir);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 5 synth --n-per-device 220") == 0);
    const std::string cfg_path = "/tmp/plcli_report_config.json";
    {
        std::ofstream out(cfg_path);
        out << R"({"input": ")" << dir << R"(/campaign.csv",
                   "models": ["mlr"],
                   "gap_hours": 0.5,
                   "n_boot": 60,
                   "bootstrap_b": 250,
                   "gmm_k": [1, 2, 3]})";
    }
    REQUIRE(run_cli("--out-dir " + dir + " --seed 5 --config " + cfg_path + " report") == 0);
    REQUIRE(contains(slurp(dir + "/fm_report.csv"), "mlr,1,"));
    REQUIRE(contains(slurp(dir + "/selected_model.json"), "family"));
    REQUIRE(contains(slurp(dir + "/pdr_sweep.csv"), "fm_db,pdr,p_target"));
    REQUIRE(contains(slurp(dir + "/nested_blocks.csv"), "structure->+environmentals"));
}

TEST_CASE("fit can dump the standardized training design", "[cli]") {
    const std::string dir = "/tmp/plcli_dump";
    wipe(dir);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 9 synth --n-per-device 150") == 0);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 9 ingest --input " + dir + "/campaign.csv") ==
            0);
    REQUIRE(run_cli("--out-dir " + dir + " --seed 9 fit --input " + dir +
                    "/cleaned.csv --model mlr --gap-hours 0.3 --cv-k 3 --dump-design") == 0);
    const auto design = slurp(dir + "/design_mlr.csv");
    REQUIRE(contains(design, "z_d,wall_brick,wall_wood"));
}

TEST_CASE("reruns with the same seed and config are byte-identical", "[cli]") {
    const std::string dir = "/tmp/plcli_repeat";
    const std::string snap = dir + "_snapshot";
    wipe(dir + " " + snap);

    auto run_pipeline = [&] {
        REQUIRE(run_cli("--out-dir " + dir + " --seed 21 synth --n-per-device 120") == 0);
        REQUIRE(run_cli("--out-dir " + dir + " --seed 21 ingest --input " + dir +
                        "/campaign.csv") == 0);
        REQUIRE(run_cli("--out-dir " + dir + " --seed 21 fit --input " + dir +
                        "/cleaned.csv --model mlr --gap-hours 0.2 --cv-k 3") == 0);
    };
    run_pipeline();
    REQUIRE(std::system(("cp -r " + dir + " " + snap).c_str()) == 0);
    run_pipeline(); // idempotence: overwrites with identical content

    for (const char* f : {"campaign.csv", "cleaned.csv", "oof_residuals_mlr.csv",
                          "model_mlr.json", "cv_metrics_mlr.csv", "holdout_mlr.csv"}) {
        INFO(f);
        REQUIRE(slurp(dir + "/" + f) == slurp(snap + "/" + f));
    }
}
