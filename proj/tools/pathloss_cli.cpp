// plcli: command-line front end for the indoor path-loss workbench.
//
// Subcommands: ingest, fit, anova, residuals, calibrate, synth, report.
// Every output file embeds the config hash and root seed; reruns with the
// same config and seed produce byte-identical files.
//
// Exit codes: 0 success, 1 internal error, 2 input/schema error,
//             3 empty result.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "pathloss/pathloss.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace pathloss;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitEmpty = 3;

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash;
};

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::ofstream open_output(const fs::path& path, const Provenance& prov) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "# config_hash=" << prov.config_hash << " seed=" << prov.seed << "\n";
    out << std::setprecision(12);
    return out;
}

void write_json(const fs::path& path, json j, const Provenance& prov) {
    j["config_hash"] = prov.config_hash;
    j["seed"] = prov.seed;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json error_json(const std::string& kind, const std::string& message) {
    return json{{"error", kind}, {"message", message}};
}

void emit_error(const fs::path& out_dir, const std::string& kind, const std::string& message) {
    std::cerr << kind << ": " << message << "\n";
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!ec) {
        std::ofstream out(out_dir / "error.json");
        out << error_json(kind, message).dump(2) << "\n";
    }
}

CsvSchema schema_from_config(const json& cfg) {
    CsvSchema s;
    auto get = [&](const char* key, std::string& field) {
        if (cfg.contains(key)) field = cfg.at(key).get<std::string>();
    };
    get("col_device", s.device);
    get("col_timestamp", s.timestamp);
    get("col_distance", s.distance);
    get("col_brick", s.walls_brick);
    get("col_wood", s.walls_wood);
    get("col_co2", s.env[0]);
    get("col_rh", s.env[1]);
    get("col_temp", s.env[2]);
    get("col_pressure", s.env[3]);
    get("col_pm25", s.env[4]);
    get("col_snr", s.snr);
    get("col_sf", s.sf);
    get("col_freq", s.freq);
    get("col_pathloss", s.path_loss);
    if (cfg.contains("timestamp_format")) {
        const std::string f = cfg.at("timestamp_format").get<std::string>();
        if (f == "unix") s.timestamp_format = CsvSchema::TimestampFormat::unix_seconds;
        else if (f == "iso8601") s.timestamp_format = CsvSchema::TimestampFormat::iso8601;
        else s.timestamp_format = CsvSchema::TimestampFormat::auto_detect;
    }
    return s;
}

void write_campaign_csv(const fs::path& path, const std::vector<CampaignRecord>& records,
                        const Provenance& prov) {
    auto out = open_output(path, prov);
    out << "device_id,timestamp,distance_m,wall_brick,wall_wood,co2_ppm,rh_pct,temp_c,"
           "pressure_hpa,pm25_ugm3,snr_db,sf,freq_mhz,path_loss_db\n";
    out << std::setprecision(17);
    for (const auto& r : records) {
        out << csv::quote(r.device_id) << ',' << r.timestamp << ',' << r.distance_m << ','
            << r.walls_brick << ',' << r.walls_wood << ',' << r.env[0] << ',' << r.env[1] << ','
            << r.env[2] << ',' << r.env[3] << ',' << r.env[4] << ',' << r.snr_db << ',' << r.sf
            << ',' << r.freq_mhz << ',' << r.path_loss_db << "\n";
    }
}

struct ResidualRow {
    std::size_t record_id = 0;
    std::string device;
    double timestamp = 0.0;
    int fold = 0;
    double residual_db = 0.0;
};

std::vector<ResidualRow> read_residuals_csv(const std::string& path) {
    const auto table = csv::read_file(path);
    auto col = [&](const std::string& name) {
        for (std::size_t j = 0; j < table.header.size(); ++j)
            if (table.header[j] == name) return j;
        throw MissingColumn("missing column: " + name + " in " + path);
    };
    const auto c_id = col("record_id"), c_dev = col("device_id"), c_ts = col("timestamp"),
               c_fold = col("fold"), c_res = col("residual_db");
    std::vector<ResidualRow> rows;
    for (const auto& r : table.rows) {
        ResidualRow row;
        long id = 0, fold = 0;
        if (!csv::parse_long(r[c_id], id) || !csv::parse_double(r[c_ts], row.timestamp) ||
            !csv::parse_long(r[c_fold], fold) || !csv::parse_double(r[c_res], row.residual_db))
            throw Error("unparseable residual row in " + path);
        row.record_id = static_cast<std::size_t>(id);
        row.fold = static_cast<int>(fold);
        row.device = r[c_dev];
        rows.push_back(std::move(row));
    }
    return rows;
}

struct HoldoutRow {
    double true_pl = 0.0;
    double pred_pl = 0.0;
};

std::vector<HoldoutRow> read_holdout_csv(const std::string& path) {
    const auto table = csv::read_file(path);
    auto col = [&](const std::string& name) {
        for (std::size_t j = 0; j < table.header.size(); ++j)
            if (table.header[j] == name) return j;
        throw MissingColumn("missing column: " + name + " in " + path);
    };
    const auto c_true = col("true_pl_db"), c_pred = col("pred_pl_db");
    std::vector<HoldoutRow> rows;
    for (const auto& r : table.rows) {
        HoldoutRow row;
        if (!csv::parse_double(r[c_true], row.true_pl) ||
            !csv::parse_double(r[c_pred], row.pred_pl))
            throw Error("unparseable holdout row in " + path);
        rows.push_back(row);
    }
    return rows;
}

json model_to_json(const FitModel& m) {
    json coeffs = json::array();
    for (std::size_t j = 0; j < m.column_names.size(); ++j) {
        coeffs.push_back({{"name", m.column_names[j]},
                          {"standardized", m.beta(static_cast<Eigen::Index>(j))},
                          {"natural", m.natural.beta[j]}});
    }
    return json{{"intercept", m.intercept},
                {"natural_intercept", m.natural.intercept},
                {"penalty",
                 {{"kind", penalty_name(m.penalty.kind)},
                  {"lambda", m.penalty.lambda},
                  {"alpha", m.penalty.alpha}}},
                {"train_rss", m.train.rss},
                {"train_r2", m.train.r2},
                {"coefficients", coeffs}};
}

json posterior_to_json(const NIGPosterior& post) {
    json mean = json::array();
    for (Eigen::Index i = 0; i < post.beta_n.size(); ++i)
        mean.push_back({{"name", post.names[static_cast<std::size_t>(i)]},
                        {"value", post.beta_n(i)}});
    return json{{"posterior_mean", mean}, {"a_n", post.a_n}, {"b_n", post.b_n}};
}

// ---------------------------------------------------------------- ingest --

int cmd_ingest(const json& cfg, const fs::path& out_dir, const Provenance& prov) {
    const std::string input = cfg.at("input").get<std::string>();
    const CsvSchema schema = schema_from_config(cfg);

    CleaningConfig cleaning;
    cleaning.seed = prov.seed;
    if (cfg.contains("contamination")) cleaning.contamination = cfg.at("contamination");
    if (cfg.contains("iforest_trees")) cleaning.iforest_trees = cfg.at("iforest_trees");
    if (cfg.contains("iforest_subsample")) cleaning.iforest_subsample = cfg.at("iforest_subsample");
    if (cfg.contains("sf_keep")) {
        cleaning.sf_keep.clear();
        for (int sf : cfg.at("sf_keep")) cleaning.sf_keep.insert(sf);
    }

    ParseResult parsed;
    try {
        parsed = parse_campaign_csv(input, schema);
    } catch (const MissingColumn& e) {
        emit_error(out_dir, "MissingColumn", e.what());
        return kExitInput;
    } catch (const EmptyFile& e) {
        emit_error(out_dir, "EmptyFile", e.what());
        return kExitInput;
    }
    if (parsed.records.empty()) {
        emit_error(out_dir, "EmptyFile", "no parseable rows in " + input);
        return kExitEmpty;
    }

    CleanResult cleaned;
    try {
        cleaned = clean(parsed.records, cleaning);
    } catch (const AllRowsDropped& e) {
        emit_error(out_dir, "AllRowsDropped", e.what());
        return kExitEmpty;
    }

    write_campaign_csv(out_dir / "cleaned.csv", cleaned.kept, prov);
    write_json(out_dir / "drop_ledger.json",
               json{{"input_rows", cleaned.dropped.input_rows},
                    {"kept", cleaned.kept.size()},
                    {"dropped",
                     {{"duplicate", cleaned.dropped.duplicates},
                      {"sf_filter", cleaned.dropped.sf_filter},
                      {"outlier", cleaned.dropped.outliers}}},
                    {"parse_errors", parsed.row_errors.size()}},
               prov);
    if (!parsed.row_errors.empty()) {
        json errs = json::array();
        for (const auto& e : parsed.row_errors)
            errs.push_back({{"line", e.line}, {"reason", e.reason}});
        write_json(out_dir / "row_errors.json", json{{"rows", errs}}, prov);
    }
    std::cout << "kept " << cleaned.kept.size() << " of " << cleaned.dropped.input_rows
              << " rows\n";
    return kExitOk;
}

// ------------------------------------------------------------------- fit --

struct FitOutputs {
    std::string name;
    double cv_rmse = 0.0;
    fs::path residuals_csv;
    fs::path holdout_csv;
};

FitOutputs run_fit_pipeline(const json& cfg, const fs::path& out_dir, const Provenance& prov,
                            const std::vector<CampaignRecord>& cleaned,
                            const std::string& model_name) {
    FeatureSpec feature;
    feature.kind = model_name.rfind("poly2", 0) == 0 ? FeatureKind::poly2 : FeatureKind::linear;
    if (cfg.contains("include_snr")) feature.include_snr = cfg.at("include_snr");
    if (cfg.contains("d0_m")) feature.d0_m = cfg.at("d0_m");

    ModelSpec model;
    if (model_name == "blr_nig") {
        model = ModelSpec::nig(NIGPrior{});
    } else if (model_name == "blr_zellner") {
        double g = cfg.contains("zellner_g") ? cfg.at("zellner_g").get<double>() : 0.0;
        model = ModelSpec::zellner(g); // g <= 0 means unit information, patched below
    } else {
        PenaltySpec pen;
        const std::string pname = cfg.contains("penalty") ? cfg.at("penalty").get<std::string>()
                                                          : std::string("none");
        const double lambda = cfg.contains("lambda") ? cfg.at("lambda").get<double>() : 0.0;
        const double alpha = cfg.contains("alpha") ? cfg.at("alpha").get<double>() : 1.0;
        if (pname == "ridge") pen = PenaltySpec::ridge(lambda);
        else if (pname == "lasso") pen = PenaltySpec::lasso(lambda);
        else if (pname == "enet") pen = PenaltySpec::elastic_net(lambda, alpha);
        model = ModelSpec::penalized_fixed(pen);
        if (cfg.contains("lambda_grid"))
            for (double l : cfg.at("lambda_grid")) model.lambda_grid.push_back(l);
        if (cfg.contains("alpha_grid"))
            for (double a : cfg.at("alpha_grid")) model.alpha_grid.push_back(a);
    }

    const double test_fraction = cfg.contains("test_fraction")
                                     ? cfg.at("test_fraction").get<double>()
                                     : 0.2;
    const int k = cfg.contains("cv_k") ? cfg.at("cv_k").get<int>() : 5;
    const double gap_hours = cfg.contains("gap_hours") ? cfg.at("gap_hours").get<double>() : 24.0;

    const auto split = chronological_split(cleaned, test_fraction);
    if (model.kind == ModelSpec::Kind::blr_zellner && model.g <= 0.0)
        model.g = static_cast<double>(split.train.size());

    const auto plan = make_time_blocked_folds(split.train, k, gap_hours);
    const auto cv = run_cv(split.train, feature, model, plan);

    // final model on the full training portion, evaluated on the hold-out
    auto train_design = build_design(split.train, feature);
    std::vector<std::size_t> rows(train_design.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const auto standardizer = fit_standardizer(train_design, rows);
    const auto train_s = apply_standardizer(standardizer, train_design);
    const auto test_s = apply_standardizer(standardizer, build_design(split.test, feature));

    Eigen::VectorXd test_pred;
    json model_json;
    switch (model.kind) {
        case ModelSpec::Kind::penalized: {
            PenaltySpec pen = model.penalty;
            if (!model.lambda_grid.empty()) {
                const auto inner = detail_cv::inner_folds(
                    split.train, rows, std::max(2, k - 1), gap_hours);
                pen = select_hyperparameters(train_design, pen.kind, model.lambda_grid,
                                             model.alpha_grid, inner);
            }
            const auto fit = fit_linear(train_s, pen);
            test_pred = predict(fit, test_s);
            model_json = model_to_json(fit);
            break;
        }
        case ModelSpec::Kind::blr_nig: {
            const auto post = fit_blr_nig(train_s, NIGPrior::weakly_informative(train_s.cols() + 1));
            test_pred = blr_point_predictions(post, test_s);
            model_json = posterior_to_json(post);
            model_json["prior"] = {{"kind", "nig"}, {"v0", 1e6}, {"a0", 1e-3}, {"b0", 1e-3}};
            break;
        }
        case ModelSpec::Kind::blr_zellner: {
            const auto post = fit_blr_zellner(train_s, model.g);
            test_pred = blr_point_predictions(post, test_s);
            model_json = posterior_to_json(post);
            model_json["prior"] = {{"kind", "zellner"}, {"g", model.g}};
            break;
        }
    }

    const auto holdout = metrics(test_s.y, test_pred);
    model_json["model"] = model_name;
    model_json["holdout_rmse"] = holdout.rmse;
    model_json["holdout_r2"] = holdout.r2;
    write_json(out_dir / ("model_" + model_name + ".json"), model_json, prov);

    if (cfg.contains("dump_design") && cfg.at("dump_design").get<bool>()) {
        auto out = open_output(out_dir / ("design_" + model_name + ".csv"), prov);
        write_design_csv(out, train_s);
    }

    {
        auto out = open_output(out_dir / ("cv_metrics_" + model_name + ".csv"), prov);
        out << "fold,train_rmse,train_r2,val_rmse,val_r2\n";
        for (std::size_t f = 0; f < cv.per_fold.size(); ++f) {
            const auto& m = cv.per_fold[f];
            out << f << ',' << m.train.rmse << ',' << m.train.r2 << ',' << m.validation.rmse
                << ',' << m.validation.r2 << "\n";
        }
    }
    FitOutputs outputs;
    outputs.name = model_name;
    outputs.cv_rmse = cv.pooled_validation().rmse;
    outputs.residuals_csv = out_dir / ("oof_residuals_" + model_name + ".csv");
    {
        auto out = open_output(outputs.residuals_csv, prov);
        out << "record_id,device_id,timestamp,fold,residual_db\n";
        out << std::setprecision(17);
        for (const auto& r : cv.residuals)
            out << r.record_index << ',' << csv::quote(r.device_id) << ',' << r.timestamp << ','
                << r.fold << ',' << r.residual_db << "\n";
    }
    outputs.holdout_csv = out_dir / ("holdout_" + model_name + ".csv");
    {
        auto out = open_output(outputs.holdout_csv, prov);
        out << "record_id,device_id,timestamp,true_pl_db,pred_pl_db\n";
        out << std::setprecision(17);
        for (std::size_t i = 0; i < split.test.size(); ++i)
            out << i << ',' << csv::quote(split.test[i].device_id) << ','
                << split.test[i].timestamp << ',' << test_s.y(static_cast<Eigen::Index>(i))
                << ',' << test_pred(static_cast<Eigen::Index>(i)) << "\n";
    }
    std::cout << model_name << ": cv rmse " << outputs.cv_rmse << " dB, holdout rmse "
              << holdout.rmse << " dB\n";
    return outputs;
}

int cmd_fit(const json& cfg, const fs::path& out_dir, const Provenance& prov) {
    const std::string input = cfg.at("input").get<std::string>();
    const auto parsed = parse_campaign_csv(input);
    if (parsed.records.empty()) {
        emit_error(out_dir, "EmptyFile", "no rows in " + input);
        return kExitEmpty;
    }
    const std::string model = cfg.contains("model") ? cfg.at("model").get<std::string>()
                                                    : std::string("mlr");
    run_fit_pipeline(cfg, out_dir, prov, parsed.records, model);
    return kExitOk;
}

// ----------------------------------------------------------------- anova --

int cmd_anova(const json& cfg, const fs::path& out_dir, const Provenance& prov) {
    const std::string input = cfg.at("input").get<std::string>();
    const auto parsed = parse_campaign_csv(input);
    if (parsed.records.empty()) {
        emit_error(out_dir, "EmptyFile", "no rows in " + input);
        return kExitEmpty;
    }
    const int type = cfg.contains("type") ? cfg.at("type").get<int>() : 2;
    const bool robust = cfg.contains("robust") ? cfg.at("robust").get<bool>() : true;

    FeatureSpec feature; // additive linear design for inference
    auto design = build_design(parsed.records, feature);
    std::vector<std::size_t> rows(design.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    design = apply_standardizer(fit_standardizer(design, rows), design);

    const auto fit = fit_linear(design, PenaltySpec::none());
    const auto table =
        anova(fit, design, type == 3 ? AnovaType::III : AnovaType::II, robust);

    auto format_p = [](double p) {
        if (p < 1e-300) return std::string("<1e-300");
        std::ostringstream os;
        os << std::setprecision(6) << p;
        return os.str();
    };

    {
        auto out = open_output(out_dir / "anova.csv", prov);
        out << "term,F,p,partial_eta2,df1,df2,sign\n";
        for (const auto& row : table.rows)
            out << row.term << ',' << row.F << ',' << format_p(row.p) << ',' << row.partial_eta2
                << ',' << row.df1 << ',' << row.df2 << ',' << (row.sign > 0 ? "+" : "-") << "\n";
    }
    json rows_json = json::array();
    for (const auto& row : table.rows)
        rows_json.push_back({{"term", row.term},
                             {"F", row.F},
                             {"p", row.p},
                             {"p_printed", format_p(row.p)},
                             {"partial_eta2", row.partial_eta2},
                             {"df1", row.df1},
                             {"df2", row.df2},
                             {"sign", row.sign}});
    write_json(out_dir / "anova.json",
               json{{"type", type}, {"robust", robust}, {"rows", rows_json}}, prov);

    {
        const auto vifs = vif(design);
        auto out = open_output(out_dir / "vif.csv", prov);
        out << "term,vif\n";
        for (std::size_t j = 0; j < vifs.size(); ++j)
            out << design.columns[j].name << ',' << vifs[j] << "\n";
    }

    // nested block gains: structure -> +environmentals -> +snr
    {
        auto take_blocks = [&](std::initializer_list<Block> blocks) {
            DesignMatrix sub;
            std::vector<Eigen::Index> keep;
            for (Eigen::Index j = 0; j < design.X.cols(); ++j) {
                for (Block b : blocks) {
                    if (design.columns[static_cast<std::size_t>(j)].block == b) {
                        keep.push_back(j);
                        break;
                    }
                }
            }
            sub.X.resize(design.X.rows(), static_cast<Eigen::Index>(keep.size()));
            for (std::size_t c = 0; c < keep.size(); ++c) {
                sub.X.col(static_cast<Eigen::Index>(c)) = design.X.col(keep[c]);
                sub.columns.push_back(design.columns[static_cast<std::size_t>(keep[c])]);
            }
            sub.y = design.y;
            return sub;
        };
        const auto structure = take_blocks({Block::structure, Block::walls});
        const auto with_env = take_blocks({Block::structure, Block::walls, Block::environment});
        const auto full = design;
        const auto f_structure = fit_linear(structure, PenaltySpec::none());
        const auto f_env = fit_linear(with_env, PenaltySpec::none());
        const auto f_full = fit_linear(full, PenaltySpec::none());
        const auto n = design.rows();
        const auto gain_env = partial_f(f_structure, f_env, n);
        const auto gain_snr = partial_f(f_env, f_full, n);
        auto out = open_output(out_dir / "nested_blocks.csv", prov);
        out << "comparison,delta_df,df2,F,p,partial_eta2\n";
        out << "structure->+environmentals," << gain_env.delta_df << ',' << gain_env.df2 << ','
            << gain_env.F << ',' << format_p(gain_env.p) << ',' << gain_env.partial_eta2 << "\n";
        out << "+environmentals->+snr," << gain_snr.delta_df << ',' << gain_snr.df2 << ','
            << gain_snr.F << ',' << format_p(gain_snr.p) << ',' << gain_snr.partial_eta2 << "\n";
    }
    std::cout << "anova written (" << table.rows.size() << " terms)\n";
    return kExitOk;
}

// ------------------------------------------------------------- residuals --

int cmd_residuals(const json& cfg, const fs::path& out_dir, const Provenance& prov) {
    const std::string input = cfg.at("input").get<std::string>();
    const auto rows = read_residuals_csv(input);
    if (rows.empty()) {
        emit_error(out_dir, "EmptyFile", "no residual rows in " + input);
        return kExitEmpty;
    }
    std::vector<double> resid;
    resid.reserve(rows.size());
    for (const auto& r : rows) resid.push_back(r.residual_db);

    const std::uint64_t seed = derive_seed(prov.seed, 0xD15);
    std::vector<std::size_t> gmm_ks = {1, 2, 3, 4, 5};
    if (cfg.contains("gmm_k")) {
        gmm_ks.clear();
        for (std::size_t k : cfg.at("gmm_k")) gmm_ks.push_back(k);
    }

    std::vector<ResidualFit> fits;
    std::vector<std::string> fit_labels;
    for (Family f : {Family::normal, Family::skew_normal, Family::student_t, Family::cauchy}) {
        fits.push_back(fit_distribution(resid, f));
        fit_labels.emplace_back(family_name(f));
    }
    for (std::size_t k : gmm_ks) {
        fits.push_back(fit_gmm(resid, k, 4, 1e-3, derive_seed(seed, k)));
        fit_labels.push_back("gmm_k" + std::to_string(k));
    }

    {
        auto out = open_output(out_dir / "fit_table.csv", prov);
        out << "family,loglik,aic,bic,ks\n";
        for (std::size_t i = 0; i < fits.size(); ++i)
            out << fit_labels[i] << ',' << fits[i].loglik << ',' << fits[i].aic << ','
                << fits[i].bic << ',' << fits[i].ks_stat << "\n";
    }

    const auto& best = select_residual_model(fits);
    json best_json{{"family", best.family()},
                   {"loglik", best.loglik},
                   {"aic", best.aic},
                   {"bic", best.bic},
                   {"ks", best.ks_stat},
                   {"k_params", best.k_params}};
    if (best.dist.family == Family::gmm) {
        best_json["weights"] = best.dist.mixture.weights;
        best_json["means"] = best.dist.mixture.means;
        best_json["sds"] = best.dist.mixture.sds;
    } else {
        best_json["params"] = {best.dist.p1, best.dist.p2, best.dist.p3};
    }
    write_json(out_dir / "selected_model.json", best_json, prov);

    // qq data per fitted family
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto pts = qq_points(resid, fits[i]);
        auto out = open_output(out_dir / ("qq_" + fit_labels[i] + ".csv"), prov);
        out << "theoretical,empirical\n";
        const std::size_t stride = std::max<std::size_t>(1, pts.size() / 2000);
        for (std::size_t j = 0; j < pts.size(); j += stride)
            out << pts[j].first << ',' << pts[j].second << "\n";
    }

    // kde overlays at the two bandwidths plus the mode-count sweep
    const double h_silverman = silverman_bandwidth(resid);
    std::vector<double> h_grid;
    for (double h = h_silverman / 4.0; h <= h_silverman * 8.0; h *= 1.25) h_grid.push_back(h);
    const double h_cv = cv_loglik_bandwidth(resid, h_grid, 5);
    for (const auto& [label, h] : {std::pair<std::string, double>{"silverman", h_silverman},
                                   std::pair<std::string, double>{"cv", h_cv}}) {
        const auto est = kde_fft(resid, h);
        auto out = open_output(out_dir / ("kde_" + label + ".csv"), prov);
        out << "grid_db,density\n";
        for (std::size_t j = 0; j < est.grid.size(); j += 8)
            out << est.grid[j] << ',' << est.density[j] << "\n";
    }
    {
        const auto curve = mode_count_curve(resid);
        auto out = open_output(out_dir / "modes_vs_bandwidth.csv", prov);
        out << "h_db,modes\n";
        for (const auto& pt : curve) out << pt.h << ',' << pt.modes << "\n";
    }

    const int n_boot = cfg.contains("n_boot") ? cfg.at("n_boot").get<int>() : 500;
    const auto dip = dip_test(resid, n_boot, derive_seed(seed, 0xD1));
    const auto crit = silverman_critical_bandwidth(resid, 1, std::min(n_boot, 200),
                                                   derive_seed(seed, 0xC2));
    const auto norm_tests = normality_tests(resid);

    // serial diagnostics in time order
    std::vector<ResidualRow> by_time = rows;
    std::stable_sort(by_time.begin(), by_time.end(),
                     [](const ResidualRow& a, const ResidualRow& b) {
                         return a.timestamp < b.timestamp;
                     });
    std::vector<double> in_time;
    in_time.reserve(by_time.size());
    for (const auto& r : by_time) in_time.push_back(r.residual_db);
    const std::size_t max_lag = std::min<std::size_t>(40, in_time.size() / 4);
    const auto serial = serial_diagnostics(in_time, max_lag);
    {
        auto out = open_output(out_dir / "acf.csv", prov);
        out << "lag,acf,pacf\n";
        for (std::size_t lag = 0; lag <= max_lag; ++lag)
            out << lag << ',' << serial.acf[lag] << ',' << serial.pacf[lag] << "\n";
    }

    json diag{{"silverman_h_db", h_silverman},
              {"cv_h_db", h_cv},
              {"dip", dip.dip},
              {"dip_p", dip.p},
              {"critical_bandwidth_db", crit.h_star},
              {"critical_bandwidth_p", crit.p},
              {"jarque_bera", norm_tests.jarque_bera},
              {"jarque_bera_p", norm_tests.jarque_bera_p},
              {"dagostino", norm_tests.dagostino},
              {"dagostino_p", norm_tests.dagostino_p},
              {"durbin_watson", norm_tests.durbin_watson},
              {"ljung_box_q", serial.ljung_box_q},
              {"ljung_box_p", serial.ljung_box_p}};

    // optional group tests against the cleaned campaign (los/nlos from wall
    // counts, co2 terciles)
    if (cfg.contains("cleaned")) {
        const auto campaign = parse_campaign_csv(cfg.at("cleaned").get<std::string>());
        if (!campaign.records.empty()) {
            std::vector<double> values;
            std::vector<std::string> los_labels, co2_labels;
            std::vector<double> co2;
            for (const auto& r : rows) {
                if (r.record_id >= campaign.records.size()) continue;
                const auto& rec = campaign.records[r.record_id];
                values.push_back(r.residual_db);
                los_labels.emplace_back(rec.walls_brick + rec.walls_wood == 0 ? "los" : "nlos");
                co2.push_back(rec.env[0]);
            }
            if (!co2.empty()) {
                const double t1 = empirical_quantile(co2, 1.0 / 3.0);
                const double t2 = empirical_quantile(co2, 2.0 / 3.0);
                for (double c : co2)
                    co2_labels.emplace_back(c <= t1 ? "low" : (c <= t2 ? "mid" : "high"));
                auto group_json = [](const GroupTestsResult& g) {
                    json groups = json::array();
                    for (const auto& s : g.groups)
                        groups.push_back({{"label", s.label},
                                          {"n", s.n},
                                          {"median", s.median},
                                          {"mad", s.mad}});
                    return json{{"kruskal_wallis_h", g.kruskal_wallis_h},
                                {"kruskal_wallis_p", g.kruskal_wallis_p},
                                {"epsilon2", g.epsilon2},
                                {"brown_forsythe_f", g.brown_forsythe_f},
                                {"brown_forsythe_p", g.brown_forsythe_p},
                                {"eta2", g.eta2},
                                {"groups", groups}};
                };
                bool any_los = false, any_nlos = false;
                for (const auto& l : los_labels) (l == "los" ? any_los : any_nlos) = true;
                if (any_los && any_nlos)
                    diag["los_nlos"] = group_json(group_tests(values, los_labels));
                diag["co2_terciles"] = group_json(group_tests(values, co2_labels));
            }
        }
    }
    write_json(out_dir / "diagnostics.json", diag, prov);
    std::cout << "selected residual family: " << best.family() << "\n";
    return kExitOk;
}

// ------------------------------------------------------------- calibrate --

int cmd_calibrate(const json& cfg, const fs::path& out_dir, const Provenance& prov) {
    const auto rows = read_residuals_csv(cfg.at("residuals").get<std::string>());
    const auto holdout = read_holdout_csv(cfg.at("holdout").get<std::string>());
    if (rows.empty() || holdout.empty()) {
        emit_error(out_dir, "EmptyFile", "empty residuals or holdout input");
        return kExitEmpty;
    }

    std::vector<ResidualRow> by_time = rows;
    std::stable_sort(by_time.begin(), by_time.end(),
                     [](const ResidualRow& a, const ResidualRow& b) {
                         return a.timestamp < b.timestamp;
                     });
    std::vector<double> resid;
    resid.reserve(by_time.size());
    for (const auto& r : by_time) resid.push_back(r.residual_db);

    std::vector<double> test_true, test_pred;
    for (const auto& h : holdout) {
        test_true.push_back(h.true_pl);
        test_pred.push_back(h.pred_pl);
    }

    std::vector<double> targets = {0.05, 0.02, 0.01};
    if (cfg.contains("targets")) {
        targets.clear();
        for (double p : cfg.at("targets")) targets.push_back(p);
    }
    const double heuristic = cfg.contains("heuristic_fm") ? cfg.at("heuristic_fm").get<double>()
                                                          : 10.0;
    const int B = cfg.contains("bootstrap_b") ? cfg.at("bootstrap_b").get<int>() : 1000;
    const std::string model_name = cfg.contains("model_name")
                                       ? cfg.at("model_name").get<std::string>()
                                       : std::string("model");

    const auto gmm3 = fit_gmm(resid, 3, 4, 1e-3, derive_seed(prov.seed, 0xF4));
    auto table = pdr_sweep(model_name, resid, &gmm3.dist, test_true, test_pred, targets,
                           heuristic, B, derive_seed(prov.seed, 0xF5));

    // fold-to-fold margin dispersion from the residual provenance
    {
        std::map<int, std::vector<double>> by_fold;
        for (const auto& r : by_time) by_fold[r.fold].push_back(r.residual_db);
        std::vector<std::vector<double>> folds;
        for (auto& [fold, values] : by_fold) folds.push_back(std::move(values));
        for (auto& row : table)
            if (row.estimator != "heuristic") row.fold_sd = fold_fm_dispersion(folds, row.p);
    }

    {
        auto out = open_output(out_dir / "fm_report.csv", prov);
        out << "model,p_pct,estimator,fm_db,ci_lo_db,ci_hi_db,achieved_pdr,fm_fold_sd\n";
        for (const auto& row : table)
            out << row.model << ',' << 100.0 * row.p << ',' << row.estimator << ',' << row.fm_db
                << ',' << row.ci_lo << ',' << row.ci_hi << ',' << row.pdr << ',' << row.fold_sd
                << "\n";
    }
    json rows_json = json::array();
    for (const auto& row : table)
        rows_json.push_back({{"model", row.model},
                             {"p", row.p},
                             {"estimator", row.estimator},
                             {"fm_db", row.fm_db},
                             {"ci_lo_db", row.ci_lo},
                             {"ci_hi_db", row.ci_hi},
                             {"achieved_pdr", row.pdr},
                             {"fm_fold_sd", row.fold_sd}});
    write_json(out_dir / "fm_report.json", json{{"rows", rows_json}}, prov);

    // dense pdr-versus-margin curve for plotting
    {
        auto out = open_output(out_dir / "pdr_sweep.csv", prov);
        out << "fm_db,pdr,p_target,ci_lo_db,ci_hi_db\n";
        const double fm_max = empirical_quantile(resid, 0.9999) + 10.0;
        for (double fm = 0.0; fm <= fm_max; fm += 0.25)
            out << fm << ',' << achieved_pdr(test_true, test_pred, fm) << ",,,\n";
        for (const auto& row : table) {
            if (row.estimator == "heuristic") continue;
            out << row.fm_db << ',' << row.pdr << ',' << row.p << ',' << row.ci_lo << ','
                << row.ci_hi << "\n";
        }
    }
    for (const auto& row : table)
        std::cout << row.model << " p=" << row.p << " (" << row.estimator << "): FM "
                  << row.fm_db << " dB, achieved PDR " << row.pdr << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- synth --

int cmd_synth(const json& cfg, const fs::path& out_dir, const Provenance& prov) {
    GroundTruth truth;
    if (cfg.contains("noise") && cfg.at("noise") == "normal") {
        const double sd = cfg.contains("noise_sd") ? cfg.at("noise_sd").get<double>() : 2.0;
        truth.noise = Distribution::normal(0.0, sd);
    }
    if (cfg.contains("exponent")) truth.exponent = cfg.at("exponent");
    if (cfg.contains("intercept")) truth.intercept = cfg.at("intercept");
    const int n = cfg.contains("n_per_device") ? cfg.at("n_per_device").get<int>() : 2000;

    const auto campaign = generate_campaign(truth, n, prov.seed);
    write_campaign_csv(out_dir / "campaign.csv", campaign, prov);

    json truth_json{{"intercept", truth.intercept},
                    {"exponent", truth.exponent},
                    {"loss_brick", truth.loss_brick},
                    {"loss_wood", truth.loss_wood},
                    {"env_coefficients", truth.env_coefficients},
                    {"k_snr", truth.k_snr},
                    {"n_per_device", n}};
    if (truth.noise.family == Family::gmm) {
        truth_json["noise"] = {{"family", "gmm"},
                               {"weights", truth.noise.mixture.weights},
                               {"means", truth.noise.mixture.means},
                               {"sds", truth.noise.mixture.sds}};
    } else {
        truth_json["noise"] = {{"family", "normal"}, {"sd", truth.noise.p2}};
    }
    write_json(out_dir / "truth.json", truth_json, prov);
    std::cout << "wrote " << campaign.size() << " synthetic records\n";
    return kExitOk;
}

// ---------------------------------------------------------------- report --

int cmd_report(const json& cfg, const fs::path& out_dir, const Provenance& prov) {
    json ingest_cfg = cfg;
    const int rc = cmd_ingest(ingest_cfg, out_dir, prov);
    if (rc != kExitOk) return rc;

    const auto cleaned = parse_campaign_csv((out_dir / "cleaned.csv").string());

    std::vector<std::string> models = {"mlr", "poly2"};
    if (cfg.contains("models")) {
        models.clear();
        for (const auto& m : cfg.at("models")) models.push_back(m.get<std::string>());
    }
    FitOutputs best;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (const auto& model : models) {
        const auto outputs = run_fit_pipeline(cfg, out_dir, prov, cleaned.records, model);
        if (outputs.cv_rmse < best_rmse) {
            best_rmse = outputs.cv_rmse;
            best = outputs;
        }
    }

    json anova_cfg = cfg;
    anova_cfg["input"] = (out_dir / "cleaned.csv").string();
    cmd_anova(anova_cfg, out_dir, prov);

    json resid_cfg;
    resid_cfg["input"] = best.residuals_csv.string();
    resid_cfg["cleaned"] = (out_dir / "cleaned.csv").string();
    if (cfg.contains("n_boot")) resid_cfg["n_boot"] = cfg.at("n_boot");
    if (cfg.contains("gmm_k")) resid_cfg["gmm_k"] = cfg.at("gmm_k");
    cmd_residuals(resid_cfg, out_dir, prov);

    json cal_cfg = cfg;
    cal_cfg["residuals"] = best.residuals_csv.string();
    cal_cfg["holdout"] = best.holdout_csv.string();
    cal_cfg["model_name"] = best.name;
    return cmd_calibrate(cal_cfg, out_dir, prov);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"indoor path-loss modeling workbench"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::string config_path;
    app.add_option("--seed", seed, "root seed for all randomized steps");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--config", config_path, "JSON config file merged under the CLI flags");

    // each subcommand collects its own options into a json blob so that the
    // config file and flags share one schema
    json flags;
    auto add_common_columns = [&flags](CLI::App* cmd) {
        for (const char* key :
             {"col-device", "col-timestamp", "col-distance", "col-brick", "col-wood", "col-co2",
              "col-rh", "col-temp", "col-pressure", "col-pm25", "col-snr", "col-sf", "col-freq",
              "col-pathloss", "timestamp-format"}) {
            std::string json_key = key;
            for (auto& c : json_key)
                if (c == '-') c = '_';
            cmd->add_option_function<std::string>(
                "--" + std::string(key),
                [&flags, json_key](const std::string& v) { flags[json_key] = v; });
        }
    };

    auto* ingest = app.add_subcommand("ingest", "parse, deduplicate, filter and outlier-screen");
    ingest->add_option_function<std::string>(
        "--input", [&flags](const std::string& v) { flags["input"] = v; });
    ingest->add_option_function<double>(
        "--contamination", [&flags](double v) { flags["contamination"] = v; });
    ingest->add_option_function<int>("--trees", [&flags](int v) { flags["iforest_trees"] = v; });
    ingest->add_option_function<int>("--subsample",
                                     [&flags](int v) { flags["iforest_subsample"] = v; });
    ingest->add_option_function<std::string>("--sf-keep", [&flags](const std::string& v) {
        std::vector<int> keep;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ',')) keep.push_back(std::stoi(tok));
        flags["sf_keep"] = keep;
    });
    add_common_columns(ingest);

    auto* fit = app.add_subcommand("fit", "cross-validate and fit a mean model");
    fit->add_option_function<std::string>(
        "--input", [&flags](const std::string& v) { flags["input"] = v; });
    fit->add_option_function<std::string>("--model",
                                          [&flags](const std::string& v) { flags["model"] = v; });
    fit->add_option_function<std::string>(
        "--penalty", [&flags](const std::string& v) { flags["penalty"] = v; });
    fit->add_option_function<double>("--lambda", [&flags](double v) { flags["lambda"] = v; });
    fit->add_option_function<double>("--alpha", [&flags](double v) { flags["alpha"] = v; });
    fit->add_option_function<std::string>("--lambda-grid", [&flags](const std::string& v) {
        std::vector<double> grid;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
        flags["lambda_grid"] = grid;
    });
    fit->add_option_function<double>("--zellner-g", [&flags](double v) { flags["zellner_g"] = v; });
    fit->add_option_function<double>("--test-fraction",
                                     [&flags](double v) { flags["test_fraction"] = v; });
    fit->add_option_function<int>("--cv-k", [&flags](int v) { flags["cv_k"] = v; });
    fit->add_option_function<double>("--gap-hours", [&flags](double v) { flags["gap_hours"] = v; });
    fit->add_flag_function("--dump-design",
                           [&flags](std::int64_t v) { flags["dump_design"] = v > 0; });

    auto* anova_cmd = app.add_subcommand("anova", "robust anova, nested blocks and vifs");
    anova_cmd->add_option_function<std::string>(
        "--input", [&flags](const std::string& v) { flags["input"] = v; });
    anova_cmd->add_option_function<int>("--type", [&flags](int v) { flags["type"] = v; });
    anova_cmd->add_flag_function("--robust,!--no-robust",
                                 [&flags](std::int64_t v) { flags["robust"] = v > 0; });

    auto* residuals = app.add_subcommand("residuals", "distribution forensics on oof residuals");
    residuals->add_option_function<std::string>(
        "--input", [&flags](const std::string& v) { flags["input"] = v; });
    residuals->add_option_function<std::string>(
        "--cleaned", [&flags](const std::string& v) { flags["cleaned"] = v; });
    residuals->add_option_function<int>("--n-boot", [&flags](int v) { flags["n_boot"] = v; });

    auto* calibrate = app.add_subcommand("calibrate", "fade margins and held-out pdr");
    calibrate->add_option_function<std::string>(
        "--residuals", [&flags](const std::string& v) { flags["residuals"] = v; });
    calibrate->add_option_function<std::string>(
        "--holdout", [&flags](const std::string& v) { flags["holdout"] = v; });
    calibrate->add_option_function<std::string>("--targets", [&flags](const std::string& v) {
        std::vector<double> t;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ',')) t.push_back(std::stod(tok));
        flags["targets"] = t;
    });
    calibrate->add_option_function<double>("--heuristic-fm",
                                           [&flags](double v) { flags["heuristic_fm"] = v; });
    calibrate->add_option_function<int>("--bootstrap-b",
                                        [&flags](int v) { flags["bootstrap_b"] = v; });
    calibrate->add_option_function<std::string>(
        "--model-name", [&flags](const std::string& v) { flags["model_name"] = v; });

    auto* synth = app.add_subcommand("synth", "generate a synthetic campaign");
    synth->add_option_function<int>("--n-per-device",
                                    [&flags](int v) { flags["n_per_device"] = v; });
    synth->add_option_function<std::string>("--noise",
                                            [&flags](const std::string& v) { flags["noise"] = v; });
    synth->add_option_function<double>("--noise-sd", [&flags](double v) { flags["noise_sd"] = v; });

    auto* report = app.add_subcommand("report", "full pipeline: ingest, fit, anova, residuals, calibrate");
    report->add_option_function<std::string>(
        "--input", [&flags](const std::string& v) { flags["input"] = v; });
    report->add_option_function<std::string>("--models", [&flags](const std::string& v) {
        std::vector<std::string> models;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ',')) models.push_back(tok);
        flags["models"] = models;
    });
    report->add_option_function<int>("--n-boot", [&flags](int v) { flags["n_boot"] = v; });
    report->add_option_function<int>("--bootstrap-b",
                                     [&flags](int v) { flags["bootstrap_b"] = v; });
    add_common_columns(report);

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "cannot read config: " << config_path << "\n";
                return kExitInput;
            }
            in >> cfg;
        }
        // flags override the config file
        for (auto& [key, value] : flags.items()) cfg[key] = value;

        const fs::path out_path(out_dir);
        fs::create_directories(out_path);

        Provenance prov;
        prov.seed = seed;
        json hashed = cfg;
        hashed["_seed"] = seed;
        hashed["_command"] = app.get_subcommands().front()->get_name();
        prov.config_hash = fnv1a_hex(hashed.dump());
        write_json(out_path / "run_config.json", hashed, prov);

        const std::string sub = app.get_subcommands().front()->get_name();
        const std::map<std::string, std::vector<std::string>> required = {
            {"ingest", {"input"}},       {"fit", {"input"}},
            {"anova", {"input"}},        {"residuals", {"input"}},
            {"calibrate", {"residuals", "holdout"}},
            {"report", {"input"}},       {"synth", {}},
        };
        for (const auto& key : required.at(sub)) {
            if (!cfg.contains(key)) {
                std::cerr << sub << ": missing required option --" << key
                          << " (flag or config key)\n";
                return kExitInput;
            }
        }
        if (sub == "ingest") return cmd_ingest(cfg, out_path, prov);
        if (sub == "fit") return cmd_fit(cfg, out_path, prov);
        if (sub == "anova") return cmd_anova(cfg, out_path, prov);
        if (sub == "residuals") return cmd_residuals(cfg, out_path, prov);
        if (sub == "calibrate") return cmd_calibrate(cfg, out_path, prov);
        if (sub == "synth") return cmd_synth(cfg, out_path, prov);
        if (sub == "report") return cmd_report(cfg, out_path, prov);
        return kExitInput;
    } catch (const MissingColumn& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const EmptyFile& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const AllRowsDropped& e) {
        std::cerr << "empty result: " << e.what() << "\n";
        return kExitEmpty;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
