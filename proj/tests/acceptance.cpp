// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero if a required
// criterion fails. Criterion 12 needs the public measurement campaign and is
// skipped unless PATHLOSS_CAMPAIGN_CSV points at it.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "pathloss/pathloss.hpp"

using namespace pathloss;

namespace {

struct Outcome {
    bool pass = false;
    bool skipped = false;
    std::string detail;
};

std::vector<std::size_t> all_rows(const DesignMatrix& d) {
    std::vector<std::size_t> rows(d.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
}

DesignMatrix standardized(const DesignMatrix& d) {
    return apply_standardizer(fit_standardizer(d, all_rows(d)), d);
}

// --- criterion 1: poly2 column counts ---------------------------------------
Outcome criterion_column_counts() {
    const auto records = generate_campaign(GroundTruth{}, 10, 1);
    FeatureSpec spec;
    spec.kind = FeatureKind::poly2;
    const auto with_snr = build_design(records, spec).cols();
    spec.include_snr = false;
    const auto without_snr = build_design(records, spec).cols();
    Outcome o;
    o.pass = with_snr == 37 && without_snr == 29;
    o.detail = "poly2 columns " + std::to_string(with_snr) + "/37, snr-less " +
               std::to_string(without_snr) + "/29";
    return o;
}

// --- criterion 2: regression oracle equivalence ------------------------------
std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        const double d = a[col][col];
        for (std::size_t c = col; c < n; ++c) a[col][c] /= d;
        b[col] /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0.0) continue;
            const double f = a[r][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    return b;
}

Outcome criterion_regression_oracles() {
    Rng rng(1002);
    double worst_ols = 0.0, worst_ridge = 0.0, worst_kkt = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 30 + static_cast<int>(rng.uniform_index(170));
        const int p = 1 + static_cast<int>(rng.uniform_index(10));
        Eigen::MatrixXd X(n, p);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
            y(i) = 1.0 + 2.0 * X(i, 0) + rng.normal();
        }
        DesignMatrix d;
        d.X = X;
        d.y = y;
        for (int j = 0; j < p; ++j) d.columns.push_back({"x" + std::to_string(j), Block::environment});

        // ols against the normal equations
        const auto ols = fit_linear(d, PenaltySpec::none());
        {
            std::vector<std::vector<double>> a(static_cast<std::size_t>(p) + 1,
                                               std::vector<double>(static_cast<std::size_t>(p) + 1,
                                                                   0.0));
            std::vector<double> b(static_cast<std::size_t>(p) + 1, 0.0);
            for (int i = 0; i < n; ++i) {
                std::vector<double> row(static_cast<std::size_t>(p) + 1, 1.0);
                for (int j = 0; j < p; ++j) row[static_cast<std::size_t>(j) + 1] = X(i, j);
                for (std::size_t r = 0; r < row.size(); ++r) {
                    b[r] += row[r] * y(i);
                    for (std::size_t c = 0; c < row.size(); ++c) a[r][c] += row[r] * row[c];
                }
            }
            const auto oracle = gauss_solve(std::move(a), std::move(b));
            worst_ols = std::max(worst_ols, std::fabs(ols.intercept - oracle[0]));
            for (int j = 0; j < p; ++j)
                worst_ols = std::max(worst_ols,
                                     std::fabs(ols.beta(j) - oracle[static_cast<std::size_t>(j) + 1]));
        }

        // ridge against its closed form
        const double lambda = std::exp(rng.uniform(-4.0, 1.0));
        {
            const auto ridge = fit_linear(d, PenaltySpec::ridge(lambda));
            Eigen::VectorXd xm = X.colwise().mean();
            Eigen::MatrixXd Xc = X.rowwise() - xm.transpose();
            Eigen::VectorXd yc = y.array() - y.mean();
            std::vector<std::vector<double>> a(static_cast<std::size_t>(p),
                                               std::vector<double>(static_cast<std::size_t>(p)));
            std::vector<double> b(static_cast<std::size_t>(p));
            for (int r = 0; r < p; ++r) {
                b[static_cast<std::size_t>(r)] = Xc.col(r).dot(yc);
                for (int c = 0; c < p; ++c)
                    a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                        Xc.col(r).dot(Xc.col(c)) + (r == c ? 2.0 * lambda * n : 0.0);
            }
            const auto oracle = gauss_solve(std::move(a), std::move(b));
            for (int j = 0; j < p; ++j)
                worst_ridge = std::max(worst_ridge,
                                       std::fabs(ridge.beta(j) - oracle[static_cast<std::size_t>(j)]));
        }

        // lasso kkt
        {
            const double lam = 0.05 + 0.2 * rng.uniform();
            const auto lasso = fit_linear(d, PenaltySpec::lasso(lam), 1e-12);
            const Eigen::VectorXd r = y - predict(lasso, d);
            const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
            for (int j = 0; j < p; ++j) {
                const double corr = Xc.col(j).dot(r) / n;
                if (lasso.beta(j) == 0.0) {
                    worst_kkt = std::max(worst_kkt, std::max(0.0, std::fabs(corr) - lam));
                } else {
                    worst_kkt = std::max(worst_kkt,
                                         std::fabs(corr - lam * (lasso.beta(j) > 0 ? 1.0 : -1.0)));
                }
            }
        }
    }
    Outcome o;
    o.pass = worst_ols < 1e-8 && worst_ridge < 1e-8 && worst_kkt < 1e-6;
    std::ostringstream os;
    os << "max |ols-oracle| " << worst_ols << ", |ridge-closed form| " << worst_ridge
       << ", kkt slack " << worst_kkt;
    o.detail = os.str();
    return o;
}

// --- criterion 3: blr identities ---------------------------------------------
Outcome criterion_blr_identities() {
    Rng rng(33);
    Eigen::MatrixXd X(200, 5);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) {
        for (int j = 0; j < 5; ++j) X(i, j) = rng.normal();
        y(i) = 3.0 + X(i, 0) - 2.0 * X(i, 4) + rng.normal();
    }
    DesignMatrix d;
    d.X = X;
    d.y = y;
    for (int j = 0; j < 5; ++j) d.columns.push_back({"x" + std::to_string(j), Block::environment});

    const auto ols = fit_linear(d, PenaltySpec::none());
    const auto diffuse = fit_blr_nig(d, NIGPrior::diffuse());
    double worst_nig = std::fabs(diffuse.beta_n(0) - ols.intercept);
    for (int j = 0; j < 5; ++j)
        worst_nig = std::max(worst_nig, std::fabs(diffuse.beta_n(j + 1) - ols.beta(j)));

    double worst_zell = 0.0;
    for (double g : {0.5, 1.0, 7.0, 100.0}) {
        const auto zp = fit_blr_zellner(d, g);
        const double shrink = g / (1.0 + g);
        worst_zell = std::max(worst_zell, std::fabs(zp.beta_n(0) - shrink * ols.intercept));
        for (int j = 0; j < 5; ++j)
            worst_zell = std::max(worst_zell,
                                  std::fabs(zp.beta_n(j + 1) - shrink * ols.beta(j)));
    }
    Outcome o;
    o.pass = worst_nig < 1e-8 && worst_zell < 1e-10;
    std::ostringstream os;
    os << "diffuse-vs-ols " << worst_nig << ", zellner shrink err " << worst_zell;
    o.detail = os.str();
    return o;
}

// --- criterion 4: synthetic coefficient recovery ------------------------------
Outcome criterion_coefficient_recovery() {
    GroundTruth truth; // reported campaign coefficients
    truth.noise = Distribution::normal(0.0, 2.0);
    const auto records = generate_campaign(truth, 3334, 404); // ~2e4 records
    FeatureSpec spec;
    const auto design = standardized(build_design(records, spec));
    const auto m = fit_linear(design, PenaltySpec::none());

    double err_exp = 0.0, err_wall = 0.0, err_env = 0.0;
    for (std::size_t j = 0; j < m.column_names.size(); ++j) {
        const auto& name = m.column_names[j];
        if (name == "z_d") err_exp = std::fabs(m.natural.beta[j] - truth.exponent);
        else if (name == "wall_brick")
            err_wall = std::max(err_wall, std::fabs(m.natural.beta[j] - truth.loss_brick));
        else if (name == "wall_wood")
            err_wall = std::max(err_wall, std::fabs(m.natural.beta[j] - truth.loss_wood));
        else if (name != "snr") {
            for (std::size_t e = 0; e < kEnvCount; ++e)
                if (name == kEnvNames[e])
                    err_env = std::max(err_env,
                                       std::fabs(m.natural.beta[j] - truth.env_coefficients[e]));
        }
    }
    Outcome o;
    o.pass = err_exp < 0.05 && err_wall < 0.3 && err_env < 0.01;
    std::ostringstream os;
    os << "exponent err " << err_exp << " (<0.05), wall err " << err_wall
       << " (<0.3), env err " << err_env << " (<0.01)";
    o.detail = os.str();
    return o;
}

// --- criterion 5: leakage guard ---------------------------------------------
Outcome criterion_leakage_guard() {
    auto records = generate_campaign(GroundTruth{}, 300, 55);
    const auto plan = make_time_blocked_folds(records, 5, 1.0);
    FeatureSpec spec;
    const auto design = build_design(records, spec);

    bool exact = true;
    for (int fold = 0; fold < 5 && exact; ++fold) {
        const auto train_rows = plan.training_rows(records, fold);
        const auto before = fit_standardizer(design, train_rows);

        auto shifted = records;
        for (auto idx : plan.validation_rows(records, fold)) {
            shifted[idx].path_loss_db += 1000.0;
            shifted[idx].env[2] += 77.0;
            shifted[idx].snr_db -= 40.0;
        }
        const auto after = fit_standardizer(build_design(shifted, spec), train_rows);
        exact = before.mean == after.mean && before.std == after.std;
    }
    Outcome o;
    o.pass = exact;
    o.detail = exact ? "fold-train statistics unchanged by validation-only shifts (exact)"
                     : "standardizer moved";
    return o;
}

// --- criterion 6: anova calibration under the null ----------------------------
Outcome criterion_anova_calibration() {
    std::vector<double> pvalues;
    Rng master(606);
    for (int s = 0; s < 200; ++s) {
        Rng rng(derive_seed(607, static_cast<std::uint64_t>(s)));
        const int n = 120;
        Eigen::MatrixXd X(n, 2);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = rng.normal();
            X(i, 1) = rng.normal(); // true-null regressor
            y(i) = 1.5 * X(i, 0) + rng.normal();
        }
        DesignMatrix full_d;
        full_d.X = X;
        full_d.y = y;
        full_d.columns = {{"a", Block::environment}, {"b", Block::environment}};
        DesignMatrix restr_d;
        restr_d.X = X.leftCols(1);
        restr_d.y = y;
        restr_d.columns = {{"a", Block::environment}};
        const auto full = fit_linear(full_d, PenaltySpec::none());
        const auto restr = fit_linear(restr_d, PenaltySpec::none());
        pvalues.push_back(partial_f(restr, full, n).p);
    }
    // ks distance against uniform
    std::sort(pvalues.begin(), pvalues.end());
    double ks = 0.0;
    const double n = static_cast<double>(pvalues.size());
    for (std::size_t i = 0; i < pvalues.size(); ++i) {
        ks = std::max(ks, std::fabs((static_cast<double>(i) + 1.0) / n - pvalues[i]));
        ks = std::max(ks, std::fabs(static_cast<double>(i) / n - pvalues[i]));
    }
    const double ks_crit = 1.358 / std::sqrt(n); // 5% asymptotic

    // single-added-column partial F equals squared t
    Rng rng(608);
    const int m = 250;
    Eigen::MatrixXd X(m, 3);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
        y(i) = X(i, 0) + 0.3 * X(i, 2) + rng.normal();
    }
    DesignMatrix full_d;
    full_d.X = X;
    full_d.y = y;
    full_d.columns = {{"a", Block::environment}, {"b", Block::environment}, {"c", Block::environment}};
    DesignMatrix restr_d;
    restr_d.X = X.leftCols(2);
    restr_d.y = y;
    restr_d.columns = {{"a", Block::environment}, {"b", Block::environment}};
    const auto full = fit_linear(full_d, PenaltySpec::none());
    const auto restr = fit_linear(restr_d, PenaltySpec::none());
    const double f_stat = partial_f(restr, full, m).F;
    const double t_sq = anova(full, full_d, AnovaType::II, false).rows[2].F;
    const double f_vs_t = std::fabs(f_stat - t_sq);

    Outcome o;
    o.pass = ks < ks_crit && f_vs_t < 1e-8;
    std::ostringstream os;
    os << "null-p ks " << ks << " (<" << ks_crit << "), |F - t^2| " << f_vs_t;
    o.detail = os.str();
    return o;
}

// --- criterion 7: residual-law selection consistency ---------------------------
Outcome criterion_selection_consistency() {
    auto select_family = [](const std::vector<double>& sample, std::uint64_t seed) {
        std::vector<ResidualFit> fits;
        for (Family f : {Family::normal, Family::skew_normal, Family::student_t, Family::cauchy})
            fits.push_back(fit_distribution(sample, f));
        for (std::size_t k = 1; k <= 5; ++k)
            fits.push_back(fit_gmm(sample, k, 2, 1e-3, derive_seed(seed, k)));
        const auto& best = select_residual_model(fits);
        if (best.dist.family == Family::gmm)
            return "gmm_k" + std::to_string(best.dist.mixture.components());
        return std::string(family_name(best.dist.family));
    };

    Gmm truth;
    truth.weights = {0.3, 0.45, 0.25};
    truth.means = {-6.0, 0.0, 7.0};
    truth.sds = {1.5, 1.0, 2.5};
    const auto mixture_law = Distribution::from_mixture(truth);

    int mixture_wins = 0, normal_wins = 0;
    const int seeds = 20, n = 4000;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(derive_seed(700, static_cast<std::uint64_t>(s)));
        std::vector<double> mix(n), gauss(n);
        for (auto& v : mix) v = mixture_law.sample(rng);
        for (auto& v : gauss) v = rng.normal(0.0, 2.0);
        if (select_family(mix, 7000 + static_cast<std::uint64_t>(s)) == "gmm_k3") ++mixture_wins;
        if (select_family(gauss, 8000 + static_cast<std::uint64_t>(s)) == "normal") ++normal_wins;
    }
    Outcome o;
    o.pass = mixture_wins >= 18 && normal_wins >= 18;
    o.detail = "gmm-3 picked " + std::to_string(mixture_wins) + "/20, normal picked " +
               std::to_string(normal_wins) + "/20 (>=18 each)";
    return o;
}

// --- criterion 8: kde exactness ------------------------------------------------
Outcome criterion_kde_exactness() {
    Rng rng(808);
    std::vector<double> x(10000);
    for (auto& v : x) v = rng.normal();
    const std::size_t grid = 1 << 14;
    const double h = 0.3, pad = 8.0;
    const auto est = kde_fft(x, h, grid, pad);

    // direct kernel summation over the same binned representation
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    const double lo = *mn - pad * h;
    const double step = (*mx + pad * h - lo) / static_cast<double>(grid);
    std::vector<double> counts(grid, 0.0);
    for (double v : x) {
        std::size_t idx = static_cast<std::size_t>(std::llround((v - lo) / step));
        counts[std::min(idx, grid - 1)] += 1.0;
    }
    std::vector<std::size_t> occupied;
    for (std::size_t i = 0; i < grid; ++i)
        if (counts[i] > 0.0) occupied.push_back(i);
    const double norm = 1.0 / (std::sqrt(2.0 * kPi) * h * static_cast<double>(x.size()));
    std::vector<double> direct(grid, 0.0);
    for (std::size_t j = 0; j < grid; ++j) {
        double s = 0.0;
        for (std::size_t i : occupied) {
            const double lag = (static_cast<double>(j) - static_cast<double>(i)) * step;
            s += counts[i] * std::exp(-0.5 * (lag / h) * (lag / h));
        }
        direct[j] = s * norm;
    }
    double integral = 0.0;
    for (std::size_t j = 1; j < grid; ++j) integral += 0.5 * (direct[j - 1] + direct[j]) * step;
    for (auto& d : direct) d /= integral;

    double worst = 0.0;
    for (std::size_t j = 0; j < grid; ++j)
        worst = std::max(worst, std::fabs(est.density[j] - direct[j]));
    Outcome o;
    o.pass = worst < 1e-10;
    std::ostringstream os;
    os << "max |fft - direct| " << worst << " (<1e-10)";
    o.detail = os.str();
    return o;
}

// --- criterion 9: modality ------------------------------------------------------
Outcome criterion_modality() {
    Rng rng(909);
    std::vector<double> bimodal(1600), gauss(1600);
    for (std::size_t i = 0; i < bimodal.size(); ++i)
        bimodal[i] = (i % 2 ? 5.0 : -5.0) + 0.5 * rng.normal();
    for (auto& v : gauss) v = rng.normal();

    const auto dip_bi = dip_test(bimodal, 500, 91);
    const auto dip_uni = dip_test(gauss, 500, 92);
    const auto crit = silverman_critical_bandwidth(bimodal, 1, 40, 93);

    Outcome o;
    o.pass = dip_bi.p < 0.01 && crit.h_star > 1.0 && dip_uni.p > 0.2;
    std::ostringstream os;
    os << "bimodal dip p " << dip_bi.p << " (<0.01), h* " << crit.h_star
       << " (>1), gaussian dip p " << dip_uni.p << " (>0.2)";
    o.detail = os.str();
    return o;
}

// --- criterion 10: fade-margin calibration end to end ----------------------------
Outcome criterion_fm_calibration() {
    GroundTruth truth; // default 3-component mixture noise
    const auto campaign = generate_campaign(truth, 42000, 1010); // 252k records
    const auto split = chronological_split(campaign, 0.2);

    const auto plan = make_time_blocked_folds(split.train, 5, 1.0);
    FeatureSpec spec;
    const auto cv = run_cv(split.train, spec, ModelSpec::ols(), plan);
    std::vector<double> resid;
    resid.reserve(cv.residuals.size());
    for (const auto& r : cv.residuals) resid.push_back(r.residual_db);

    auto train_design = build_design(split.train, spec);
    const auto st = fit_standardizer(train_design, all_rows(train_design));
    const auto model = fit_linear(apply_standardizer(st, train_design), PenaltySpec::none());
    const auto test_design = apply_standardizer(st, build_design(split.test, spec));
    const Eigen::VectorXd pred = predict(model, test_design);
    std::vector<double> test_true(test_design.rows()), test_pred(test_design.rows());
    for (std::size_t i = 0; i < test_true.size(); ++i) {
        test_true[i] = test_design.y(static_cast<Eigen::Index>(i));
        test_pred[i] = pred(static_cast<Eigen::Index>(i));
    }

    const auto gmm3 = fit_gmm(resid, 3, 3, 1e-3, 777);
    double worst_gap = 0.0;
    double prev_fm = -std::numeric_limits<double>::infinity();
    bool monotone = true;
    std::ostringstream os;
    os << "n_test " << test_true.size();
    // tighter reliability (smaller p) must never prescribe a smaller margin
    for (double p : {0.05, 0.02, 0.01}) {
        const auto fm = prescribe_fm(resid, &gmm3.dist, p);
        const double pdr = achieved_pdr(test_true, test_pred, fm.fm_db);
        worst_gap = std::max(worst_gap, std::fabs(pdr - (1.0 - p)));
        if (fm.fm_db < prev_fm - 1e-12) monotone = false;
        prev_fm = fm.fm_db;
        os << ", p=" << p << ": FM " << std::setprecision(4) << fm.fm_db << " pdr "
           << std::setprecision(5) << pdr;
    }
    os << ", worst |pdr-target| " << worst_gap << " (<0.005)";
    Outcome o;
    o.pass = worst_gap < 0.005 && monotone && test_true.size() >= 50000;
    o.detail = os.str();
    return o;
}

// --- criterion 11: bootstrap coverage ----------------------------------------------
Outcome criterion_bootstrap_coverage() {
    const double truth = norm_quantile(0.95);
    int covered = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(1111, static_cast<std::uint64_t>(t)));
        std::vector<double> x(20000);
        for (auto& v : x) v = rng.normal();
        const auto ci = bootstrap_ci(x, 0.05, BootstrapMethod::bca_iid, 400,
                                     derive_seed(2222, static_cast<std::uint64_t>(t)));
        if (truth >= ci.lo && truth <= ci.hi) ++covered;
    }
    Outcome o;
    o.pass = covered >= 90;
    o.detail = "95% bca covered the true quantile in " + std::to_string(covered) +
               "/100 trials (>=90)";
    return o;
}

// --- criterion 12 (optional): paper-number reproduction ------------------------------
Outcome criterion_paper_numbers() {
    const char* path = std::getenv("PATHLOSS_CAMPAIGN_CSV");
    Outcome o;
    if (path == nullptr) {
        o.skipped = true;
        o.detail = "set PATHLOSS_CAMPAIGN_CSV to the public campaign export to enable";
        return o;
    }
    const auto parsed = parse_campaign_csv(path);
    CleaningConfig cleaning;
    cleaning.seed = 1;
    const auto cleaned = clean(parsed.records, cleaning);
    const auto split = chronological_split(cleaned.kept, 0.2);
    const auto plan = make_time_blocked_folds(split.train, 5, 24.0);

    FeatureSpec linear;
    FeatureSpec poly;
    poly.kind = FeatureKind::poly2;
    const auto cv_linear = run_cv(split.train, linear, ModelSpec::ols(), plan);
    const auto cv_poly = run_cv(split.train, poly, ModelSpec::ols(), plan);
    const double rmse_linear = cv_linear.pooled_validation().rmse;
    const double rmse_poly = cv_poly.pooled_validation().rmse;

    std::vector<double> resid;
    for (const auto& r : cv_poly.residuals) resid.push_back(r.residual_db);
    std::vector<ResidualFit> fits;
    for (Family f : {Family::normal, Family::skew_normal, Family::student_t, Family::cauchy})
        fits.push_back(fit_distribution(resid, f));
    for (std::size_t k = 1; k <= 5; ++k) fits.push_back(fit_gmm(resid, k, 4, 1e-3, 5 + k));
    const auto& best = select_residual_model(fits);
    const bool gmm3_wins =
        best.dist.family == Family::gmm && best.dist.mixture.components() == 3;

    auto train_design = build_design(split.train, poly);
    const auto st = fit_standardizer(train_design, all_rows(train_design));
    const auto model = fit_linear(apply_standardizer(st, train_design), PenaltySpec::none());
    const auto test_design = apply_standardizer(st, build_design(split.test, poly));
    const Eigen::VectorXd pred = predict(model, test_design);
    std::vector<double> test_true(test_design.rows()), test_pred(test_design.rows());
    for (std::size_t i = 0; i < test_true.size(); ++i) {
        test_true[i] = test_design.y(static_cast<Eigen::Index>(i));
        test_pred[i] = pred(static_cast<Eigen::Index>(i));
    }
    const auto gmm3 = fit_gmm(resid, 3, 4, 1e-3, 9);
    const auto fm = prescribe_fm(resid, &gmm3.dist, 0.01);
    const double pdr = achieved_pdr(test_true, test_pred, fm.fm_db);

    std::ostringstream os;
    os << "cv rmse linear " << rmse_linear << " (8.07+-0.15), poly " << rmse_poly
       << " (7.09+-0.15), gmm3 " << (gmm3_wins ? "selected" : "not selected") << ", FM(1%) "
       << fm.fm_db << " (25.73+-0.5), pdr " << pdr << " (>=0.989)";
    o.detail = os.str();
    o.pass = std::fabs(rmse_linear - 8.07) < 0.15 && std::fabs(rmse_poly - 7.09) < 0.15 &&
             gmm3_wins && std::fabs(fm.fm_db - 25.73) < 0.5 && pdr >= 0.989;
    return o;
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
        bool optional;
    };
    const std::vector<Criterion> criteria = {
        {1, "poly2 column counts", criterion_column_counts, false},
        {2, "regression oracle equivalence", criterion_regression_oracles, false},
        {3, "blr identities", criterion_blr_identities, false},
        {4, "synthetic coefficient recovery", criterion_coefficient_recovery, false},
        {5, "leakage guard", criterion_leakage_guard, false},
        {6, "anova calibration", criterion_anova_calibration, false},
        {7, "residual-law selection consistency", criterion_selection_consistency, false},
        {8, "kde exactness", criterion_kde_exactness, false},
        {9, "modality", criterion_modality, false},
        {10, "fade-margin calibration end-to-end", criterion_fm_calibration, false},
        {11, "bootstrap coverage", criterion_bootstrap_coverage, false},
        {12, "paper-number reproduction (external data)", criterion_paper_numbers, true},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* verdict = outcome.skipped ? "SKIP" : (outcome.pass ? "PASS" : "FAIL");
        std::cout << verdict << "  criterion " << std::setw(2) << c.id << "  " << c.name << "  ["
                  << std::fixed << std::setprecision(1) << secs << "s]  " << outcome.detail
                  << "\n"
                  << std::defaultfloat << std::setprecision(6);
        if (!outcome.pass && !outcome.skipped && !c.optional) ++failures;
    }
    if (failures > 0) {
        std::cout << failures << " required criteria failed\n";
        return 1;
    }
    std::cout << "all required criteria passed\n";
    return 0;
}
