#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pathloss/distributions.hpp"
#include "pathloss/errors.hpp"
#include "pathloss/group_tests.hpp"
#include "pathloss/math/rng.hpp"
#include "pathloss/math/special.hpp"
#include "pathloss/residual_fit.hpp"

namespace pathloss {

// Order-statistic quantile with linear interpolation at position (n-1) q.
inline double empirical_quantile(const std::vector<double>& sample, double q) {
    if (sample.empty()) throw EmptySample("empirical_quantile: empty sample");
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("empirical_quantile: q must lie in (0,1)");
    std::vector<double> x = sample;
    std::sort(x.begin(), x.end());
    const double pos = q * (static_cast<double>(x.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

// (already-sorted variant used inside bootstrap loops)
inline double empirical_quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double gmm_tail_quantile(const Distribution& gmm, double q) {
    if (gmm.family != Family::gmm)
        throw std::invalid_argument("gmm_tail_quantile: distribution is not a mixture");
    return gmm.quantile(q);
}

struct FadeMarginPrescription {
    double fm_db = 0.0;
    std::string estimator; // "empirical" or "gmm_tail"
};

// FM(p) = Q_{1-p} of the out-of-fold residuals; for deep targets (p <= 0.02)
// the conservative max of the empirical and mixture-tail quantiles.
inline FadeMarginPrescription prescribe_fm(const std::vector<double>& oof_residuals,
                                           const Distribution* gmm_fit, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("prescribe_fm: p must lie in (0,1)");
    const double q_emp = empirical_quantile(oof_residuals, 1.0 - p);
    if (p > 0.02) return {q_emp, "empirical"};
    if (!gmm_fit) throw std::invalid_argument("prescribe_fm: mixture fit required for p <= 0.02");
    const double q_gmm = gmm_tail_quantile(*gmm_fit, 1.0 - p);
    if (q_gmm > q_emp) return {q_gmm, "gmm_tail"};
    return {q_emp, "empirical"};
}

enum class BootstrapMethod { bca_iid, moving_block };

struct BootstrapCI {
    double lo = 0.0;
    double hi = 0.0;
};

namespace detail_fm {

// leave-one-out quantiles from the sorted sample in O(n); removing one
// element shifts the interpolation window by at most one order statistic
inline std::vector<double> jackknife_quantiles(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    std::vector<double> out(n);
    const double pos = q * (static_cast<double>(n) - 2.0); // quantile position in n-1 sample
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 2);
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t i = 0; i < n; ++i) {
        // order statistics of the sample without element i
        const double a = sorted[lo >= i ? lo + 1 : lo];
        const double b = sorted[hi >= i ? hi + 1 : hi];
        out[i] = a + frac * (b - a);
    }
    return out;
}

inline double bca_endpoint(const std::vector<double>& sorted_boot, double z0, double accel,
                           double alpha) {
    const double z = norm_quantile(alpha);
    const double adj = z0 + (z0 + z) / (1.0 - accel * (z0 + z));
    double a = norm_cdf(adj);
    a = std::clamp(a, 1e-12, 1.0 - 1e-12);
    return empirical_quantile_sorted(sorted_boot, a);
}

} // namespace detail_fm

// Bootstrap CI for the (1-p) residual quantile. bca_iid resamples rows
// independently; moving_block resamples overlapping blocks (length chosen
// from the first ACF crossing of the 2/sqrt(n) band, clamped to [10, n/50])
// to respect short-memory dependence. Both apply the BCa corrections with
// jackknife acceleration. Deterministic for fixed (seed, B).
inline BootstrapCI bootstrap_ci(const std::vector<double>& residuals, double p,
                                BootstrapMethod method, int B, std::uint64_t seed,
                                int block_len = 0, double level = 0.95) {
    if (B < 200) throw InsufficientReplicates("bootstrap_ci: need B >= 200");
    if (residuals.size() < 2) throw EmptySample("bootstrap_ci: need n >= 2");
    const double q = 1.0 - p;
    const std::size_t n = residuals.size();

    std::vector<double> sorted = residuals;
    std::sort(sorted.begin(), sorted.end());
    const double theta_hat = empirical_quantile_sorted(sorted, q);
    if (sorted.front() == sorted.back()) return {theta_hat, theta_hat}; // constant sample

    int L = block_len;
    if (method == BootstrapMethod::moving_block && L <= 0) {
        const std::size_t max_lag = std::min<std::size_t>(n - 1, 200);
        const auto sd = serial_diagnostics(residuals, max_lag);
        const double band = 2.0 / std::sqrt(static_cast<double>(n));
        std::size_t crossing = max_lag;
        for (std::size_t lag = 1; lag <= max_lag; ++lag) {
            if (std::fabs(sd.acf[lag]) < band) {
                crossing = lag;
                break;
            }
        }
        const int upper = std::max(10, static_cast<int>(n / 50));
        L = std::clamp(static_cast<int>(crossing), 10, upper);
    }
    L = std::min<int>(std::max(1, L), static_cast<int>(n));

    std::vector<double> boot(static_cast<std::size_t>(B));
    std::vector<double> resample(n);
    for (int b = 0; b < B; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        if (method == BootstrapMethod::bca_iid) {
            for (std::size_t i = 0; i < n; ++i) resample[i] = residuals[rng.uniform_index(n)];
        } else {
            const std::size_t n_starts = n - static_cast<std::size_t>(L) + 1;
            std::size_t filled = 0;
            while (filled < n) {
                const std::size_t start = rng.uniform_index(n_starts);
                for (int j = 0; j < L && filled < n; ++j) resample[filled++] = residuals[start + j];
            }
        }
        std::sort(resample.begin(), resample.end());
        boot[static_cast<std::size_t>(b)] = empirical_quantile_sorted(resample, q);
    }

    // bias correction
    int below = 0;
    for (double t : boot)
        if (t < theta_hat) ++below;
    double frac = static_cast<double>(below) / static_cast<double>(B);
    frac = std::clamp(frac, 0.5 / B, 1.0 - 0.5 / B);
    const double z0 = norm_quantile(frac);

    // jackknife acceleration
    const auto jack = detail_fm::jackknife_quantiles(sorted, q);
    double jbar = 0.0;
    for (double v : jack) jbar += v;
    jbar /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (double v : jack) {
        const double d = jbar - v;
        num += d * d * d;
        den += d * d;
    }
    const double accel = den > 0.0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;

    std::sort(boot.begin(), boot.end());
    const double alpha = 0.5 * (1.0 - level);
    BootstrapCI ci;
    ci.lo = detail_fm::bca_endpoint(boot, z0, accel, alpha);
    ci.hi = detail_fm::bca_endpoint(boot, z0, accel, 1.0 - alpha);
    if (ci.lo > ci.hi) std::swap(ci.lo, ci.hi);
    return ci;
}

// Parametric bootstrap for the mixture-tail estimator: sample n points from
// the fitted mixture, refit (same K, derived seeds), requantile. Percentile
// interval over B replicates.
inline BootstrapCI gmm_parametric_ci(const Distribution& gmm, double p, std::size_t n, int B,
                                     std::uint64_t seed, double level = 0.95) {
    if (gmm.family != Family::gmm)
        throw std::invalid_argument("gmm_parametric_ci: distribution is not a mixture");
    if (B < 200) throw InsufficientReplicates("gmm_parametric_ci: need B >= 200");
    const double q = 1.0 - p;
    const std::size_t K = gmm.mixture.components();

    std::vector<double> boot;
    boot.reserve(static_cast<std::size_t>(B));
    std::vector<double> sample(n);
    for (int b = 0; b < B; ++b) {
        const std::uint64_t rep = static_cast<std::uint64_t>(b);
        Rng rng(derive_seed(seed, 0x10000ULL + rep));
        for (auto& v : sample) v = gmm.sample(rng);
        // deterministic per-replicate retry seeds if a refit degenerates
        for (std::uint64_t attempt = 0; attempt < 4; ++attempt) {
            try {
                const ResidualFit refit =
                    fit_gmm(sample, K, 2, 1e-3, derive_seed(seed, 0x20000ULL + rep * 4 + attempt),
                            1e-7);
                boot.push_back(refit.dist.quantile(q));
                break;
            } catch (const EMNotConverged&) {
            }
        }
    }
    if (boot.size() < static_cast<std::size_t>(B) / 2)
        throw InsufficientReplicates("gmm_parametric_ci: too many failed refits");
    std::sort(boot.begin(), boot.end());
    const double alpha = 0.5 * (1.0 - level);
    return {empirical_quantile_sorted(boot, alpha), empirical_quantile_sorted(boot, 1.0 - alpha)};
}

// Fold-to-fold dispersion of the margin: sample sd of the per-fold empirical
// (1-p)-quantiles. Zero when fewer than two folds carry enough residuals.
inline double fold_fm_dispersion(const std::vector<std::vector<double>>& fold_residuals,
                                 double p) {
    std::vector<double> fm;
    for (const auto& fold : fold_residuals)
        if (!fold.empty()) fm.push_back(empirical_quantile(fold, 1.0 - p));
    if (fm.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : fm) mean += v;
    mean /= static_cast<double>(fm.size());
    double ss = 0.0;
    for (double v : fm) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (static_cast<double>(fm.size()) - 1.0));
}

// 1 - mean of the strict outage indicator 1{true > pred + FM}.
inline double achieved_pdr(const std::vector<double>& test_true_pl,
                           const std::vector<double>& test_pred_pl, double fm_db) {
    if (test_true_pl.size() != test_pred_pl.size() || test_true_pl.empty())
        throw std::invalid_argument("achieved_pdr: need equal-length non-empty inputs");
    std::size_t outages = 0;
    for (std::size_t i = 0; i < test_true_pl.size(); ++i)
        if (test_true_pl[i] > test_pred_pl[i] + fm_db) ++outages;
    return 1.0 - static_cast<double>(outages) / static_cast<double>(test_true_pl.size());
}

struct FadeMarginRow {
    std::string model;
    double p = 0.0;
    std::string estimator;
    double fm_db = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double pdr = 0.0;
    double fold_sd = 0.0; // fold-to-fold margin dispersion, when folds are known
};

// The Table-9-shaped sweep: one row per target p plus a fixed-heuristic row.
// Prescriptions must come from CV residuals; PDR is evaluated on the
// hold-out only.
inline std::vector<FadeMarginRow> pdr_sweep(const std::string& model_name,
                                            const std::vector<double>& oof_residuals,
                                            const Distribution* gmm_fit,
                                            const std::vector<double>& test_true_pl,
                                            const std::vector<double>& test_pred_pl,
                                            const std::vector<double>& targets,
                                            double heuristic_fm, int B, std::uint64_t seed) {
    std::vector<FadeMarginRow> rows;
    for (double p : targets) {
        const auto fm = prescribe_fm(oof_residuals, gmm_fit, p);
        FadeMarginRow row;
        row.model = model_name;
        row.p = p;
        row.estimator = fm.estimator;
        row.fm_db = fm.fm_db;
        if (fm.estimator == "gmm_tail" && gmm_fit) {
            const auto ci =
                gmm_parametric_ci(*gmm_fit, p, oof_residuals.size(), B, seed + 17);
            row.ci_lo = ci.lo;
            row.ci_hi = ci.hi;
        } else {
            const auto ci =
                bootstrap_ci(oof_residuals, p, BootstrapMethod::moving_block, B, seed + 17);
            row.ci_lo = ci.lo;
            row.ci_hi = ci.hi;
        }
        row.pdr = achieved_pdr(test_true_pl, test_pred_pl, row.fm_db);
        rows.push_back(std::move(row));
    }
    FadeMarginRow heur;
    heur.model = model_name;
    heur.p = 0.0;
    heur.estimator = "heuristic";
    heur.fm_db = heuristic_fm;
    heur.ci_lo = heuristic_fm;
    heur.ci_hi = heuristic_fm;
    heur.pdr = achieved_pdr(test_true_pl, test_pred_pl, heuristic_fm);
    rows.push_back(std::move(heur));
    return rows;
}

} // namespace pathloss
