#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "pathloss/distributions.hpp"
#include "pathloss/errors.hpp"
#include "pathloss/math/optim.hpp"
#include "pathloss/math/rng.hpp"

namespace pathloss {

struct ResidualFit {
    Distribution dist;
    double loglik = 0.0;
    std::size_t k_params = 0;
    double aic = 0.0;
    double bic = 0.0;
    double ks_stat = 0.0;

    std::string family() const { return family_name(dist.family); }
};

// D = max over the sorted sample of max(|i/n - F(x_i)|, |(i-1)/n - F(x_i)|)
inline double ks_statistic(const std::vector<double>& sample,
                           const std::function<double(double)>& cdf) {
    if (sample.empty()) throw DegenerateSample("ks_statistic: empty sample");
    std::vector<double> x = sample;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        const double hi = (static_cast<double>(i) + 1.0) / n;
        const double lo = static_cast<double>(i) / n;
        d = std::max(d, std::max(std::fabs(hi - f), std::fabs(lo - f)));
    }
    return d;
}

namespace detail_fit {

inline double sample_mean(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_sd_pop(const std::vector<double>& x, double mean) {
    double v = 0.0;
    for (double xi : x) v += (xi - mean) * (xi - mean);
    return std::sqrt(v / static_cast<double>(x.size()));
}

inline double sample_quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    return sample_quantile_sorted(x, 0.5);
}

inline double total_loglik(const std::vector<double>& x, const Distribution& d) {
    double s = 0.0;
    for (double xi : x) s += d.logpdf(xi);
    return s;
}

// Maximize the sample log-likelihood over transformed parameters with
// Nelder-Mead restarts of shrinking radius; restarts polish the optimum until
// the mean-loglik gradient is at tolerance.
inline std::vector<double> maximize(
    const std::function<double(const std::vector<double>&)>& negloglik, std::vector<double> x0) {
    NelderMeadResult best = nelder_mead(negloglik, x0, 0.3);
    for (double step : {0.03, 0.004}) {
        const auto g = numeric_gradient(negloglik, best.x);
        double gmax = 0.0;
        for (double gi : g) gmax = std::max(gmax, std::fabs(gi));
        if (gmax < 1e-8) break;
        NelderMeadResult r = nelder_mead(negloglik, best.x, step);
        if (r.fmin < best.fmin) best = r;
    }
    if (!std::isfinite(best.fmin)) throw OptimizerDiverged("distribution fit diverged");
    return best.x;
}

inline Distribution fit_normal(const std::vector<double>& x) {
    const double mu = sample_mean(x);
    const double sd = sample_sd_pop(x, mu);
    if (sd <= 0.0) throw DegenerateSample("fit: zero variance sample");
    return Distribution::normal(mu, sd);
}

inline Distribution fit_student_t(const std::vector<double>& x, double n_scale) {
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double med = sample_quantile_sorted(sorted, 0.5);
    const double iqr = sample_quantile_sorted(sorted, 0.75) - sample_quantile_sorted(sorted, 0.25);
    const double s0 = std::max(1e-8, iqr / 1.35);

    // per-point loop with the parameter-only terms hoisted out
    auto obj = [&](const std::vector<double>& p) {
        const double loc = p[0];
        const double scale = std::exp(p[1]);
        const double nu = 0.3 + std::exp(std::min(p[2], 18.0));
        const double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                         0.5 * std::log(nu * kPi) - std::log(scale);
        const double half = 0.5 * (nu + 1.0);
        double ll = 0.0;
        for (double xi : x) {
            const double z = (xi - loc) / scale;
            ll += c - half * std::log1p(z * z / nu);
        }
        return -ll / n_scale;
    };
    const auto p = maximize(obj, {med, std::log(s0), std::log(5.0)});
    return Distribution::student_t(0.3 + std::exp(std::min(p[2], 18.0)), p[0], std::exp(p[1]));
}

inline Distribution fit_cauchy(const std::vector<double>& x, double n_scale) {
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double med = sample_quantile_sorted(sorted, 0.5);
    const double iqr = sample_quantile_sorted(sorted, 0.75) - sample_quantile_sorted(sorted, 0.25);
    const double s0 = std::max(1e-8, 0.5 * iqr);
    auto obj = [&](const std::vector<double>& p) {
        const double loc = p[0];
        const double scale = std::exp(p[1]);
        const double c = -std::log(kPi) - std::log(scale);
        double ll = 0.0;
        for (double xi : x) {
            const double z = (xi - loc) / scale;
            ll += c - std::log1p(z * z);
        }
        return -ll / n_scale;
    };
    const auto p = maximize(obj, {med, std::log(s0)});
    return Distribution::cauchy(p[0], std::exp(p[1]));
}

inline Distribution fit_skew_normal(const std::vector<double>& x, double n_scale) {
    const double mean = sample_mean(x);
    const double sd = sample_sd_pop(x, mean);
    if (sd <= 0.0) throw DegenerateSample("fit: zero variance sample");
    double skew = 0.0;
    for (double xi : x) skew += std::pow((xi - mean) / sd, 3.0);
    skew /= static_cast<double>(x.size());
    // method-of-moments start (clipped inside the admissible skewness range)
    const double g = std::clamp(skew, -0.95, 0.95);
    const double c = std::pow(2.0 * std::fabs(g) / (4.0 - kPi), 1.0 / 3.0);
    double delta = (g >= 0 ? 1.0 : -1.0) * std::sqrt(kPi / 2.0) * c /
                   std::sqrt(1.0 + c * c * kPi / 2.0);
    delta = std::clamp(delta, -0.985, 0.985);
    const double alpha0 = delta / std::sqrt(1.0 - delta * delta);
    const double omega0 = sd / std::sqrt(std::max(0.05, 1.0 - 2.0 * delta * delta / kPi));
    const double xi0 = mean - omega0 * delta * std::sqrt(2.0 / kPi);

    auto obj = [&](const std::vector<double>& p) {
        const double xi = p[0];
        const double omega = std::exp(p[1]);
        const double alpha = p[2];
        const double c = std::log(2.0) - std::log(omega);
        double ll = 0.0;
        for (double v : x) {
            const double z = (v - xi) / omega;
            ll += c + norm_logpdf(z) + log_norm_cdf(alpha * z);
        }
        return -ll / n_scale;
    };
    const auto p = maximize(obj, {xi0, std::log(omega0), alpha0});
    return Distribution::skew_normal(p[0], std::exp(p[1]), p[2]);
}

inline ResidualFit finish(const std::vector<double>& x, Distribution d) {
    ResidualFit fit;
    fit.dist = std::move(d);
    fit.loglik = total_loglik(x, fit.dist);
    fit.k_params = fit.dist.parameter_count();
    const double n = static_cast<double>(x.size());
    fit.aic = 2.0 * static_cast<double>(fit.k_params) - 2.0 * fit.loglik;
    fit.bic = static_cast<double>(fit.k_params) * std::log(n) - 2.0 * fit.loglik;
    const Distribution& dist = fit.dist;
    fit.ks_stat = ks_statistic(x, [&dist](double v) { return dist.cdf(v); });
    return fit;
}

} // namespace detail_fit

// Maximum-likelihood fit of one analytic family (use fit_gmm for mixtures).
inline ResidualFit fit_distribution(const std::vector<double>& residuals, Family family) {
    if (residuals.size() < 10)
        throw DegenerateSample("fit_distribution: need at least 10 residuals");
    for (double r : residuals)
        if (!std::isfinite(r)) throw DegenerateSample("fit_distribution: non-finite residual");
    const double n_scale = static_cast<double>(residuals.size());
    switch (family) {
        case Family::normal: return detail_fit::finish(residuals, detail_fit::fit_normal(residuals));
        case Family::student_t:
            return detail_fit::finish(residuals, detail_fit::fit_student_t(residuals, n_scale));
        case Family::cauchy:
            return detail_fit::finish(residuals, detail_fit::fit_cauchy(residuals, n_scale));
        case Family::skew_normal:
            return detail_fit::finish(residuals, detail_fit::fit_skew_normal(residuals, n_scale));
        case Family::gmm:
            throw std::invalid_argument("fit_distribution: use fit_gmm for mixtures");
    }
    throw std::invalid_argument("fit_distribution: unknown family");
}

namespace detail_fit {

// One EM run; updates g in place. Terminates when the relative loglik change
// drops below tol or at max_iter, whichever comes first; both count as
// convergence. Ascent is asserted each iteration (small slack for the
// variance floor, which makes the M-step a constrained maximizer) and a
// genuine decrease throws EMNotConverged.
inline double em_gaussian_mixture(const std::vector<double>& x, Gmm& g, double var_floor,
                                  double tol, int max_iter) {
    const std::size_t n = x.size();
    const std::size_t k = g.components();
    std::vector<double> resp(n * k);
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        // E step, log-sum-exp per observation
        double loglik = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double z = (x[i] - g.means[c]) / g.sds[c];
                resp[i * k + c] = std::log(g.weights[c]) - std::log(g.sds[c]) + norm_logpdf(z);
                best = std::max(best, resp[i * k + c]);
            }
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += std::exp(resp[i * k + c] - best);
            const double lse = best + std::log(s);
            loglik += lse;
            for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(resp[i * k + c] - lse);
        }
        if (!std::isfinite(loglik) || loglik < prev - 1e-6 * (1.0 + std::fabs(prev)))
            throw EMNotConverged("fit_gmm: log-likelihood decreased");
        const bool done = std::fabs(loglik - prev) < tol * (1.0 + std::fabs(loglik));
        prev = loglik;
        if (done) return loglik;
        // M step with variance floor
        for (std::size_t c = 0; c < k; ++c) {
            double nk = 0.0, mu = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * k + c];
                mu += resp[i * k + c] * x[i];
            }
            nk = std::max(nk, 1e-300);
            mu /= nk;
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = x[i] - mu;
                var += resp[i * k + c] * d * d;
            }
            var = std::max(var / nk, var_floor);
            g.weights[c] = nk / static_cast<double>(n);
            g.means[c] = mu;
            g.sds[c] = std::sqrt(var);
        }
    }
    return prev;
}

} // namespace detail_fit

// EM for a K-component Gaussian mixture. Multiple seeded initializations
// (quantile-anchored means with jitter), a variance floor applied every
// M-step, tiny-weight components discarded, means reported in ascending
// order. Deterministic for a fixed seed.
inline ResidualFit fit_gmm(const std::vector<double>& residuals, std::size_t K,
                           int n_init = 4, double var_floor = 1e-3, std::uint64_t seed = 1,
                           double tol = 1e-8, int max_iter = 500) {
    if (K < 1 || K > 5) throw std::invalid_argument("fit_gmm: K must lie in 1..5");
    if (n_init < 1) throw std::invalid_argument("fit_gmm: need at least one initialization");
    const std::size_t n = residuals.size();
    if (n < 10) throw DegenerateSample("fit_gmm: need at least 10 residuals");

    std::vector<double> sorted = residuals;
    std::sort(sorted.begin(), sorted.end());
    const double mean = detail_fit::sample_mean(residuals);
    const double sd = detail_fit::sample_sd_pop(residuals, mean);
    if (sd <= 0.0) throw DegenerateSample("fit_gmm: zero variance sample");

    Gmm best_g;
    double best_ll = -std::numeric_limits<double>::infinity();
    bool any_ok = false;
    for (int init = 0; init < n_init; ++init) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(init)));
        Gmm g;
        g.weights.assign(K, 1.0 / static_cast<double>(K));
        g.means.resize(K);
        g.sds.assign(K, std::max(std::sqrt(var_floor), sd));
        for (std::size_t c = 0; c < K; ++c) {
            const double q = (static_cast<double>(c) + 0.5) / static_cast<double>(K);
            const double jitter = init == 0 ? 0.0 : 0.25 * sd * rng.normal();
            g.means[c] = detail_fit::sample_quantile_sorted(sorted, q) + jitter;
        }
        double ll = 0.0;
        try {
            ll = detail_fit::em_gaussian_mixture(residuals, g, var_floor, tol, max_iter);
        } catch (const EMNotConverged&) {
            continue;
        }
        if (ll > best_ll) {
            best_ll = ll;
            best_g = g;
            any_ok = true;
        }
    }
    if (!any_ok) throw EMNotConverged("fit_gmm: every initialization degenerated");

    // discard spurious tiny-weight components, then renormalize
    Gmm pruned;
    for (std::size_t c = 0; c < best_g.components(); ++c) {
        if (best_g.weights[c] >= 1e-4) {
            pruned.weights.push_back(best_g.weights[c]);
            pruned.means.push_back(best_g.means[c]);
            pruned.sds.push_back(best_g.sds[c]);
        }
    }
    if (pruned.components() == 0) throw EMNotConverged("fit_gmm: all components degenerate");
    double wsum = std::accumulate(pruned.weights.begin(), pruned.weights.end(), 0.0);
    for (auto& w : pruned.weights) w /= wsum;

    // identifiability: report means ascending
    std::vector<std::size_t> order(pruned.components());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pruned.means[a] < pruned.means[b]; });
    Gmm final_g;
    for (std::size_t i : order) {
        final_g.weights.push_back(pruned.weights[i]);
        final_g.means.push_back(pruned.means[i]);
        final_g.sds.push_back(pruned.sds[i]);
    }
    return detail_fit::finish(residuals, Distribution::from_mixture(std::move(final_g)));
}

// Pre-specified selection: minimum BIC; practical BIC ties broken by KS
// distance; KS ties broken toward the fewest parameters.
inline const ResidualFit& select_residual_model(const std::vector<ResidualFit>& fits,
                                                double bic_tie_tol = 10.0,
                                                double ks_tie_tol = 0.002) {
    if (fits.size() < 2) throw std::invalid_argument("select_residual_model: need >= 2 fits");
    double min_bic = fits[0].bic;
    for (const auto& f : fits) min_bic = std::min(min_bic, f.bic);

    double min_ks = std::numeric_limits<double>::infinity();
    for (const auto& f : fits)
        if (f.bic <= min_bic + bic_tie_tol) min_ks = std::min(min_ks, f.ks_stat);

    const ResidualFit* best = nullptr;
    for (const auto& f : fits) {
        if (f.bic > min_bic + bic_tie_tol) continue;
        if (f.ks_stat > min_ks + ks_tie_tol) continue;
        if (!best || f.k_params < best->k_params ||
            (f.k_params == best->k_params && f.bic < best->bic)) {
            best = &f;
        }
    }
    return *best;
}

// Plotting positions p_i = (i - 1/2)/n against order statistics.
inline std::vector<std::pair<double, double>> qq_points(const std::vector<double>& residuals,
                                                        const ResidualFit& fit) {
    std::vector<double> x = residuals;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    std::vector<std::pair<double, double>> out;
    out.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = (static_cast<double>(i) + 0.5) / n;
        out.emplace_back(fit.dist.quantile(p), x[i]);
    }
    return out;
}

struct NormalityTests {
    double jarque_bera = 0.0;
    double jarque_bera_p = 0.0;
    double dagostino = 0.0;
    double dagostino_p = 0.0;
    double durbin_watson = 0.0;
};

// Jarque-Bera, the D'Agostino-Pearson K^2 omnibus, and Durbin-Watson in
// sequence order.
inline NormalityTests normality_tests(const std::vector<double>& residuals) {
    const std::size_t n = residuals.size();
    if (n < 20) throw DegenerateSample("normality_tests: need n >= 20");
    const double nd = static_cast<double>(n);
    const double mean = detail_fit::sample_mean(residuals);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double r : residuals) {
        const double d = r - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= nd;
    m3 /= nd;
    m4 /= nd;
    const double g1 = m3 / std::pow(m2, 1.5);
    const double g2 = m4 / (m2 * m2);

    NormalityTests out;
    out.jarque_bera = nd / 6.0 * (g1 * g1 + 0.25 * (g2 - 3.0) * (g2 - 3.0));
    out.jarque_bera_p = chi2_sf(out.jarque_bera, 2.0);

    // D'Agostino skewness z
    const double y = g1 * std::sqrt((nd + 1.0) * (nd + 3.0) / (6.0 * (nd - 2.0)));
    const double beta2 = 3.0 * (nd * nd + 27.0 * nd - 70.0) * (nd + 1.0) * (nd + 3.0) /
                         ((nd - 2.0) * (nd + 5.0) * (nd + 7.0) * (nd + 9.0));
    const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
    const double delta = 1.0 / std::sqrt(std::log(std::sqrt(w2)));
    const double alpha = std::sqrt(2.0 / (w2 - 1.0));
    const double z1 = delta * std::log(y / alpha + std::sqrt((y / alpha) * (y / alpha) + 1.0));

    // Anscombe-Glynn kurtosis z
    const double eb2 = 3.0 * (nd - 1.0) / (nd + 1.0);
    const double vb2 = 24.0 * nd * (nd - 2.0) * (nd - 3.0) /
                       ((nd + 1.0) * (nd + 1.0) * (nd + 3.0) * (nd + 5.0));
    const double xk = (g2 - eb2) / std::sqrt(vb2);
    const double sqrtb1 = 6.0 * (nd * nd - 5.0 * nd + 2.0) / ((nd + 7.0) * (nd + 9.0)) *
                          std::sqrt(6.0 * (nd + 3.0) * (nd + 5.0) /
                                    (nd * (nd - 2.0) * (nd - 3.0)));
    const double a = 6.0 + 8.0 / sqrtb1 * (2.0 / sqrtb1 + std::sqrt(1.0 + 4.0 / (sqrtb1 * sqrtb1)));
    const double z2 = ((1.0 - 2.0 / (9.0 * a)) -
                       std::cbrt((1.0 - 2.0 / a) / (1.0 + xk * std::sqrt(2.0 / (a - 4.0))))) *
                      std::sqrt(4.5 * a);

    out.dagostino = z1 * z1 + z2 * z2;
    out.dagostino_p = chi2_sf(out.dagostino, 2.0);

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        den += residuals[i] * residuals[i];
        if (i > 0) {
            const double d = residuals[i] - residuals[i - 1];
            num += d * d;
        }
    }
    out.durbin_watson = num / den;
    return out;
}

} // namespace pathloss
