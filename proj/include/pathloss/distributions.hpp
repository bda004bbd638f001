#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pathloss/errors.hpp"
#include "pathloss/math/rng.hpp"
#include "pathloss/math/special.hpp"

namespace pathloss {

enum class Family { normal, skew_normal, student_t, cauchy, gmm };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::normal: return "normal";
        case Family::skew_normal: return "skew_normal";
        case Family::student_t: return "student_t";
        case Family::cauchy: return "cauchy";
        case Family::gmm: return "gmm";
    }
    return "?";
}

// log Phi(x), stable in the far left tail
inline double log_norm_cdf(double x) {
    if (x > -8.0) return std::log(norm_cdf(x));
    const double x2 = x * x;
    // asymptotic expansion of Mills ratio
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - 0.5 * std::log(2.0 * kPi) - std::log(-x) + std::log(series);
}

// Finite Gaussian mixture with means kept in ascending order for reporting.
struct Gmm {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> sds;

    std::size_t components() const { return weights.size(); }

    double pdf(double x) const {
        double s = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k)
            s += weights[k] * norm_pdf((x - means[k]) / sds[k]) / sds[k];
        return s;
    }

    double logpdf(double x) const {
        // log-sum-exp over components
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(weights.size());
        for (std::size_t k = 0; k < weights.size(); ++k) {
            const double z = (x - means[k]) / sds[k];
            terms[k] = std::log(weights[k]) - std::log(sds[k]) + norm_logpdf(z);
            best = std::max(best, terms[k]);
        }
        double s = 0.0;
        for (double t : terms) s += std::exp(t - best);
        return best + std::log(s);
    }

    double cdf(double x) const {
        double s = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k)
            s += weights[k] * norm_cdf((x - means[k]) / sds[k]);
        return s;
    }

    double sample(Rng& rng) const {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t k = weights.size() - 1;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) {
                k = i;
                break;
            }
        }
        return rng.normal(means[k], sds[k]);
    }
};

// One fitted residual law. Parameter slots by family:
//   normal      p1 = mu,  p2 = sigma
//   skew_normal p1 = xi,  p2 = omega,  p3 = alpha (shape)
//   student_t   p1 = nu,  p2 = loc,    p3 = scale
//   cauchy      p1 = loc, p2 = scale
//   gmm         mixture
struct Distribution {
    Family family = Family::normal;
    double p1 = 0.0, p2 = 1.0, p3 = 0.0;
    Gmm mixture;

    std::size_t parameter_count() const {
        switch (family) {
            case Family::normal: return 2;
            case Family::skew_normal: return 3;
            case Family::student_t: return 3;
            case Family::cauchy: return 2;
            case Family::gmm: return 3 * mixture.components() - 1;
        }
        return 0;
    }

    double logpdf(double x) const {
        switch (family) {
            case Family::normal: {
                const double z = (x - p1) / p2;
                return norm_logpdf(z) - std::log(p2);
            }
            case Family::skew_normal: {
                const double z = (x - p1) / p2;
                return std::log(2.0) - std::log(p2) + norm_logpdf(z) + log_norm_cdf(p3 * z);
            }
            case Family::student_t: {
                const double nu = p1;
                const double z = (x - p2) / p3;
                return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                       0.5 * std::log(nu * kPi) - std::log(p3) -
                       0.5 * (nu + 1.0) * std::log1p(z * z / nu);
            }
            case Family::cauchy: {
                const double z = (x - p1) / p2;
                return -std::log(kPi) - std::log(p2) - std::log1p(z * z);
            }
            case Family::gmm: return mixture.logpdf(x);
        }
        return 0.0;
    }

    double pdf(double x) const { return std::exp(logpdf(x)); }

    double cdf(double x) const {
        switch (family) {
            case Family::normal: return norm_cdf((x - p1) / p2);
            case Family::skew_normal: {
                const double z = (x - p1) / p2;
                return norm_cdf(z) - 2.0 * owens_t(z, p3);
            }
            case Family::student_t: return student_t_cdf((x - p2) / p3, p1);
            case Family::cauchy: return 0.5 + std::atan((x - p1) / p2) / kPi;
            case Family::gmm: return mixture.cdf(x);
        }
        return 0.0;
    }

    // location and scale used to seed quantile brackets
    double rough_center() const {
        switch (family) {
            case Family::normal:
            case Family::skew_normal: return p1;
            case Family::student_t: return p2;
            case Family::cauchy: return p1;
            case Family::gmm: {
                double m = 0.0;
                for (std::size_t k = 0; k < mixture.components(); ++k)
                    m += mixture.weights[k] * mixture.means[k];
                return m;
            }
        }
        return 0.0;
    }

    double rough_scale() const {
        switch (family) {
            case Family::normal: return p2;
            case Family::skew_normal: return p2;
            case Family::student_t: return p3;
            case Family::cauchy: return p2;
            case Family::gmm: {
                double s = 0.0;
                for (std::size_t k = 0; k < mixture.components(); ++k)
                    s = std::max(s, mixture.sds[k] + std::fabs(mixture.means[k] - rough_center()));
                return s > 0.0 ? s : 1.0;
            }
        }
        return 1.0;
    }

    // Bisection on the cdf with geometric bracket expansion; terminates when
    // |cdf(x) - q| < 1e-10 or the bracket is below floating-point resolution.
    double quantile(double q) const {
        if (!(q > 0.0 && q < 1.0)) throw std::domain_error("quantile: q outside (0,1)");
        if (family == Family::normal) return p1 + p2 * norm_quantile(q);
        if (family == Family::cauchy) return p1 + p2 * std::tan(kPi * (q - 0.5));

        double lo = rough_center() - 4.0 * rough_scale();
        double hi = rough_center() + 4.0 * rough_scale();
        double span = hi - lo;
        for (int it = 0; it < 200 && cdf(lo) > q; ++it) {
            lo -= span;
            span *= 2.0;
        }
        span = hi - lo;
        for (int it = 0; it < 200 && cdf(hi) < q; ++it) {
            hi += span;
            span *= 2.0;
        }
        if (cdf(lo) > q || cdf(hi) < q) throw BracketFailure("quantile: bracket expansion failed");
        for (int it = 0; it < 400; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double c = cdf(mid);
            if (std::fabs(c - q) < 1e-10) return mid;
            (c < q ? lo : hi) = mid;
            if (hi - lo < 1e-14 * (1.0 + std::fabs(mid))) return mid;
        }
        return 0.5 * (lo + hi);
    }

    double sample(Rng& rng) const {
        switch (family) {
            case Family::normal: return rng.normal(p1, p2);
            case Family::skew_normal: {
                const double delta = p3 / std::sqrt(1.0 + p3 * p3);
                const double u0 = rng.normal();
                const double u1 = rng.normal();
                const double z = delta * std::fabs(u0) + std::sqrt(1.0 - delta * delta) * u1;
                return p1 + p2 * z;
            }
            case Family::student_t: return p2 + p3 * rng.student_t(p1);
            case Family::cauchy: return rng.cauchy(p1, p2);
            case Family::gmm: return mixture.sample(rng);
        }
        return 0.0;
    }

    static Distribution normal(double mu, double sigma) {
        Distribution d;
        d.family = Family::normal;
        d.p1 = mu;
        d.p2 = sigma;
        return d;
    }
    static Distribution skew_normal(double xi, double omega, double alpha) {
        Distribution d;
        d.family = Family::skew_normal;
        d.p1 = xi;
        d.p2 = omega;
        d.p3 = alpha;
        return d;
    }
    static Distribution student_t(double nu, double loc, double scale) {
        Distribution d;
        d.family = Family::student_t;
        d.p1 = nu;
        d.p2 = loc;
        d.p3 = scale;
        return d;
    }
    static Distribution cauchy(double loc, double scale) {
        Distribution d;
        d.family = Family::cauchy;
        d.p1 = loc;
        d.p2 = scale;
        return d;
    }
    static Distribution from_mixture(Gmm g) {
        Distribution d;
        d.family = Family::gmm;
        d.mixture = std::move(g);
        return d;
    }
};

} // namespace pathloss
