#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

// Scalar special functions backing the distribution and inference code:
// normal cdf/quantile, regularized incomplete beta/gamma, Student-t and F
// tail probabilities, and Owen's T for the skew-normal cdf.

namespace pathloss {

inline constexpr double kPi = 3.14159265358979323846;

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_logpdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * kPi); }

// Acklam's rational approximation refined with one Halley step; accurate to
// ~1e-15 over (0,1).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::domain_error("norm_quantile: p outside [0,1]");
    }
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement
    const double e = norm_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

// Regularized incomplete beta I_x(a,b), Lentz continued fraction.
inline double betainc(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const bool flip = x > (a + 1.0) / (a + b + 2.0);
    if (flip) {
        std::swap(a, b);
        x = 1.0 - x;
    }
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);

    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    double c = 1.0;
    double dd = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(dd) < tiny) dd = tiny;
    dd = 1.0 / dd;
    double h = dd;
    for (int m = 1; m <= 300; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        dd = 1.0 + aa * dd;
        if (std::fabs(dd) < tiny) dd = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        dd = 1.0 / dd;
        h *= dd * c;
        aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        dd = 1.0 + aa * dd;
        if (std::fabs(dd) < tiny) dd = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        dd = 1.0 / dd;
        const double del = dd * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    const double result = std::exp(log_front) * h / a;
    return flip ? 1.0 - result : result;
}

// Regularized lower incomplete gamma P(a,x); series for x < a+1, continued
// fraction otherwise.
inline double gammainc_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    return 1.0 - q;
}

inline double gammainc_q(double a, double x) { return 1.0 - gammainc_p(a, x); }

// chi-squared survival function P(X > x)
inline double chi2_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return gammainc_q(0.5 * dof, 0.5 * x);
}

// Student-t cdf with dof nu (standardized variable)
inline double student_t_cdf(double t, double nu) {
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = nu / (nu + t * t);
    const double p = 0.5 * betainc(0.5 * nu, 0.5, x);
    return t > 0 ? 1.0 - p : p;
}

// F distribution survival function P(F > f)
inline double f_sf(double f, double df1, double df2) {
    if (f <= 0.0) return 1.0;
    return betainc(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

// Owen's T function, Gauss-Legendre on the integral form with the standard
// reductions for |a| > 1 and negative arguments.
inline double owens_t(double h, double a) {
    if (a == 0.0) return 0.0;
    if (h < 0.0) h = -h;
    if (a < 0.0) return -owens_t(h, -a);
    if (a > 1.0) {
        // T(h,a) = Phi(h)/2 + Phi(ah)/2 - Phi(h)Phi(ah) - T(ah, 1/a)
        const double ph = norm_cdf(h);
        const double pah = norm_cdf(a * h);
        return 0.5 * ph + 0.5 * pah - ph * pah - owens_t(a * h, 1.0 / a);
    }
    // 24-node Gauss-Legendre on [0, a]
    static const double nodes[] = {
        0.0640568928626056260850430826247450385909,
        0.1911188674736163091586398207570696318404,
        0.3150426796961633743867932913198102407864,
        0.4337935076260451384870842319133497124524,
        0.5454214713888395356583756172183723700107,
        0.6480936519369755692524957869107476266696,
        0.7401241915785543642438281030999784255232,
        0.8200019859739029219539498726697452080761,
        0.8864155270044010342131543419821967550873,
        0.9382745520027327585236490017087214496548,
        0.9747285559713094981983919930081690617411,
        0.9951872199970213601799974097007368118745};
    static const double weights[] = {
        0.1279381953467521569740561652246953718517,
        0.1258374563468282961213753825111836887264,
        0.1216704729278033912044631534762624256070,
        0.1155056680537256013533444839067835598622,
        0.1074442701159656347825773424466062227946,
        0.0976186521041138882698806644642471544279,
        0.0861901615319532759171852029837426671850,
        0.0733464814110803057340336152531165181193,
        0.0592985849154367807463677585001085845412,
        0.0442774388174198061686027482113382288593,
        0.0285313886289336631813078159518782864491,
        0.0123412297999871995468056670700372915759};
    const double half = 0.5 * a;
    double sum = 0.0;
    for (int i = 0; i < 12; ++i) {
        for (const double sgn : {-1.0, 1.0}) {
            const double x = half + sgn * half * nodes[i];
            sum += weights[i] * std::exp(-0.5 * h * h * (1.0 + x * x)) / (1.0 + x * x);
        }
    }
    return sum * half / (2.0 * kPi);
}

} // namespace pathloss
