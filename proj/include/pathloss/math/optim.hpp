#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace pathloss {

struct NelderMeadResult {
    std::vector<double> x;
    double fmin = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Derivative-free simplex minimizer. Used for the bounded quasi-likelihood
// fits (Student-t, skew-normal, Cauchy) on transformed parameters; restarts
// handle the occasional collapsed simplex.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, double initial_step = 0.25,
                                    double ftol = 1e-13, int max_iter = 1500) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        pts[i + 1][i] += (x0[i] != 0.0 ? initial_step * std::fabs(x0[i]) + initial_step : initial_step);
    }
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

    NelderMeadResult res;
    int iter = 0;
    while (iter < max_iter) {
        // order
        std::vector<std::size_t> ord(n + 1);
        for (std::size_t i = 0; i <= n; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = ord[0], worst = ord[n], second = ord[n - 1];
        if (std::fabs(fv[worst] - fv[best]) <= ftol * (1.0 + std::fabs(fv[best]))) {
            res.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j];
        }
        for (auto& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (pts[worst][j] - centroid[j]);
            return p;
        };
        std::vector<double> xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fv[ord[0]]) {
            std::vector<double> xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            std::vector<double> xc = blend(outside ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[worst])) {
                pts[worst] = xc;
                fv[worst] = fc;
            } else {
                // shrink toward best
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
                    fv[i] = f(pts[i]);
                }
            }
        }
        ++iter;
    }
    std::size_t ib = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[ib]) ib = i;
    res.x = pts[ib];
    res.fmin = fv[ib];
    res.iterations = iter;
    return res;
}

// Central-difference gradient, used to verify stationarity of the
// quasi-likelihood optima.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            const std::vector<double>& x, double h = 1e-6) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double step = h * (1.0 + std::fabs(x[i]));
        xp[i] = x[i] + step;
        xm[i] = x[i] - step;
        g[i] = (f(xp) - f(xm)) / (2.0 * step);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return g;
}

} // namespace pathloss
