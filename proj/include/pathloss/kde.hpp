#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pathloss/errors.hpp"
#include "pathloss/math/fft.hpp"
#include "pathloss/math/rng.hpp"

namespace pathloss {

struct DensityEstimate {
    std::vector<double> grid;    // ascending, uniform
    std::vector<double> density; // non-negative, integrates to 1 on the grid
    double bandwidth = 0.0;

    double grid_step() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }

    // linear interpolation; zero outside the grid
    double at(double x) const {
        if (grid.empty() || x < grid.front() || x > grid.back()) return 0.0;
        const double step = grid_step();
        const double pos = (x - grid.front()) / step;
        const std::size_t lo = std::min(static_cast<std::size_t>(pos), grid.size() - 2);
        const double frac = pos - static_cast<double>(lo);
        return density[lo] + frac * (density[lo + 1] - density[lo]);
    }
};

// Gaussian-kernel KDE evaluated exactly on a uniform grid via FFT
// convolution. Samples are assigned to their nearest grid node (the grid is
// the estimate's resolution); the convolution itself is exact, and the FFT
// domain is padded far enough that circular wraparound is below 8 bandwidths
// regardless of the grid padding requested.
inline DensityEstimate kde_fft(const std::vector<double>& sample, double h,
                               std::size_t grid_size = 1 << 14, double pad = 8.0) {
    if (!(h > 0.0)) throw BandwidthNonPositive("kde_fft: bandwidth must be > 0");
    if (grid_size < 256 || !is_power_of_two(grid_size))
        throw std::invalid_argument("kde_fft: grid_size must be a power of two >= 256");
    if (sample.empty()) throw DegenerateSample("kde_fft: empty sample");
    if (pad < 0.0) throw std::invalid_argument("kde_fft: negative pad");

    const auto [mn_it, mx_it] = std::minmax_element(sample.begin(), sample.end());
    const double lo = *mn_it - pad * h;
    const double hi = *mx_it + pad * h;
    const double step = (hi - lo) / static_cast<double>(grid_size);

    DensityEstimate est;
    est.bandwidth = h;
    est.grid.resize(grid_size);
    for (std::size_t j = 0; j < grid_size; ++j) est.grid[j] = lo + step * static_cast<double>(j);

    // nearest-node bin counts
    std::vector<double> counts(grid_size, 0.0);
    for (double x : sample) {
        const double pos = (x - lo) / step;
        std::size_t idx = static_cast<std::size_t>(std::llround(pos));
        idx = std::min(idx, grid_size - 1);
        counts[idx] += 1.0;
    }

    // pad the circular domain so wraparound travels at least 8h beyond the
    // data span
    const std::size_t guard = static_cast<std::size_t>(std::ceil(8.0 * h / step)) + 1;
    const std::size_t m = next_power_of_two(grid_size + guard);

    std::vector<double> data(m, 0.0);
    std::copy(counts.begin(), counts.end(), data.begin());
    std::vector<double> kernel(m, 0.0);
    const double norm = 1.0 / (std::sqrt(2.0 * 3.14159265358979323846) * h *
                               static_cast<double>(sample.size()));
    for (std::size_t i = 0; i < m; ++i) {
        const double lag =
            (i <= m / 2 ? static_cast<double>(i)
                        : static_cast<double>(i) - static_cast<double>(m)) *
            step;
        kernel[i] = norm * std::exp(-0.5 * (lag / h) * (lag / h));
    }

    const std::vector<double> conv = circular_convolve(data, kernel);
    est.density.assign(conv.begin(), conv.begin() + static_cast<std::ptrdiff_t>(grid_size));
    for (auto& d : est.density) d = std::max(0.0, d);

    // normalize on the grid (trapezoid)
    double integral = 0.0;
    for (std::size_t j = 1; j < grid_size; ++j)
        integral += 0.5 * (est.density[j - 1] + est.density[j]) * step;
    if (integral > 0.0)
        for (auto& d : est.density) d /= integral;
    return est;
}

// h = 0.9 min(sd, IQR/1.34) n^(-1/5)
inline double silverman_bandwidth(const std::vector<double>& sample) {
    if (sample.size() < 2) throw DegenerateSample("silverman_bandwidth: need n >= 2");
    const double n = static_cast<double>(sample.size());
    const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : sample) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));

    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    auto quant = [&](double q) {
        const double pos = q * (n - 1.0);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double iqr = quant(0.75) - quant(0.25);
    const double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) throw DegenerateSample("silverman_bandwidth: zero spread");
    return 0.9 * spread * std::pow(n, -0.2);
}

// Leave-fold-out log-likelihood bandwidth selection on a grid. Large samples
// are thinned to at most 100k points with a fixed derived seed so the choice
// stays deterministic.
inline double cv_loglik_bandwidth(const std::vector<double>& sample,
                                  const std::vector<double>& h_grid, int folds = 5,
                                  std::size_t max_points = 100000) {
    if (h_grid.empty()) throw std::invalid_argument("cv_loglik_bandwidth: empty grid");
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        if (h_grid[i] <= h_grid[i - 1])
            throw std::invalid_argument("cv_loglik_bandwidth: grid must ascend");
    if (h_grid.size() == 1) return h_grid[0];
    if (folds < 2) throw std::invalid_argument("cv_loglik_bandwidth: folds must be >= 2");
    if (sample.size() < static_cast<std::size_t>(2 * folds))
        throw DegenerateSample("cv_loglik_bandwidth: sample too small");

    std::vector<double> x = sample;
    if (x.size() > max_points) {
        Rng rng(derive_seed(0x9E3779B97F4A7C15ULL, x.size()));
        const auto perm = rng.permutation(x.size());
        std::vector<double> thin(max_points);
        for (std::size_t i = 0; i < max_points; ++i) thin[i] = x[perm[i]];
        x = std::move(thin);
    }

    double best_h = h_grid[0];
    double best_ll = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (double h : h_grid) {
        if (!(h > 0.0)) throw BandwidthNonPositive("cv_loglik_bandwidth: h <= 0 in grid");
        double total = 0.0;
        bool degenerate = false;
        for (int f = 0; f < folds && !degenerate; ++f) {
            std::vector<double> train, held;
            for (std::size_t i = 0; i < x.size(); ++i)
                (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? held : train)
                    .push_back(x[i]);
            const DensityEstimate est = kde_fft(train, h, 1 << 12);
            for (double v : held) {
                const double dens = est.at(v);
                if (dens <= 0.0) {
                    degenerate = true;
                    break;
                }
                total += std::log(dens);
            }
        }
        if (degenerate) continue;
        any = true;
        if (total > best_ll || (total == best_ll && h > best_h)) {
            best_ll = total;
            best_h = h;
        }
    }
    if (!any) throw AllBandwidthsDegenerate("cv_loglik_bandwidth: no bandwidth gave finite loglik");
    return best_h;
}

// Count local maxima whose prominence reaches prominence_frac of the global
// peak. Prominence is measured against the lowest col on the walk toward the
// nearest higher ground on each side (signal edges when none exists).
inline int mode_count(const DensityEstimate& density, double prominence_frac = 0.01) {
    if (!(prominence_frac > 0.0 && prominence_frac < 1.0))
        throw std::invalid_argument("mode_count: prominence_frac must lie in (0,1)");
    const auto& d = density.density;
    const std::size_t n = d.size();
    if (n < 3) return 0;
    const double peak_floor = prominence_frac * *std::max_element(d.begin(), d.end());

    int count = 0;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (d[i] > d[i - 1]) {
            // plateau-tolerant local maximum detection
            std::size_t j = i;
            while (j + 1 < n && d[j + 1] == d[j]) ++j;
            if (j + 1 < n && d[j + 1] < d[j]) {
                const double h = d[i];
                double left_min = h, right_min = h;
                for (std::size_t l = i; l-- > 0;) {
                    if (d[l] > h) break;
                    left_min = std::min(left_min, d[l]);
                }
                for (std::size_t r = j + 1; r < n; ++r) {
                    if (d[r] > h) break;
                    right_min = std::min(right_min, d[r]);
                }
                const double prominence = h - std::max(left_min, right_min);
                if (prominence >= peak_floor) ++count;
                i = j + 1;
                continue;
            }
            i = j + 1;
            continue;
        }
        ++i;
    }
    return count;
}

struct ModeCurvePoint {
    double h = 0.0;
    int modes = 0;
};

// Mode count across a logarithmic bandwidth sweep (the default range covers
// 0.05 to 5 dB in 60 steps).
inline std::vector<ModeCurvePoint> mode_count_curve(const std::vector<double>& sample,
                                                    double h_lo = 0.05, double h_hi = 5.0,
                                                    int steps = 60,
                                                    double prominence_frac = 0.01,
                                                    std::size_t grid_size = 1 << 12) {
    if (!(h_lo > 0.0) || h_hi <= h_lo || steps < 2)
        throw std::invalid_argument("mode_count_curve: bad sweep parameters");
    std::vector<ModeCurvePoint> curve;
    curve.reserve(static_cast<std::size_t>(steps));
    const double ratio = std::log(h_hi / h_lo) / static_cast<double>(steps - 1);
    for (int s = 0; s < steps; ++s) {
        const double h = h_lo * std::exp(ratio * s);
        curve.push_back({h, mode_count(kde_fft(sample, h, grid_size), prominence_frac)});
    }
    return curve;
}

} // namespace pathloss
