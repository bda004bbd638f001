#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pathloss/errors.hpp"
#include "pathloss/kde.hpp"
#include "pathloss/math/rng.hpp"

namespace pathloss {

namespace detail_dip {

struct Point {
    double x;
    double y;
};

inline double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain over points already sorted by x; returns indices of
// hull vertices. lower=true builds the greatest convex minorant support,
// lower=false the least concave majorant support.
inline std::vector<std::size_t> half_hull(const std::vector<Point>& pts, std::size_t lo,
                                          std::size_t hi, bool lower) {
    std::vector<std::size_t> hull;
    for (std::size_t i = lo; i <= hi; ++i) {
        while (hull.size() >= 2) {
            const double c = cross(pts[hull[hull.size() - 2]], pts[hull.back()], pts[i]);
            const bool pop = lower ? c <= 0.0 : c >= 0.0;
            if (!pop) break;
            hull.pop_back();
        }
        hull.push_back(i);
    }
    return hull;
}

// hull value at the x of point `idx`; vertices bracket every queried index
inline double hull_value_at(const std::vector<Point>& pts, const std::vector<std::size_t>& hull,
                            std::size_t idx) {
    const double x = pts[idx].x;
    // binary search for the segment
    std::size_t lo = 0, hi = hull.size() - 1;
    if (idx <= hull.front()) return pts[hull.front()].y;
    if (idx >= hull.back()) return pts[hull.back()].y;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (hull[mid] <= idx) lo = mid;
        else hi = mid;
    }
    const Point& a = pts[hull[lo]];
    const Point& b = pts[hull[hi]];
    if (b.x == a.x) return std::min(a.y, b.y);
    const double t = (x - a.x) / (b.x - a.x);
    return a.y + t * (b.y - a.y);
}

} // namespace detail_dip

// Hartigan & Hartigan dip statistic: the sup-distance from the empirical cdf
// to the nearest unimodal cdf. Computed by the modal-interval iteration over
// the greatest convex minorant / least concave majorant of the ecdf, with
// deviations outside the shrinking modal interval accumulated along the way.
inline double dip_statistic(std::vector<double> sample) {
    const std::size_t n_raw = sample.size();
    if (n_raw < 2) return 0.0;
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(n_raw);

    // collapse ties: each unique x keeps F(x-) as minorant constraint and
    // F(x) as majorant constraint
    std::vector<detail_dip::Point> low_pts, high_pts;
    for (std::size_t i = 0; i < n_raw;) {
        std::size_t j = i;
        while (j + 1 < n_raw && sample[j + 1] == sample[i]) ++j;
        low_pts.push_back({sample[i], static_cast<double>(i) / n});
        high_pts.push_back({sample[i], static_cast<double>(j + 1) / n});
        i = j + 1;
    }
    const std::size_t m = low_pts.size();
    if (m == 1) return 0.0; // a point mass is exactly unimodal

    std::size_t lo = 0, hi = m - 1;
    double outside = 0.0;
    for (;;) {
        const auto gcm = detail_dip::half_hull(low_pts, lo, hi, true);
        const auto lcm = detail_dip::half_hull(high_pts, lo, hi, false);

        // largest gap between majorant and minorant, probed at the touch
        // points of each
        double d = 0.0;
        bool at_gcm = true;
        std::size_t arg = lo;
        for (std::size_t t : gcm) {
            const double gap = detail_dip::hull_value_at(high_pts, lcm, t) - low_pts[t].y;
            if (gap > d) {
                d = gap;
                at_gcm = true;
                arg = t;
            }
        }
        for (std::size_t u : lcm) {
            const double gap = high_pts[u].y - detail_dip::hull_value_at(low_pts, gcm, u);
            if (gap > d) {
                d = gap;
                at_gcm = false;
                arg = u;
            }
        }

        if (d <= outside) return 0.5 * outside;

        // candidate modal interval
        std::size_t new_lo = lo, new_hi = hi;
        if (at_gcm) {
            new_lo = arg;
            new_hi = *std::lower_bound(lcm.begin(), lcm.end(), arg); // lcm touch at/after arg
        } else {
            auto it = std::upper_bound(gcm.begin(), gcm.end(), arg);
            new_lo = it == gcm.begin() ? gcm.front() : *(it - 1); // gcm touch at/before arg
            new_hi = arg;
        }

        // deviations of the ecdf from the convex fit left of the modal
        // interval and from the concave fit right of it
        for (std::size_t u = lo; u <= new_lo; ++u)
            outside = std::max(outside, high_pts[u].y - detail_dip::hull_value_at(low_pts, gcm, u));
        for (std::size_t u = new_hi; u <= hi; ++u)
            outside = std::max(outside, detail_dip::hull_value_at(high_pts, lcm, u) - low_pts[u].y);

        if ((new_lo == lo && new_hi == hi) || new_hi <= new_lo)
            return 0.5 * std::max(outside, d);
        lo = new_lo;
        hi = new_hi;
    }
}

struct DipResult {
    double dip = 0.0;
    double p = 0.0;
};

// p from the uniform null: share of n_boot uniform samples of the same size
// whose dip reaches the observed one.
inline DipResult dip_test(const std::vector<double>& sample, int n_boot = 2000,
                          std::uint64_t seed = 1) {
    if (sample.size() < 10) throw DegenerateSample("dip_test: need n >= 10");
    if (n_boot < 1) throw std::invalid_argument("dip_test: n_boot must be >= 1");
    DipResult out;
    out.dip = dip_statistic(sample);
    int exceed = 0;
    std::vector<double> u(sample.size());
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        for (auto& v : u) v = rng.uniform();
        if (dip_statistic(u) >= out.dip) ++exceed;
    }
    out.p = static_cast<double>(exceed) / static_cast<double>(n_boot);
    return out;
}

struct CriticalBandwidthResult {
    double h_star = 0.0;
    double p = 0.0;
};

namespace detail_dip {

inline double critical_bandwidth_only(const std::vector<double>& sample, int k_modes,
                                      double prominence_frac, std::size_t grid,
                                      double h_hint) {
    auto modes_at = [&](double h) {
        return mode_count(kde_fft(sample, h, grid), prominence_frac);
    };
    double h_hi = h_hint;
    int guard = 0;
    while (modes_at(h_hi) > k_modes) {
        h_hi *= 2.0;
        if (++guard > 60) throw BisectionFailed("critical bandwidth: no unimodal upper bracket");
    }
    double h_lo = h_hi;
    guard = 0;
    while (modes_at(h_lo) <= k_modes) {
        h_lo *= 0.5;
        if (++guard > 60) return h_lo; // even tiny bandwidths satisfy the mode bound
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = std::sqrt(h_lo * h_hi);
        (modes_at(mid) <= k_modes ? h_hi : h_lo) = mid;
        if (h_hi / h_lo < 1.0 + 1e-4) break;
    }
    return h_hi;
}

} // namespace detail_dip

// Smallest bandwidth at which the KDE has at most k_modes modes, with a
// smoothed-bootstrap p for H0: <= k_modes (resample, jitter by h*, rescale to
// preserve the sample variance). p near 1 supports the null.
inline CriticalBandwidthResult silverman_critical_bandwidth(const std::vector<double>& sample,
                                                            int k_modes, int n_boot = 200,
                                                            std::uint64_t seed = 1,
                                                            double prominence_frac = 0.01,
                                                            std::size_t grid = 1 << 11) {
    if (k_modes < 1) throw std::invalid_argument("silverman_critical_bandwidth: k_modes >= 1");
    if (sample.size() < 10) throw DegenerateSample("silverman_critical_bandwidth: n >= 10");

    const double n = static_cast<double>(sample.size());
    const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
    double var = 0.0;
    for (double x : sample) var += (x - mean) * (x - mean);
    var /= n;
    if (var <= 0.0) throw DegenerateSample("silverman_critical_bandwidth: zero variance");

    const double h_hint = std::max(1e-8, silverman_bandwidth(sample));
    CriticalBandwidthResult out;
    out.h_star =
        detail_dip::critical_bandwidth_only(sample, k_modes, prominence_frac, grid, h_hint);

    int le = 0;
    std::vector<double> y(sample.size());
    const double rescale = 1.0 / std::sqrt(1.0 + out.h_star * out.h_star / var);
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        for (auto& v : y) {
            const double pick = sample[rng.uniform_index(sample.size())];
            v = mean + (pick - mean + out.h_star * rng.normal()) * rescale;
        }
        const double hb =
            detail_dip::critical_bandwidth_only(y, k_modes, prominence_frac, grid, out.h_star);
        if (hb <= out.h_star) ++le;
    }
    out.p = static_cast<double>(le) / static_cast<double>(std::max(1, n_boot));
    return out;
}

} // namespace pathloss
