#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "pathloss/errors.hpp"
#include "pathloss/math/special.hpp"

namespace pathloss {

struct GroupSummary {
    std::string label;
    std::size_t n = 0;
    double median = 0.0;
    double mad = 0.0; // median absolute deviation about the group median
};

struct GroupTestsResult {
    double kruskal_wallis_h = 0.0;
    double kruskal_wallis_p = 0.0;
    double epsilon2 = 0.0; // (H - k + 1)/(n - k)
    double brown_forsythe_f = 0.0;
    double brown_forsythe_p = 0.0;
    double eta2 = 0.0; // between-SS share for the BF anova
    std::vector<GroupSummary> groups;
};

namespace detail_groups {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail_groups

// Kruskal-Wallis on tie-corrected ranks plus Brown-Forsythe (one-way anova
// on absolute deviations from group medians), with robust per-group location
// and scale summaries.
inline GroupTestsResult group_tests(const std::vector<double>& values,
                                    const std::vector<std::string>& labels) {
    if (values.size() != labels.size())
        throw std::invalid_argument("group_tests: length mismatch");
    std::map<std::string, std::vector<double>> groups;
    for (std::size_t i = 0; i < values.size(); ++i) groups[labels[i]].push_back(values[i]);
    const std::size_t k = groups.size();
    if (k < 2) throw GroupTooSmall("group_tests: need at least 2 groups");
    for (const auto& [label, members] : groups)
        if (members.size() < 2) throw GroupTooSmall("group_tests: group too small: " + label);

    const std::size_t n = values.size();
    const double nd = static_cast<double>(n);

    // midranks with tie correction
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> rank(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        for (std::size_t q = i; q <= j; ++q) rank[order[q]] = mid;
        i = j + 1;
    }

    std::map<std::string, double> rank_sum;
    for (std::size_t i = 0; i < n; ++i) rank_sum[labels[i]] += rank[i];

    double h = 0.0;
    for (const auto& [label, members] : groups) {
        const double r = rank_sum[label];
        h += r * r / static_cast<double>(members.size());
    }
    h = 12.0 / (nd * (nd + 1.0)) * h - 3.0 * (nd + 1.0);
    const double tie_corr = 1.0 - tie_term / (nd * nd * nd - nd);
    if (tie_corr > 0.0) h /= tie_corr;

    GroupTestsResult out;
    out.kruskal_wallis_h = h;
    out.kruskal_wallis_p = chi2_sf(h, static_cast<double>(k) - 1.0);
    out.epsilon2 = (h - static_cast<double>(k) + 1.0) / (nd - static_cast<double>(k));

    // Brown-Forsythe: anova on |x - group median|
    std::vector<double> z;
    std::vector<const std::string*> zl;
    std::map<std::string, double> med;
    for (auto& [label, members] : groups) {
        med[label] = detail_groups::median_of(members);
        GroupSummary gs;
        gs.label = label;
        gs.n = members.size();
        gs.median = med[label];
        std::vector<double> devs;
        devs.reserve(members.size());
        for (double v : members) devs.push_back(std::fabs(v - med[label]));
        gs.mad = detail_groups::median_of(devs);
        out.groups.push_back(std::move(gs));
    }
    z.reserve(n);
    for (std::size_t i = 0; i < n; ++i) z.push_back(std::fabs(values[i] - med[labels[i]]));

    const double zbar = std::accumulate(z.begin(), z.end(), 0.0) / nd;
    std::map<std::string, std::pair<double, std::size_t>> zsum;
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = zsum[labels[i]];
        e.first += z[i];
        ++e.second;
    }
    double ss_between = 0.0;
    for (const auto& [label, e] : zsum) {
        const double gm = e.first / static_cast<double>(e.second);
        ss_between += static_cast<double>(e.second) * (gm - zbar) * (gm - zbar);
    }
    double ss_within = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = zsum[labels[i]];
        const double gm = e.first / static_cast<double>(e.second);
        ss_within += (z[i] - gm) * (z[i] - gm);
    }
    const double df1 = static_cast<double>(k) - 1.0;
    const double df2 = nd - static_cast<double>(k);
    out.brown_forsythe_f = ss_within > 0.0 ? (ss_between / df1) / (ss_within / df2) : 0.0;
    out.brown_forsythe_p = f_sf(out.brown_forsythe_f, df1, df2);
    out.eta2 = (ss_between + ss_within) > 0.0 ? ss_between / (ss_between + ss_within) : 0.0;
    return out;
}

struct SerialDiagnostics {
    std::vector<double> acf;  // lag 0..max_lag (acf[0] = 1)
    std::vector<double> pacf; // lag 0..max_lag (pacf[0] = 1), Durbin-Levinson
    double ljung_box_q = 0.0;
    double ljung_box_p = 0.0;
};

inline SerialDiagnostics serial_diagnostics(const std::vector<double>& x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (max_lag < 1 || n <= max_lag)
        throw std::invalid_argument("serial_diagnostics: need n > max_lag >= 1");
    const double nd = static_cast<double>(n);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / nd;

    SerialDiagnostics out;
    out.acf.resize(max_lag + 1);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= nd;
    if (c0 <= 0.0) throw DegenerateSample("serial_diagnostics: zero variance");
    out.acf[0] = 1.0;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t t = lag; t < n; ++t) c += (x[t] - mean) * (x[t - lag] - mean);
        out.acf[lag] = c / nd / c0;
    }

    // Durbin-Levinson recursion
    out.pacf.assign(max_lag + 1, 0.0);
    out.pacf[0] = 1.0;
    std::vector<double> phi_prev(max_lag + 1, 0.0), phi(max_lag + 1, 0.0);
    double v = 1.0;
    for (std::size_t m = 1; m <= max_lag; ++m) {
        double acc = out.acf[m];
        for (std::size_t j = 1; j < m; ++j) acc -= phi_prev[j] * out.acf[m - j];
        const double k = acc / v;
        phi[m] = k;
        for (std::size_t j = 1; j < m; ++j) phi[j] = phi_prev[j] - k * phi_prev[m - j];
        v *= (1.0 - k * k);
        out.pacf[m] = k;
        phi_prev = phi;
    }

    double q = 0.0;
    for (std::size_t lag = 1; lag <= max_lag; ++lag)
        q += out.acf[lag] * out.acf[lag] / (nd - static_cast<double>(lag));
    q *= nd * (nd + 2.0);
    out.ljung_box_q = q;
    out.ljung_box_p = chi2_sf(q, static_cast<double>(max_lag));
    return out;
}

} // namespace pathloss
