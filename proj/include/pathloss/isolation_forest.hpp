#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pathloss/math/rng.hpp"

namespace pathloss {

// Isolation forest anomaly scores for a dense row-major matrix.
//
// score(x) = 2^(-E[h(x)] / c(subsample)) with the usual unsuccessful-search
// normalizer c(m) = 2 H(m-1) - 2 (m-1)/m. Higher means more anomalous.
// Trees are grown on seeded subsamples drawn without replacement; every tree
// derives its own RNG stream from (seed, tree index), so results do not
// depend on construction order or thread count.
namespace detail_iforest {

inline double average_path_normalizer(double m) {
    if (m <= 1.0) return 0.0;
    if (m == 2.0) return 1.0;
    const double euler = 0.5772156649015329;
    const double harmonic = std::log(m - 1.0) + euler;
    return 2.0 * harmonic - 2.0 * (m - 1.0) / m;
}

struct Node {
    int feature = -1;       // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;           // leaf population
};

class Tree {
public:
    void build(const std::vector<std::vector<double>>& data, std::vector<std::size_t> rows,
               int max_depth, Rng& rng) {
        nodes_.clear();
        nodes_.reserve(2 * rows.size());
        build_node(data, std::move(rows), 0, max_depth, rng);
    }

    double path_length(const std::vector<double>& x) const {
        int node = 0;
        double depth = 0.0;
        for (;;) {
            const Node& nd = nodes_[static_cast<std::size_t>(node)];
            if (nd.feature < 0) return depth + average_path_normalizer(static_cast<double>(nd.size));
            node = x[static_cast<std::size_t>(nd.feature)] < nd.split ? nd.left : nd.right;
            depth += 1.0;
        }
    }

private:
    int build_node(const std::vector<std::vector<double>>& data, std::vector<std::size_t> rows,
                   int depth, int max_depth, Rng& rng) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_[static_cast<std::size_t>(id)].size = static_cast<int>(rows.size());
        if (rows.size() <= 1 || depth >= max_depth) return id;

        // candidate features: those with a nonzero range in this node; a
        // constant column simply never splits
        const std::size_t m = data[0].size();
        std::vector<int> candidates;
        std::vector<std::pair<double, double>> ranges(m);
        for (std::size_t j = 0; j < m; ++j) {
            double lo = data[rows[0]][j], hi = lo;
            for (std::size_t r : rows) {
                lo = std::min(lo, data[r][j]);
                hi = std::max(hi, data[r][j]);
            }
            ranges[j] = {lo, hi};
            if (hi > lo) candidates.push_back(static_cast<int>(j));
        }
        if (candidates.empty()) return id; // all rows identical

        const int feat = candidates[rng.uniform_index(candidates.size())];
        const auto [lo, hi] = ranges[static_cast<std::size_t>(feat)];
        const double split = rng.uniform(lo, hi);

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) {
            (data[r][static_cast<std::size_t>(feat)] < split ? left : right).push_back(r);
        }
        if (left.empty() || right.empty()) return id; // degenerate split value
        rows.clear();
        rows.shrink_to_fit();

        nodes_[static_cast<std::size_t>(id)].feature = feat;
        nodes_[static_cast<std::size_t>(id)].split = split;
        const int l = build_node(data, std::move(left), depth + 1, max_depth, rng);
        nodes_[static_cast<std::size_t>(id)].left = l;
        const int r = build_node(data, std::move(right), depth + 1, max_depth, rng);
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    std::vector<Node> nodes_;
};

} // namespace detail_iforest

inline std::vector<double> isolation_forest_scores(const std::vector<std::vector<double>>& matrix,
                                                   int trees, int subsample, std::uint64_t seed) {
    const std::size_t n = matrix.size();
    if (n < 2) throw std::invalid_argument("isolation_forest_scores: need at least 2 rows");
    if (subsample < 2) throw std::invalid_argument("isolation_forest_scores: subsample must be >= 2");
    if (static_cast<std::size_t>(subsample) > n)
        throw std::invalid_argument("isolation_forest_scores: subsample exceeds row count");
    if (trees < 1) throw std::invalid_argument("isolation_forest_scores: need at least one tree");
    const std::size_t m = matrix[0].size();
    for (const auto& row : matrix)
        if (row.size() != m) throw std::invalid_argument("isolation_forest_scores: ragged matrix");

    const int max_depth =
        static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample))));

    std::vector<detail_iforest::Tree> forest(static_cast<std::size_t>(trees));
    for (int t = 0; t < trees; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        // subsample without replacement via partial Fisher-Yates
        std::vector<std::size_t> idx = rng.permutation(n);
        idx.resize(static_cast<std::size_t>(subsample));
        forest[static_cast<std::size_t>(t)].build(matrix, std::move(idx), max_depth, rng);
    }

    const double c = detail_iforest::average_path_normalizer(static_cast<double>(subsample));
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (const auto& tree : forest) total += tree.path_length(matrix[i]);
        const double avg = total / static_cast<double>(trees);
        scores[i] = std::pow(2.0, -avg / c);
    }
    return scores;
}

} // namespace pathloss
