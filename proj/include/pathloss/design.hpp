#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pathloss/campaign.hpp"
#include "pathloss/errors.hpp"

namespace pathloss {

enum class FeatureKind { linear, poly2 };
enum class FreqHandling { absorb_into_intercept, explicit_offset };
enum class Block { structure, walls, environment, snr, interaction };

inline const char* block_name(Block b) {
    switch (b) {
        case Block::structure: return "structure";
        case Block::walls: return "walls";
        case Block::environment: return "environment";
        case Block::snr: return "snr";
        case Block::interaction: return "interaction";
    }
    return "?";
}

struct FeatureSpec {
    FeatureKind kind = FeatureKind::linear;
    double d0_m = 1.0;
    bool include_snr = true;
    FreqHandling freq_handling = FreqHandling::absorb_into_intercept;
};

struct ColumnInfo {
    std::string name;
    Block block = Block::structure;
};

// Per-column location/scale fitted on a training row subset. Population
// (1/n) standard deviation; exact convention matters for reproducibility,
// not for fit quality. Constant columns are flagged and pass through
// unscaled.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<std::string> constant_columns;
};

struct DesignMatrix {
    std::vector<ColumnInfo> columns;
    Eigen::MatrixXd X;  // n x p
    Eigen::VectorXd y;  // response, dB
    std::optional<Standardizer> scaling; // set once apply_standardizer has run

    std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }

    std::vector<std::string> column_names() const {
        std::vector<std::string> out;
        out.reserve(columns.size());
        for (const auto& c : columns) out.push_back(c.name);
        return out;
    }
};

inline double linearize_distance(double d_m, double d0_m) {
    if (!(d_m > 0.0) || !(d0_m > 0.0)) throw NonPositiveDistance("distance and d0 must be > 0");
    return 10.0 * std::log10(d_m / d0_m);
}

// Builds the regression design. Linear: [z_d, walls, env..., snr]. poly2:
// walls stay additive and the continuous drivers u = [z_d, env..., snr]
// contribute all first- and second-order monomials, q(q+3)/2 columns, in the
// fixed canonical order (linear, squares, then pairwise products).
inline DesignMatrix build_design(const std::vector<CampaignRecord>& records,
                                 const FeatureSpec& spec) {
    if (records.empty()) throw std::invalid_argument("build_design: no records");

    if (spec.freq_handling == FreqHandling::absorb_into_intercept) {
        const double f0 = records.front().freq_mhz;
        for (const auto& r : records) {
            if (std::fabs(r.freq_mhz - f0) > 1e-9 * std::max(1.0, std::fabs(f0)))
                throw InconsistentFrequency(
                    "mixed frequencies require freq_handling = explicit_offset");
        }
    }

    std::vector<std::string> driver_names = {"z_d"};
    for (const auto& e : kEnvNames) driver_names.push_back(e);
    if (spec.include_snr) driver_names.push_back("snr");
    const std::size_t q = driver_names.size();

    auto driver_block = [&](std::size_t i) {
        if (driver_names[i] == "z_d") return Block::structure;
        if (driver_names[i] == "snr") return Block::snr;
        return Block::environment;
    };

    DesignMatrix dm;
    if (spec.kind == FeatureKind::linear) {
        dm.columns.push_back({"z_d", Block::structure});
        dm.columns.push_back({"wall_brick", Block::walls});
        dm.columns.push_back({"wall_wood", Block::walls});
        for (const auto& e : kEnvNames) dm.columns.push_back({e, Block::environment});
        if (spec.include_snr) dm.columns.push_back({"snr", Block::snr});
    } else {
        dm.columns.push_back({"wall_brick", Block::walls});
        dm.columns.push_back({"wall_wood", Block::walls});
        for (std::size_t i = 0; i < q; ++i) dm.columns.push_back({driver_names[i], driver_block(i)});
        for (std::size_t i = 0; i < q; ++i)
            dm.columns.push_back({driver_names[i] + "^2", driver_block(i)});
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = i + 1; j < q; ++j)
                dm.columns.push_back({driver_names[i] + "*" + driver_names[j], Block::interaction});
    }

    const std::size_t n = records.size();
    const std::size_t p = dm.columns.size();
    dm.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    dm.y.resize(static_cast<Eigen::Index>(n));

    std::vector<double> u(q);
    for (std::size_t r = 0; r < n; ++r) {
        const CampaignRecord& rec = records[r];
        u[0] = linearize_distance(rec.distance_m, spec.d0_m);
        for (std::size_t j = 0; j < kEnvCount; ++j) u[1 + j] = rec.env[j];
        if (spec.include_snr) u[q - 1] = rec.snr_db;

        std::size_t c = 0;
        if (spec.kind == FeatureKind::linear) {
            dm.X(r, c++) = u[0];
            dm.X(r, c++) = rec.walls_brick;
            dm.X(r, c++) = rec.walls_wood;
            for (std::size_t j = 0; j < kEnvCount; ++j) dm.X(r, c++) = u[1 + j];
            if (spec.include_snr) dm.X(r, c++) = u[q - 1];
        } else {
            dm.X(r, c++) = rec.walls_brick;
            dm.X(r, c++) = rec.walls_wood;
            for (std::size_t i = 0; i < q; ++i) dm.X(r, c++) = u[i];
            for (std::size_t i = 0; i < q; ++i) dm.X(r, c++) = u[i] * u[i];
            for (std::size_t i = 0; i < q; ++i)
                for (std::size_t j = i + 1; j < q; ++j) dm.X(r, c++) = u[i] * u[j];
        }
        double resp = rec.path_loss_db;
        if (spec.freq_handling == FreqHandling::explicit_offset)
            resp -= 20.0 * std::log10(rec.freq_mhz);
        dm.y(static_cast<Eigen::Index>(r)) = resp;
    }
    if (!dm.X.allFinite() || !dm.y.allFinite())
        throw std::invalid_argument("build_design: non-finite entry in the design");
    return dm;
}

// Fit column means and population standard deviations on a row subset only
// (the training rows of a fold); leaking validation rows into these
// statistics is the failure mode the cross-validation module guards against.
inline Standardizer fit_standardizer(const DesignMatrix& design,
                                     const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw std::invalid_argument("fit_standardizer: empty row set");
    const std::size_t p = design.cols();
    Standardizer s;
    s.mean.assign(p, 0.0);
    s.std.assign(p, 1.0);
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t r : rows) m += design.X(static_cast<Eigen::Index>(r),
                                                 static_cast<Eigen::Index>(j));
        m *= inv_n;
        double v = 0.0;
        for (std::size_t r : rows) {
            const double d = design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) - m;
            v += d * d;
        }
        v *= inv_n;
        const double sd = std::sqrt(v);
        if (sd > 0.0) {
            s.mean[j] = m;
            s.std[j] = sd;
        } else {
            s.constant_columns.push_back(design.columns[j].name);
        }
    }
    return s;
}

inline DesignMatrix apply_standardizer(const Standardizer& s, const DesignMatrix& design) {
    if (s.mean.size() != design.cols())
        throw std::invalid_argument("apply_standardizer: column count mismatch");
    DesignMatrix out = design;
    for (std::size_t j = 0; j < design.cols(); ++j) {
        out.X.col(static_cast<Eigen::Index>(j)) =
            (design.X.col(static_cast<Eigen::Index>(j)).array() - s.mean[j]) / s.std[j];
    }
    out.scaling = s;
    return out;
}

inline void write_design_csv(std::ostream& os, const DesignMatrix& design,
                             const std::string& response_name = "path_loss_db") {
    for (const auto& c : design.columns) os << c.name << ",";
    os << response_name << "\n";
    for (Eigen::Index i = 0; i < design.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < design.X.cols(); ++j) os << design.X(i, j) << ",";
        os << design.y(i) << "\n";
    }
}

} // namespace pathloss
