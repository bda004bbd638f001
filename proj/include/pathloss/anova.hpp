#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "pathloss/design.hpp"
#include "pathloss/errors.hpp"
#include "pathloss/math/special.hpp"
#include "pathloss/regression.hpp"

namespace pathloss {

enum class AnovaType { II, III };

struct AnovaRow {
    std::string term;
    double F = 0.0;
    double p = 0.0;
    double partial_eta2 = 0.0;
    double df1 = 1.0;
    double df2 = 0.0;
    int sign = 0;
};

struct AnovaTable {
    std::vector<AnovaRow> rows;
    bool robust = false;
    AnovaType type = AnovaType::II;
};

struct NestedComparison {
    std::vector<std::string> restricted_terms;
    std::vector<std::string> full_terms;
    double delta_df = 0.0;
    double df2 = 0.0;
    double F = 0.0;
    double p = 0.0;
    double partial_eta2 = 0.0;
};

namespace detail_anova {

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Phi(X.rows(), X.cols() + 1);
    Phi.col(0).setOnes();
    Phi.rightCols(X.cols()) = X;
    return Phi;
}

} // namespace detail_anova

// HC3 covariance of [intercept, coefficients]:
//   (Phi'Phi)^-1 Phi' diag(r_i^2 / (1-h_ii)^2) Phi (Phi'Phi)^-1
// with h_ii the hat-matrix leverages. Rows at leverage one make the weight
// undefined (saturated fit) and are rejected.
inline Eigen::MatrixXd hc3_covariance(const DesignMatrix& design,
                                      const Eigen::VectorXd& residuals) {
    const Eigen::MatrixXd Phi = detail_anova::with_intercept(design.X);
    if (residuals.size() != Phi.rows())
        throw std::invalid_argument("hc3_covariance: residual length mismatch");
    const Eigen::MatrixXd gram_inv =
        (Phi.transpose() * Phi).ldlt().solve(Eigen::MatrixXd::Identity(Phi.cols(), Phi.cols()));

    Eigen::VectorXd w(Phi.rows());
    for (Eigen::Index i = 0; i < Phi.rows(); ++i) {
        const double h = Phi.row(i) * gram_inv * Phi.row(i).transpose();
        if (h >= 1.0 - 1e-10) throw LeverageOne("hc3_covariance: leverage 1 at row " +
                                                std::to_string(i));
        const double d = 1.0 - h;
        w(i) = residuals(i) * residuals(i) / (d * d);
    }
    const Eigen::MatrixXd meat = Phi.transpose() * w.asDiagonal() * Phi;
    return gram_inv * meat * gram_inv;
}

// Per-term Wald F tests on the fitted additive OLS model; each design column
// is a 1-df term. Type III additionally tests the intercept. Penalized fits
// are rejected for inference.
inline AnovaTable anova(const FitModel& fit, const DesignMatrix& design, AnovaType type,
                        bool robust) {
    if (fit.penalty.kind != PenaltyKind::none)
        throw PenalizedModelRejected("anova: inference requires an unpenalized OLS fit");

    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    const double df2 = static_cast<double>(n) - static_cast<double>(p) - 1.0;
    if (df2 <= 0.0) throw RankDeficient("anova: no residual degrees of freedom");

    const Eigen::VectorXd resid = design.y - predict(fit, design);

    Eigen::MatrixXd cov;
    if (robust) {
        cov = hc3_covariance(design, resid);
    } else {
        const Eigen::MatrixXd Phi = detail_anova::with_intercept(design.X);
        const double sigma2 = resid.squaredNorm() / df2;
        cov = sigma2 * (Phi.transpose() * Phi)
                           .ldlt()
                           .solve(Eigen::MatrixXd::Identity(Phi.cols(), Phi.cols()));
    }

    AnovaTable table;
    table.robust = robust;
    table.type = type;

    auto add_row = [&](const std::string& term, double estimate, double variance) {
        AnovaRow row;
        row.term = term;
        row.F = estimate * estimate / variance;
        row.df1 = 1.0;
        row.df2 = df2;
        row.p = f_sf(row.F, row.df1, row.df2);
        row.partial_eta2 = row.F / (row.F + df2);
        row.sign = estimate > 0.0 ? 1 : (estimate < 0.0 ? -1 : 0);
        table.rows.push_back(std::move(row));
    };

    if (type == AnovaType::III) add_row("(intercept)", fit.intercept, cov(0, 0));
    for (Eigen::Index j = 0; j < p; ++j)
        add_row(design.columns[static_cast<std::size_t>(j)].name, fit.beta(j),
                cov(j + 1, j + 1));
    return table;
}

// Classical nested RSS partial-F:
//   F = ((RSS0 - RSS1)/(p1 - p0)) / (RSS1/(n - p1))
inline NestedComparison partial_f(const FitModel& restricted, const FitModel& full,
                                  std::size_t n) {
    std::vector<std::string> r_names = restricted.column_names;
    std::vector<std::string> f_names = full.column_names;
    if (r_names.size() >= f_names.size())
        throw NotNested("partial_f: restricted model is not smaller than the full model");
    for (const auto& name : r_names) {
        if (std::find(f_names.begin(), f_names.end(), name) == f_names.end())
            throw NotNested("partial_f: restricted term missing from full model: " + name);
    }

    const double p0 = static_cast<double>(r_names.size()) + 1.0;
    const double p1 = static_cast<double>(f_names.size()) + 1.0;
    const double df1 = p1 - p0;
    const double df2 = static_cast<double>(n) - p1;
    if (df2 <= 0.0) throw RankDeficient("partial_f: no residual degrees of freedom");

    NestedComparison cmp;
    cmp.restricted_terms = std::move(r_names);
    cmp.full_terms = std::move(f_names);
    cmp.delta_df = df1;
    cmp.df2 = df2;
    cmp.F = std::max(0.0, (restricted.train.rss - full.train.rss) / df1 /
                              (full.train.rss / df2));
    cmp.p = f_sf(cmp.F, df1, df2);
    cmp.partial_eta2 = cmp.F * df1 / (cmp.F * df1 + df2);
    return cmp;
}

// VIF_j = 1 / (1 - R^2_j), column j regressed on all others plus intercept.
inline std::vector<double> vif(const DesignMatrix& design) {
    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    if (n <= p) throw std::invalid_argument("vif: need n > p");
    std::vector<double> out(static_cast<std::size_t>(p), 1.0);
    if (p == 1) return out; // no other regressors

    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::MatrixXd others(n, p - 1);
        Eigen::Index c = 0;
        for (Eigen::Index k = 0; k < p; ++k)
            if (k != j) others.col(c++) = design.X.col(k);
        const Eigen::VectorXd target = design.X.col(j);

        const Eigen::VectorXd om = others.colwise().mean();
        const Eigen::MatrixXd oc = others.rowwise() - om.transpose();
        const Eigen::VectorXd tc = target.array() - target.mean();
        const double tss = tc.squaredNorm();
        if (tss == 0.0)
            throw PerfectCollinearity("vif: column is constant: " +
                                      design.columns[static_cast<std::size_t>(j)].name);
        const Eigen::VectorXd b = oc.colPivHouseholderQr().solve(tc);
        const double rss = (tc - oc * b).squaredNorm();
        const double r2 = 1.0 - rss / tss;
        const double denom = 1.0 - r2;
        if (denom < 1e-12)
            throw PerfectCollinearity("vif: perfect collinearity at column " +
                                      design.columns[static_cast<std::size_t>(j)].name);
        out[static_cast<std::size_t>(j)] = 1.0 / denom;
    }
    return out;
}

} // namespace pathloss
