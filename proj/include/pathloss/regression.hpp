#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pathloss/design.hpp"
#include "pathloss/errors.hpp"

namespace pathloss {

enum class PenaltyKind { none, ridge, lasso, enet };

// Penalized least-squares objective, per-sample normalized:
//   (1/2n) ||y - b0 - X b||^2 + P(b)
// with P(b) = lambda ||b||_2^2            (ridge)
//             lambda ||b||_1              (lasso)
//             lambda ((1-alpha)/2 ||b||_2^2 + alpha ||b||_1)   (enet)
// The intercept is never penalized. Note enet(alpha=0) carries the
// conventional extra 1/2 on the l2 term, so it equals ridge at half the
// lambda; enet(alpha=1) equals lasso at the same lambda.
struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::none;
    double lambda = 0.0;
    double alpha = 1.0; // l1 fraction for enet

    static PenaltySpec none() { return {}; }
    static PenaltySpec ridge(double lambda) { return {PenaltyKind::ridge, lambda, 0.0}; }
    static PenaltySpec lasso(double lambda) { return {PenaltyKind::lasso, lambda, 1.0}; }
    static PenaltySpec elastic_net(double lambda, double alpha) {
        return {PenaltyKind::enet, lambda, alpha};
    }
};

inline const char* penalty_name(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::none: return "none";
        case PenaltyKind::ridge: return "ridge";
        case PenaltyKind::lasso: return "lasso";
        case PenaltyKind::enet: return "enet";
    }
    return "?";
}

struct TrainDiagnostics {
    double rss = 0.0;
    double r2 = 0.0;
};

// Coefficients on the raw (unstandardized) column scale, recovered from the
// design's standardizer. For the linear design the z_d entry is the path
// loss exponent and the wall entries are per-wall losses in dB.
struct NaturalCoefficients {
    double intercept = 0.0;
    std::vector<double> beta;
};

struct FitModel {
    double intercept = 0.0;
    Eigen::VectorXd beta; // scale of the design the model was fit on
    std::vector<std::string> column_names;
    NaturalCoefficients natural;
    PenaltySpec penalty;
    TrainDiagnostics train;
};

namespace detail_reg {

inline void center(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::MatrixXd& Xc,
                   Eigen::VectorXd& yc, Eigen::VectorXd& xmean, double& ymean) {
    xmean = X.colwise().mean();
    ymean = y.mean();
    Xc = X.rowwise() - xmean.transpose();
    yc = y.array() - ymean;
}

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

} // namespace detail_reg

// Fits the mean model on the design as given (normally standardized
// columns). OLS uses a column-pivoted QR on the centered design; ridge the
// penalized normal equations; lasso and elastic net cyclic coordinate
// descent with soft thresholding, converged when no coefficient moves by
// more than tol in a sweep.
inline FitModel fit_linear(const DesignMatrix& design, const PenaltySpec& penalty,
                           double tol = 1e-10, int max_iter = 100000) {
    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    if (n < 2) throw std::invalid_argument("fit_linear: need at least 2 rows");

    Eigen::MatrixXd Xc;
    Eigen::VectorXd yc, xmean;
    double ymean;
    detail_reg::center(design.X, design.y, Xc, yc, xmean, ymean);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double inv_n = 1.0 / static_cast<double>(n);

    switch (penalty.kind) {
        case PenaltyKind::none: {
            if (n <= p) throw RankDeficient("fit_linear: OLS requires n > p");
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
            qr.setThreshold(1e-10);
            if (qr.rank() < p) throw RankDeficient("fit_linear: design is rank deficient");
            beta = qr.solve(yc);
            break;
        }
        case PenaltyKind::ridge: {
            Eigen::MatrixXd A = Xc.transpose() * Xc * inv_n;
            A.diagonal().array() += 2.0 * penalty.lambda;
            beta = A.ldlt().solve(Xc.transpose() * yc * inv_n);
            break;
        }
        case PenaltyKind::lasso:
        case PenaltyKind::enet: {
            const double alpha = penalty.kind == PenaltyKind::lasso ? 1.0 : penalty.alpha;
            if (alpha < 0.0 || alpha > 1.0)
                throw std::invalid_argument("fit_linear: alpha must lie in [0,1]");
            const double l1 = penalty.lambda * alpha;
            const double l2 = penalty.kind == PenaltyKind::lasso
                                  ? 0.0
                                  : penalty.lambda * (1.0 - alpha);
            Eigen::VectorXd colsq(p);
            for (Eigen::Index j = 0; j < p; ++j) colsq(j) = Xc.col(j).squaredNorm() * inv_n;
            Eigen::VectorXd resid = yc;
            bool converged = false;
            for (int it = 0; it < max_iter && !converged; ++it) {
                double max_delta = 0.0;
                for (Eigen::Index j = 0; j < p; ++j) {
                    if (colsq(j) == 0.0) continue; // constant column cannot move
                    const double bj = beta(j);
                    const double rho = Xc.col(j).dot(resid) * inv_n + colsq(j) * bj;
                    const double bnew = detail_reg::soft_threshold(rho, l1) / (colsq(j) + l2);
                    if (bnew != bj) {
                        resid -= Xc.col(j) * (bnew - bj);
                        beta(j) = bnew;
                        max_delta = std::max(max_delta, std::fabs(bnew - bj));
                    }
                }
                converged = max_delta < tol;
            }
            if (!converged) throw NotConverged("fit_linear: coordinate descent hit max_iter");
            break;
        }
    }

    FitModel model;
    model.penalty = penalty;
    model.beta = beta;
    model.intercept = ymean - xmean.dot(beta);
    model.column_names = design.column_names();

    const Eigen::VectorXd fitted = (design.X * beta).array() + model.intercept;
    const Eigen::VectorXd resid = design.y - fitted;
    model.train.rss = resid.squaredNorm();
    const double tss = (design.y.array() - ymean).square().sum();
    model.train.r2 = tss > 0.0 ? 1.0 - model.train.rss / tss : 0.0;

    // de-standardize
    model.natural.beta.resize(static_cast<std::size_t>(p));
    double shift = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        double m = 0.0, s = 1.0;
        if (design.scaling) {
            m = design.scaling->mean[static_cast<std::size_t>(j)];
            s = design.scaling->std[static_cast<std::size_t>(j)];
        }
        model.natural.beta[static_cast<std::size_t>(j)] = beta(j) / s;
        shift += beta(j) * m / s;
    }
    model.natural.intercept = model.intercept - shift;
    return model;
}

namespace detail_reg {

// maps each of `wanted` onto its position in `have`
inline std::vector<std::size_t> column_permutation(const std::vector<std::string>& have,
                                                   const std::vector<std::string>& wanted) {
    if (have.size() != wanted.size())
        throw ColumnMismatch("column count differs between model and design");
    std::vector<std::size_t> perm(wanted.size());
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        bool found = false;
        for (std::size_t j = 0; j < have.size(); ++j) {
            if (have[j] == wanted[i]) {
                perm[i] = j;
                found = true;
                break;
            }
        }
        if (!found) throw ColumnMismatch("design lacks column: " + wanted[i]);
    }
    return perm;
}

} // namespace detail_reg

// yhat = b0 + X b, with columns aligned to the model by name so a permuted
// design predicts identically.
inline Eigen::VectorXd predict(const FitModel& model, const DesignMatrix& design) {
    const auto perm = detail_reg::column_permutation(design.column_names(), model.column_names);
    Eigen::VectorXd yhat = Eigen::VectorXd::Constant(design.X.rows(), model.intercept);
    for (std::size_t i = 0; i < perm.size(); ++i)
        yhat += design.X.col(static_cast<Eigen::Index>(perm[i])) * model.beta(static_cast<Eigen::Index>(i));
    return yhat;
}

// Same prediction from natural coefficients on an unstandardized design.
inline Eigen::VectorXd predict_natural(const FitModel& model, const DesignMatrix& raw_design) {
    const auto perm = detail_reg::column_permutation(raw_design.column_names(), model.column_names);
    Eigen::VectorXd yhat = Eigen::VectorXd::Constant(raw_design.X.rows(), model.natural.intercept);
    for (std::size_t i = 0; i < perm.size(); ++i)
        yhat += raw_design.X.col(static_cast<Eigen::Index>(perm[i])) * model.natural.beta[i];
    return yhat;
}

struct IndexFold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

namespace detail_reg {

inline DesignMatrix take_rows(const DesignMatrix& design, const std::vector<std::size_t>& rows) {
    DesignMatrix out;
    out.columns = design.columns;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), design.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = design.X.row(static_cast<Eigen::Index>(rows[i]));
        out.y(static_cast<Eigen::Index>(i)) = design.y(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

} // namespace detail_reg

// Grid search by inner cross-validation on an unstandardized design; the
// standardizer is refit on each fold's training rows. Minimum mean
// validation RMSE wins; exact ties go to the larger lambda (more
// parsimonious fit).
inline PenaltySpec select_hyperparameters(const DesignMatrix& design, PenaltyKind kind,
                                          const std::vector<double>& lambda_grid,
                                          const std::vector<double>& alpha_grid,
                                          const std::vector<IndexFold>& inner_folds) {
    if (kind == PenaltyKind::none) return PenaltySpec::none();
    if (lambda_grid.empty()) throw std::invalid_argument("select_hyperparameters: empty lambda grid");
    if (inner_folds.empty()) throw std::invalid_argument("select_hyperparameters: no folds");
    std::vector<double> alphas = alpha_grid;
    if (kind != PenaltyKind::enet || alphas.empty()) alphas = {1.0};

    PenaltySpec best;
    double best_rmse = std::numeric_limits<double>::infinity();
    bool first = true;
    for (double alpha : alphas) {
        for (double lambda : lambda_grid) {
            PenaltySpec cand{kind, lambda, alpha};
            double total = 0.0;
            std::size_t count = 0;
            for (const auto& fold : inner_folds) {
                DesignMatrix train = detail_reg::take_rows(design, fold.train);
                DesignMatrix val = detail_reg::take_rows(design, fold.validation);
                const Standardizer s = fit_standardizer(train, [&] {
                    std::vector<std::size_t> all(train.rows());
                    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                    return all;
                }());
                const DesignMatrix train_s = apply_standardizer(s, train);
                const DesignMatrix val_s = apply_standardizer(s, val);
                const FitModel m = fit_linear(train_s, cand);
                const Eigen::VectorXd err = val_s.y - predict(m, val_s);
                total += err.squaredNorm();
                count += val_s.rows();
            }
            const double rmse = std::sqrt(total / static_cast<double>(count));
            const double tie = 1e-10 * (1.0 + std::fabs(best_rmse));
            if (first || rmse < best_rmse - tie ||
                (std::fabs(rmse - best_rmse) <= tie && lambda > best.lambda)) {
                best = cand;
                best_rmse = rmse;
                first = false;
            }
        }
    }
    return best;
}

} // namespace pathloss
