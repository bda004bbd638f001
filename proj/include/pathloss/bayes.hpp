#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "pathloss/design.hpp"
#include "pathloss/errors.hpp"
#include "pathloss/regression.hpp"

namespace pathloss {

// Conjugate Normal-Inverse-Gamma prior over (coefficients, noise variance).
// Parameterized by the precision Lambda0 = V0^-1 so the diffuse limit is
// exactly Lambda0 = 0. An intercept column is prepended internally; the
// prior covers [intercept, coefficients].
struct NIGPrior {
    Eigen::VectorXd beta0;     // prior mean, size p+1; empty means zeros
    Eigen::MatrixXd precision; // Lambda0, (p+1)x(p+1); empty means diffuse
    double a0 = 1e-3;
    double b0 = 1e-3;

    static NIGPrior diffuse() {
        NIGPrior p;
        p.a0 = 0.0;
        p.b0 = 0.0;
        return p;
    }

    // beta0 = 0, V0 = v * I (default weakly informative v = 1e6)
    static NIGPrior weakly_informative(std::size_t p_with_intercept, double v = 1e6) {
        NIGPrior prior;
        prior.beta0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p_with_intercept));
        prior.precision = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p_with_intercept),
                                                    static_cast<Eigen::Index>(p_with_intercept)) /
                          v;
        return prior;
    }

    static NIGPrior from_covariance(const Eigen::VectorXd& beta0, const Eigen::MatrixXd& V0,
                                    double a0, double b0) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(V0);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw SingularPrior("NIGPrior: V0 is not positive definite");
        NIGPrior p;
        p.beta0 = beta0;
        p.precision = ldlt.solve(
            Eigen::MatrixXd::Identity(V0.rows(), V0.cols()));
        p.a0 = a0;
        p.b0 = b0;
        return p;
    }
};

struct NIGPosterior {
    std::vector<std::string> names; // "(intercept)" first
    Eigen::VectorXd beta_n;
    Eigen::MatrixXd V_n;
    double a_n = 0.0;
    double b_n = 0.0;
};

struct StudentTPrediction {
    double location = 0.0;
    double scale = 0.0;
    double dof = 0.0;
};

namespace detail_bayes {

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Phi(X.rows(), X.cols() + 1);
    Phi.col(0).setOnes();
    Phi.rightCols(X.cols()) = X;
    return Phi;
}

inline std::vector<std::string> names_with_intercept(const DesignMatrix& design) {
    std::vector<std::string> names = {"(intercept)"};
    for (const auto& c : design.columns) names.push_back(c.name);
    return names;
}

} // namespace detail_bayes

// Closed-form conjugate update:
//   Lambda_n = Lambda0 + Phi'Phi
//   beta_n   = Lambda_n^-1 (Lambda0 beta0 + Phi'y)
//   a_n      = a0 + n/2
//   b_n      = b0 + (y'y + beta0'Lambda0 beta0 - beta_n'Lambda_n beta_n)/2
inline NIGPosterior fit_blr_nig(const DesignMatrix& design, const NIGPrior& prior) {
    const Eigen::MatrixXd Phi = detail_bayes::with_intercept(design.X);
    const Eigen::Index d = Phi.cols();

    Eigen::VectorXd beta0 = prior.beta0;
    if (beta0.size() == 0) beta0 = Eigen::VectorXd::Zero(d);
    if (beta0.size() != d) throw SingularPrior("fit_blr_nig: prior mean has wrong size");
    Eigen::MatrixXd lambda0 = prior.precision;
    if (lambda0.size() == 0) lambda0 = Eigen::MatrixXd::Zero(d, d);
    if (lambda0.rows() != d || lambda0.cols() != d)
        throw SingularPrior("fit_blr_nig: prior precision has wrong size");

    const Eigen::MatrixXd lambda_n = lambda0 + Phi.transpose() * Phi;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lambda_n);
    if (ldlt.info() != Eigen::Success)
        throw RankDeficient("fit_blr_nig: posterior precision not invertible");
    const Eigen::VectorXd rhs = lambda0 * beta0 + Phi.transpose() * design.y;
    const Eigen::VectorXd beta_n = ldlt.solve(rhs);

    NIGPosterior post;
    post.names = detail_bayes::names_with_intercept(design);
    post.beta_n = beta_n;
    post.V_n = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
    const double n = static_cast<double>(design.X.rows());
    post.a_n = prior.a0 + 0.5 * n;
    post.b_n = prior.b0 + 0.5 * (design.y.squaredNorm() + beta0.dot(lambda0 * beta0) -
                                 beta_n.dot(lambda_n * beta_n));
    return post;
}

// Zellner g-prior: beta | s2 ~ N(0, g s2 (Phi'Phi)^-1), improper 1/s2 prior
// on the variance. Posterior mean is exactly g/(1+g) times the OLS solution.
inline NIGPosterior fit_blr_zellner(const DesignMatrix& design, double g) {
    if (!(g > 0.0)) throw std::invalid_argument("fit_blr_zellner: g must be > 0");
    const Eigen::MatrixXd Phi = detail_bayes::with_intercept(design.X);
    const Eigen::Index d = Phi.cols();
    const Eigen::MatrixXd gram = Phi.transpose() * Phi;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) throw SingularGram("fit_blr_zellner: Phi'Phi is singular");

    const double shrink = (1.0 + 1.0 / g);
    const Eigen::MatrixXd lambda_n = gram * shrink;
    const Eigen::VectorXd beta_n = lambda_n.ldlt().solve(Phi.transpose() * design.y);

    NIGPosterior post;
    post.names = detail_bayes::names_with_intercept(design);
    post.beta_n = beta_n;
    post.V_n = lambda_n.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
    const double n = static_cast<double>(design.X.rows());
    post.a_n = 0.5 * n;
    post.b_n = 0.5 * (design.y.squaredNorm() - beta_n.dot(lambda_n * beta_n));
    return post;
}

// Per-row posterior predictive: Student-t with location phi'beta_n,
// dof 2 a_n, scale^2 = (b_n/a_n)(1 + phi' V_n phi).
inline std::vector<StudentTPrediction> blr_predictive(const NIGPosterior& post,
                                                      const DesignMatrix& design) {
    std::vector<std::string> wanted(post.names.begin() + 1, post.names.end());
    const auto perm = detail_reg::column_permutation(design.column_names(), wanted);

    std::vector<StudentTPrediction> out;
    out.reserve(design.rows());
    const Eigen::Index d = post.beta_n.size();
    Eigen::VectorXd phi(d);
    for (Eigen::Index i = 0; i < design.X.rows(); ++i) {
        phi(0) = 1.0;
        for (std::size_t j = 0; j < perm.size(); ++j)
            phi(static_cast<Eigen::Index>(j) + 1) = design.X(i, static_cast<Eigen::Index>(perm[j]));
        StudentTPrediction pred;
        pred.location = phi.dot(post.beta_n);
        pred.dof = 2.0 * post.a_n;
        pred.scale = std::sqrt((post.b_n / post.a_n) * (1.0 + phi.dot(post.V_n * phi)));
        out.push_back(pred);
    }
    return out;
}

inline Eigen::VectorXd blr_point_predictions(const NIGPosterior& post, const DesignMatrix& design) {
    const auto preds = blr_predictive(post, design);
    Eigen::VectorXd out(static_cast<Eigen::Index>(preds.size()));
    for (std::size_t i = 0; i < preds.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = preds[i].location;
    return out;
}

} // namespace pathloss
