#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pathloss/bayes.hpp"
#include "pathloss/campaign.hpp"
#include "pathloss/design.hpp"
#include "pathloss/errors.hpp"
#include "pathloss/regression.hpp"

namespace pathloss {

// Device-aware time-blocked folds. Each device's timeline is cut into k
// equal-duration contiguous blocks; block j of every device forms validation
// fold j. Training rows for fold j exclude anything within gap_hours of that
// fold's block edges on the same device (symmetric embargo).
struct FoldPlan {
    int k = 5;
    double gap_hours = 24.0;
    std::vector<int> fold_of_record;                       // validation fold per record
    std::map<std::string, std::vector<double>> boundaries; // per device, k+1 edges (seconds)

    std::vector<std::size_t> validation_rows(const std::vector<CampaignRecord>& records,
                                             int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (fold_of_record[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> training_rows(const std::vector<CampaignRecord>& records,
                                           int fold) const {
        const double gap_s = gap_hours * 3600.0;
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (fold_of_record[i] == fold) continue;
            const auto& edges = boundaries.at(records[i].device_id);
            const double lo = edges[static_cast<std::size_t>(fold)] - gap_s;
            const double hi = edges[static_cast<std::size_t>(fold) + 1] + gap_s;
            const double t = records[i].timestamp;
            if (t >= lo && t <= hi) continue; // embargoed
            out.push_back(i);
        }
        return out;
    }
};

inline FoldPlan make_time_blocked_folds(const std::vector<CampaignRecord>& records, int k = 5,
                                        double gap_hours = 24.0) {
    if (k < 2) throw std::invalid_argument("make_time_blocked_folds: k must be >= 2");
    if (gap_hours < 0.0) throw std::invalid_argument("make_time_blocked_folds: negative gap");
    if (records.empty()) throw std::invalid_argument("make_time_blocked_folds: no records");

    struct Span {
        double t0 = 0.0, t1 = 0.0;
        std::size_t count = 0;
    };
    std::map<std::string, Span> spans;
    for (const auto& r : records) {
        auto [it, inserted] = spans.try_emplace(r.device_id, Span{r.timestamp, r.timestamp, 0});
        it->second.t0 = std::min(it->second.t0, r.timestamp);
        it->second.t1 = std::max(it->second.t1, r.timestamp);
        ++it->second.count;
    }

    FoldPlan plan;
    plan.k = k;
    plan.gap_hours = gap_hours;
    const double gap_s = gap_hours * 3600.0;
    for (const auto& [device, span] : spans) {
        // a device must be splittable into k blocks and long enough that the
        // symmetric embargo around any one block leaves same-device training
        // data: span (k-1)/k > 2 gap
        const double duration = span.t1 - span.t0;
        const bool splittable = span.count >= static_cast<std::size_t>(k) && duration > 0.0;
        const bool trainable = duration * (static_cast<double>(k) - 1.0) /
                                   static_cast<double>(k) >
                               2.0 * gap_s;
        if (!splittable || !trainable)
            throw DeviceSpanTooShort("device " + device +
                                     " has too few records or too short a span for k folds");
        std::vector<double> edges(static_cast<std::size_t>(k) + 1);
        const double width = (span.t1 - span.t0) / static_cast<double>(k);
        for (int j = 0; j <= k; ++j) edges[static_cast<std::size_t>(j)] = span.t0 + width * j;
        plan.boundaries.emplace(device, std::move(edges));
    }

    plan.fold_of_record.resize(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto& edges = plan.boundaries.at(r.device_id);
        const double width = (edges.back() - edges.front()) / static_cast<double>(k);
        int j = width > 0.0
                    ? static_cast<int>(std::floor((r.timestamp - edges.front()) / width))
                    : 0;
        j = std::clamp(j, 0, k - 1);
        plan.fold_of_record[i] = j;
    }
    return plan;
}

struct Metrics {
    double rmse = 0.0;
    double r2 = 0.0;
};

inline Metrics metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("metrics: length mismatch");
    if (y.size() < 2) throw std::invalid_argument("metrics: need n >= 2");
    const double n = static_cast<double>(y.size());
    const double rss = (y - yhat).squaredNorm();
    const double tss = (y.array() - y.mean()).square().sum();
    if (tss == 0.0) throw ZeroVariance("metrics: response has zero variance");
    return {std::sqrt(rss / n), 1.0 - rss / tss};
}

// What to fit inside each fold.
struct ModelSpec {
    enum class Kind { penalized, blr_nig, blr_zellner };
    Kind kind = Kind::penalized;
    PenaltySpec penalty;
    // optional inner grid search (time-blocked sub-folds of the fold-train rows)
    std::vector<double> lambda_grid;
    std::vector<double> alpha_grid;
    NIGPrior prior; // blr_nig
    double g = 1.0; // blr_zellner

    static ModelSpec ols() { return {}; }
    static ModelSpec penalized_fixed(PenaltySpec p) {
        ModelSpec m;
        m.penalty = p;
        return m;
    }
    static ModelSpec nig(NIGPrior prior) {
        ModelSpec m;
        m.kind = Kind::blr_nig;
        m.prior = std::move(prior);
        return m;
    }
    static ModelSpec zellner(double g) {
        ModelSpec m;
        m.kind = Kind::blr_zellner;
        m.g = g;
        return m;
    }
};

struct OofResidual {
    std::size_t record_index = 0;
    std::string device_id;
    double timestamp = 0.0;
    int fold = 0;
    double residual_db = 0.0; // true - predicted
};

struct FoldOutcome {
    Metrics train;
    Metrics validation;
    PenaltySpec selected_penalty; // after any inner selection
};

struct CVResult {
    std::vector<FoldOutcome> per_fold;
    std::vector<OofResidual> residuals;        // record order
    std::vector<FitModel> fold_models;         // penalized kinds
    std::vector<NIGPosterior> fold_posteriors; // blr kinds

    Metrics pooled_validation() const {
        Eigen::VectorXd r(static_cast<Eigen::Index>(residuals.size()));
        for (std::size_t i = 0; i < residuals.size(); ++i)
            r(static_cast<Eigen::Index>(i)) = residuals[i].residual_db;
        const double rmse = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
        return {rmse, 0.0};
    }
};

namespace detail_cv {

// time-blocked sub-folds over a row subset, for inner hyperparameter search
inline std::vector<IndexFold> inner_folds(const std::vector<CampaignRecord>& records,
                                          const std::vector<std::size_t>& rows, int k,
                                          double gap_hours) {
    std::vector<CampaignRecord> subset;
    subset.reserve(rows.size());
    for (std::size_t r : rows) subset.push_back(records[r]);
    const FoldPlan plan = make_time_blocked_folds(subset, k, gap_hours);
    std::vector<IndexFold> folds(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        folds[static_cast<std::size_t>(j)].train = plan.training_rows(subset, j);
        folds[static_cast<std::size_t>(j)].validation = plan.validation_rows(subset, j);
    }
    return folds;
}

} // namespace detail_cv

// Runs the fold loop with strictly within-fold preprocessing: the
// standardizer (and any grid search) sees fold-train rows only. Residuals
// are pooled in record order: eps = PL_true - PL_pred.
inline CVResult run_cv(const std::vector<CampaignRecord>& records, const FeatureSpec& feature_spec,
                       const ModelSpec& model_spec, const FoldPlan& plan) {
    if (plan.fold_of_record.size() != records.size())
        throw std::invalid_argument("run_cv: plan does not cover records");

    const DesignMatrix full = build_design(records, feature_spec);

    CVResult result;
    result.residuals.reserve(records.size());
    std::vector<std::optional<double>> pooled(records.size());
    std::vector<int> fold_of(records.size());

    for (int fold = 0; fold < plan.k; ++fold) {
        const auto train_rows = plan.training_rows(records, fold);
        const auto val_rows = plan.validation_rows(records, fold);
        if (train_rows.size() < 2 || val_rows.empty())
            throw DeviceSpanTooShort("run_cv: degenerate fold " + std::to_string(fold));

        DesignMatrix train = detail_reg::take_rows(full, train_rows);
        DesignMatrix val = detail_reg::take_rows(full, val_rows);
        std::vector<std::size_t> all(train.rows());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const Standardizer s = fit_standardizer(train, all);
        const DesignMatrix train_s = apply_standardizer(s, train);
        const DesignMatrix val_s = apply_standardizer(s, val);

        FoldOutcome outcome;
        Eigen::VectorXd train_pred, val_pred;
        try {
            switch (model_spec.kind) {
                case ModelSpec::Kind::penalized: {
                    PenaltySpec pen = model_spec.penalty;
                    if (!model_spec.lambda_grid.empty()) {
                        const auto folds = detail_cv::inner_folds(records, train_rows,
                                                                  std::max(2, plan.k - 1),
                                                                  plan.gap_hours);
                        pen = select_hyperparameters(train, pen.kind, model_spec.lambda_grid,
                                                     model_spec.alpha_grid, folds);
                    }
                    const FitModel m = fit_linear(train_s, pen);
                    train_pred = predict(m, train_s);
                    val_pred = predict(m, val_s);
                    outcome.selected_penalty = pen;
                    result.fold_models.push_back(m);
                    break;
                }
                case ModelSpec::Kind::blr_nig: {
                    NIGPrior prior = model_spec.prior;
                    if (prior.beta0.size() == 0 && prior.precision.size() == 0)
                        prior = NIGPrior::weakly_informative(train_s.cols() + 1);
                    const NIGPosterior post = fit_blr_nig(train_s, prior);
                    train_pred = blr_point_predictions(post, train_s);
                    val_pred = blr_point_predictions(post, val_s);
                    result.fold_posteriors.push_back(post);
                    break;
                }
                case ModelSpec::Kind::blr_zellner: {
                    const NIGPosterior post = fit_blr_zellner(train_s, model_spec.g);
                    train_pred = blr_point_predictions(post, train_s);
                    val_pred = blr_point_predictions(post, val_s);
                    result.fold_posteriors.push_back(post);
                    break;
                }
            }
        } catch (const Error& e) {
            throw Error("fold " + std::to_string(fold) + ": " + e.what());
        }

        outcome.train = metrics(train_s.y, train_pred);
        outcome.validation = metrics(val_s.y, val_pred);
        result.per_fold.push_back(outcome);

        for (std::size_t i = 0; i < val_rows.size(); ++i) {
            pooled[val_rows[i]] = val_s.y(static_cast<Eigen::Index>(i)) -
                                  val_pred(static_cast<Eigen::Index>(i));
            fold_of[val_rows[i]] = fold;
        }
    }

    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!pooled[i]) continue; // record fell in no validation fold (cannot happen by plan)
        OofResidual r;
        r.record_index = i;
        r.device_id = records[i].device_id;
        r.timestamp = records[i].timestamp;
        r.fold = fold_of[i];
        r.residual_db = *pooled[i];
        result.residuals.push_back(std::move(r));
    }
    return result;
}

} // namespace pathloss
