#pragma once

#include <algorithm>
#include <cmath>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ctxsearch/error.hpp"
#include "ctxsearch/features.hpp"
#include "ctxsearch/scene.hpp"

namespace ctxsearch {

/// Linear cost-sensitive scorer over standardized StateFeatures.
struct Policy {
    FeatureSchema schema = FeatureSchema::full;
    ClassCatalog catalog;
    std::vector<double> mean;     ///< per-component offset
    std::vector<double> scale;    ///< per-component divisor (> 0)
    std::vector<double> weights;  ///< margin weights on the standardized vector
    double threshold = 0.0;       ///< label = [belief > threshold]

    std::size_t dim() const noexcept { return feature_dim(schema, catalog.size()); }

    /// All-zero weights with identity standardization.
    static Policy zero(FeatureSchema schema, ClassCatalog catalog) {
        Policy p;
        p.schema = schema;
        p.catalog = std::move(catalog);
        const std::size_t d = p.dim();
        p.mean.assign(d, 0.0);
        p.scale.assign(d, 1.0);
        p.weights.assign(d, 0.0);
        return p;
    }

    void check_consistent() const {
        const std::size_t d = dim();
        if (mean.size() != d || scale.size() != d || weights.size() != d)
            throw SchemaError("policy vectors do not match the feature schema length " + std::to_string(d));
        for (std::size_t i = 0; i < d; ++i)
            if (!std::isfinite(weights[i]) || !std::isfinite(mean[i]) || !(scale[i] > 0.0) || !std::isfinite(scale[i]))
                throw SchemaError("policy parameters must be finite with positive scales");
        if (!std::isfinite(threshold)) throw SchemaError("policy threshold must be finite");
    }

    /// Hard error unless this policy was trained for `expected` features on `cat`.
    void check_schema(FeatureSchema expected, const ClassCatalog& cat) const {
        if (schema != expected)
            throw SchemaError(std::string("policy uses the '") + schema_name(schema) + "' feature schema, expected '" +
                              schema_name(expected) + "'");
        if (!(catalog == cat))
            throw SchemaError("policy catalog [" + catalog.joined() + "] does not match scene catalog [" + cat.joined() + "]");
    }

    friend bool operator==(const Policy&, const Policy&) = default;
};

struct Prediction {
    int label = 0;
    double belief = 0.0;
};

inline Prediction predict(const Policy& policy, std::span<const double> features) {
    if (features.size() != policy.dim())
        throw SchemaError("feature vector has length " + std::to_string(features.size()) + ", policy expects " +
                          std::to_string(policy.dim()));
    double belief = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i)
        belief += policy.weights[i] * ((features[i] - policy.mean[i]) / policy.scale[i]);
    return {belief > policy.threshold ? 1 : 0, belief};
}

struct PredictionEntry {
    int region_id = 0;
    int label = 0;
    double belief = 0.0;
};

using PredictionList = std::vector<PredictionEntry>;

/// Groundtruth labelling of `unexplored`: belief 1 for the query class, 0 otherwise.
inline PredictionList oracle_predict(const Scene& scene, ClassId query, std::span<const int> unexplored) {
    PredictionList out;
    out.reserve(unexplored.size());
    for (int id : unexplored) {
        const bool pos = scene.region(id).gt_class == query;
        out.push_back({id, pos ? 1 : 0, pos ? 1.0 : 0.0});
    }
    return out;
}

/// Highest belief; ties go to the lowest proposal rank.
inline int select_highest_belief(const Scene& scene, const PredictionList& list) {
    if (list.empty()) throw ArgumentError("select_highest_belief: empty prediction list");
    const PredictionEntry* best = &list.front();
    int best_rank = scene.region(best->region_id).proposal_rank;
    for (const auto& e : list) {
        const int rank = scene.region(e.region_id).proposal_rank;
        if (e.belief > best->belief || (e.belief == best->belief && rank < best_rank)) {
            best = &e;
            best_rank = rank;
        }
    }
    return best->region_id;
}

/// Number of regions whose labels disagree. Both lists must cover the same region ids.
inline std::size_t hamming_loss(const PredictionList& predicted, const PredictionList& oracle) {
    if (predicted.size() != oracle.size())
        throw ArgumentError("hamming_loss: lists cover different region sets (sizes " + std::to_string(predicted.size()) +
                            " vs " + std::to_string(oracle.size()) + ")");
    std::unordered_map<int, int> truth;
    truth.reserve(oracle.size());
    for (const auto& e : oracle)
        if (!truth.emplace(e.region_id, e.label).second) throw ArgumentError("hamming_loss: duplicate region id");
    std::size_t loss = 0;
    std::unordered_map<int, bool> seen;
    for (const auto& e : predicted) {
        auto it = truth.find(e.region_id);
        if (it == truth.end() || seen.count(e.region_id))
            throw ArgumentError("hamming_loss: region " + std::to_string(e.region_id) + " not in the oracle list");
        seen[e.region_id] = true;
        loss += (e.label != it->second);
    }
    return loss;
}

struct TrainingExample {
    StateFeatures features;
    int label = 0;
    double cost = 1.0;
};

/// Examples in a flat row-major buffer. Used for one rollout's worth of data.
class ExampleBatch {
public:
    explicit ExampleBatch(std::size_t dim = 0) : dim_(dim) {}

    void add(std::span<const double> features, int label, double cost = 1.0) {
        if (features.size() != dim_) throw SchemaError("example length does not match dataset dimension");
        if (!(cost > 0.0) || !std::isfinite(cost)) throw ArgumentError("example cost must be finite and positive");
        if (label != 0 && label != 1) throw ArgumentError("example label must be 0 or 1");
        data_.insert(data_.end(), features.begin(), features.end());
        labels_.push_back(label);
        costs_.push_back(cost);
    }
    void add(const TrainingExample& e) { add(e.features, e.label, e.cost); }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::span<const double> features(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    int label(std::size_t i) const { return labels_[i]; }
    double cost(std::size_t i) const { return costs_[i]; }

private:
    friend class DatasetAggregate;
    std::size_t dim_;
    std::vector<double> data_;
    std::vector<int> labels_;
    std::vector<double> costs_;
};

/// Append-only union of the batches collected across DAgger iterations, each row
/// tagged with the iteration that produced it.
class DatasetAggregate {
public:
    explicit DatasetAggregate(std::size_t dim = 0) : rows_(dim) {}

    DatasetAggregate(const DatasetAggregate& other) : rows_(other.rows_), iteration_(other.iteration_) {}
    DatasetAggregate& operator=(const DatasetAggregate& other) {
        if (this != &other) {
            rows_ = other.rows_;
            iteration_ = other.iteration_;
        }
        return *this;
    }

    /// Safe to call from several threads.
    void append(const ExampleBatch& batch, int iteration) {
        if (batch.dim() != rows_.dim_) throw SchemaError("batch dimension does not match dataset dimension");
        std::lock_guard lock(mutex_);
        rows_.data_.insert(rows_.data_.end(), batch.data_.begin(), batch.data_.end());
        rows_.labels_.insert(rows_.labels_.end(), batch.labels_.begin(), batch.labels_.end());
        rows_.costs_.insert(rows_.costs_.end(), batch.costs_.begin(), batch.costs_.end());
        iteration_.insert(iteration_.end(), batch.size(), iteration);
    }

    std::size_t dim() const noexcept { return rows_.dim(); }
    std::size_t size() const noexcept { return rows_.size(); }
    std::span<const double> features(std::size_t i) const { return rows_.features(i); }
    int label(std::size_t i) const { return rows_.label(i); }
    double cost(std::size_t i) const { return rows_.cost(i); }
    int iteration(std::size_t i) const { return iteration_[i]; }

    std::size_t count_label(int label) const {
        return static_cast<std::size_t>(std::count(rows_.labels_.begin(), rows_.labels_.end(), label));
    }

private:
    ExampleBatch rows_;
    std::vector<int> iteration_;
    mutable std::mutex mutex_;
};

struct TrainConfig {
    double l2 = 1e-4;          ///< ridge strength on the standardized weights
    double tolerance = 1e-8;   ///< gradient infinity-norm at convergence
    int max_iterations = 100;  ///< Newton steps
    bool balance_classes = true;
    double threshold = 0.0;
};

namespace detail {

inline double log1p_exp(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace detail

/// Cost-weighted, L2-regularized logistic regression fitted by damped Newton.
/// The objective is normalized by total cost, so replicating the dataset leaves
/// the solution unchanged.
inline Policy train_cost_sensitive(const DatasetAggregate& data, FeatureSchema schema, const ClassCatalog& catalog,
                                   const TrainConfig& cfg = {}) {
    const std::size_t n = data.size();
    const std::size_t d = feature_dim(schema, catalog.size());
    if (data.dim() != d) throw SchemaError("dataset dimension does not match the feature schema");
    if (data.count_label(1) == 0 || data.count_label(0) == 0)
        throw DegenerateDataError("training data must contain both labels (positives: " +
                                  std::to_string(data.count_label(1)) + ", negatives: " + std::to_string(data.count_label(0)) + ")");

    Policy policy = Policy::zero(schema, catalog);
    policy.threshold = cfg.threshold;

    // standardization (the trailing bias column is left alone)
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) sum += Eigen::Map<const Eigen::VectorXd>(data.features(i).data(), static_cast<Eigen::Index>(d));
    const Eigen::VectorXd mu = sum / static_cast<double>(n);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
        sq += (Eigen::Map<const Eigen::VectorXd>(data.features(i).data(), static_cast<Eigen::Index>(d)) - mu).cwiseAbs2();
    for (std::size_t j = 0; j + 1 < d; ++j) {
        const double sd = std::sqrt(sq[static_cast<Eigen::Index>(j)] / static_cast<double>(n));
        policy.mean[j] = mu[static_cast<Eigen::Index>(j)];
        policy.scale[j] = sd > 1e-12 ? sd : 1.0;
    }

    double cost_pos = 0.0, cost_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) (data.label(i) ? cost_pos : cost_neg) += data.cost(i);
    const double total = cost_pos + cost_neg;
    const double w_pos = cfg.balance_classes ? total / (2.0 * cost_pos) : 1.0;
    const double w_neg = cfg.balance_classes ? total / (2.0 * cost_neg) : 1.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += data.cost(i) * (data.label(i) ? w_pos : w_neg);

    const Eigen::Map<const Eigen::VectorXd> mean_v(policy.mean.data(), static_cast<Eigen::Index>(d));
    const Eigen::Map<const Eigen::VectorXd> scale_v(policy.scale.data(), static_cast<Eigen::Index>(d));
    constexpr std::size_t kChunk = 4096;
    Eigen::MatrixXd block;

    auto load_block = [&](std::size_t start, std::size_t rows) {
        block.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
        for (std::size_t r = 0; r < rows; ++r) {
            const Eigen::Map<const Eigen::RowVectorXd> x(data.features(start + r).data(), static_cast<Eigen::Index>(d));
            block.row(static_cast<Eigen::Index>(r)) = (x - mean_v.transpose()).cwiseQuotient(scale_v.transpose());
        }
    };
    auto weight_of = [&](std::size_t i) { return data.cost(i) * (data.label(i) ? w_pos : w_neg) / norm; };

    auto objective = [&](const Eigen::VectorXd& w) {
        double f = 0.5 * cfg.l2 * w.squaredNorm();
        for (std::size_t start = 0; start < n; start += kChunk) {
            const std::size_t rows = std::min(kChunk, n - start);
            load_block(start, rows);
            const Eigen::VectorXd z = block * w;
            for (std::size_t r = 0; r < rows; ++r) {
                const double y = data.label(start + r) ? 1.0 : -1.0;
                f += weight_of(start + r) * detail::log1p_exp(-y * z[static_cast<Eigen::Index>(r)]);
            }
        }
        return f;
    };

    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    double f = objective(w);
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        Eigen::VectorXd grad = cfg.l2 * w;
        Eigen::MatrixXd hess = cfg.l2 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t start = 0; start < n; start += kChunk) {
            const std::size_t rows = std::min(kChunk, n - start);
            load_block(start, rows);
            const Eigen::VectorXd z = block * w;
            Eigen::VectorXd resid(static_cast<Eigen::Index>(rows)), curv(static_cast<Eigen::Index>(rows));
            for (std::size_t r = 0; r < rows; ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                const double p = detail::sigmoid(z[ri]);
                const double c = weight_of(start + r);
                resid[ri] = c * (p - (data.label(start + r) ? 1.0 : 0.0));
                curv[ri] = c * p * (1.0 - p);
            }
            grad.noalias() += block.transpose() * resid;
            const Eigen::MatrixXd scaled = block.array().colwise() * curv.array().sqrt();
            hess.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
        }
        if (grad.lpNorm<Eigen::Infinity>() < cfg.tolerance) break;
        const Eigen::VectorXd step = hess.selfadjointView<Eigen::Lower>().ldlt().solve(-grad);
        const double slope = grad.dot(step);
        double t = 1.0;
        Eigen::VectorXd candidate = w + step;
        double fc = objective(candidate);
        while (fc > f + 1e-4 * t * slope && t > 1e-10) {
            t *= 0.5;
            candidate = w + t * step;
            fc = objective(candidate);
        }
        if (!(fc <= f)) break;
        const bool stalled = (f - fc) <= 1e-16 * std::max(1.0, std::abs(f));
        w = candidate;
        f = fc;
        if (stalled) break;
    }
    for (std::size_t j = 0; j < d; ++j) policy.weights[j] = w[static_cast<Eigen::Index>(j)];
    policy.check_consistent();
    return policy;
}

}  // namespace ctxsearch
