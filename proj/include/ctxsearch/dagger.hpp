#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ctxsearch/error.hpp"
#include "ctxsearch/parallel.hpp"
#include "ctxsearch/policy.hpp"
#include "ctxsearch/search.hpp"

namespace ctxsearch {

/// Per scene (by corpus index), per region (by proposal rank): whether the region
/// may contribute training examples. Empty means every region does.
using ExampleMask = std::vector<std::vector<bool>>;

struct DaggerConfig {
    int iterations = 3;
    int budget = 100;             ///< exploration budget of training rollouts
    double beta0 = 0.0;           ///< iteration i >= 2 follows the oracle with probability beta0^(i-1)
    int validation_every = 5;     ///< every k-th scene is held out; 0 validates on the training scenes
    double mistake_weight = 1.0;  ///< cost multiplier for examples the rollout policy got wrong
    bool background_skip = true;
    double iou_threshold = kDefaultNmsIou;
    std::uint64_t noise_seed = 0;
    std::uint64_t seed = 0;
    int threads = 1;
    TrainConfig train;
};

struct IterationDiagnostics {
    int iteration = 0;
    double beta = 0.0;
    std::size_t examples_added = 0;
    std::size_t aggregate_size = 0;
    double mean_hamming = 0.0;        ///< of the rollout policy, per visited training state
    double validation_hamming = 0.0;  ///< of the newly trained policy, per visited validation state
};

struct DaggerResult {
    Policy policy;
    int selected_iteration = 0;
    std::vector<IterationDiagnostics> diagnostics;
    std::vector<Policy> iteration_policies;
};

/// Mean Hamming loss per visited state when `policy` explores `scenes` on its own.
inline double mean_rollout_hamming(const Policy& policy, const Corpus& scenes, ClassId query, const ExploreOptions& base,
                                   int threads = 1) {
    std::vector<std::size_t> loss(scenes.size(), 0), states(scenes.size(), 0);
    ExploreOptions opt = base;
    opt.mode = ExploreMode::policy;
    parallel_for(scenes.size(), threads, [&](std::size_t s) {
        seq_explore(scenes[s], query, &policy, opt, [&](const StateSnapshot& snap) {
            std::size_t l = 0;
            for (std::size_t i = 0; i < snap.candidates.size(); ++i) {
                const int truth = snap.scene.region(snap.candidates[i]).gt_class == query ? 1 : 0;
                l += snap.predictions[i].label != truth;
            }
            loss[s] += l;
            ++states[s];
        });
    });
    std::size_t total_loss = 0, total_states = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        total_loss += loss[s];
        total_states += states[s];
    }
    return total_states ? static_cast<double>(total_loss) / static_cast<double>(total_states) : 0.0;
}

/// Dataset aggregation: iteration 1 rolls out the oracle, later iterations a mixture
/// of oracle and the latest policy. Every visited state contributes one example per
/// (unmasked) unexplored region, labelled by the oracle. After each iteration a
/// classifier is fitted to the whole aggregate; the iterate with the lowest
/// validation Hamming loss is returned.
inline DaggerResult dagger_train(const Corpus& corpus, ClassId query, const DaggerConfig& cfg,
                                 const ExampleMask& mask = {}, DatasetAggregate* aggregate_out = nullptr) {
    if (corpus.empty()) throw ArgumentError("dagger_train: empty corpus");
    if (cfg.iterations < 1) throw ArgumentError("dagger_train: iterations must be >= 1");
    if (cfg.budget < 1) throw ArgumentError("dagger_train: budget must be >= 1");
    if (!mask.empty() && mask.size() != corpus.size()) throw ArgumentError("dagger_train: mask must cover every scene");
    const ClassCatalog& catalog = corpus.front().catalog;
    for (const auto& s : corpus)
        if (!(s.catalog == catalog)) throw SchemaError("dagger_train: scenes disagree on the class catalog");

    std::vector<std::size_t> train_idx, valid_idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const bool held = cfg.validation_every >= 2 &&
                          static_cast<int>(i % static_cast<std::size_t>(cfg.validation_every)) == cfg.validation_every - 1;
        (held ? valid_idx : train_idx).push_back(i);
    }
    if (train_idx.empty()) throw ArgumentError("dagger_train: no training scenes after the validation split");
    Corpus validation;
    for (auto i : (valid_idx.empty() ? train_idx : valid_idx)) validation.push_back(corpus[i]);

    std::size_t positives = 0;
    for (auto i : train_idx) positives += corpus[i].count_class(query);
    if (positives == 0)
        throw DegenerateDataError("no '" + catalog.name(query) + "' regions in the training scenes");

    const std::size_t dim = feature_dim(FeatureSchema::full, catalog.size());
    DatasetAggregate aggregate(dim);
    DaggerResult result;
    Policy current = Policy::zero(FeatureSchema::full, catalog);
    double best_loss = std::numeric_limits<double>::infinity();

    ExploreOptions base;
    base.budget = cfg.budget;
    base.background_skip = cfg.background_skip;
    base.noise_seed = cfg.noise_seed;
    base.iou_threshold = cfg.iou_threshold;

    for (int it = 1; it <= cfg.iterations; ++it) {
        const double beta = it == 1 ? 1.0 : std::pow(cfg.beta0, it - 1);
        ExploreOptions opt = base;
        opt.mode = beta >= 1.0 ? ExploreMode::oracle : (beta <= 0.0 ? ExploreMode::policy : ExploreMode::mixture);
        opt.beta = beta;
        opt.mixture_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(it));

        std::vector<ExampleBatch> batches(train_idx.size(), ExampleBatch(dim));
        std::vector<std::size_t> loss(train_idx.size(), 0), states(train_idx.size(), 0);
        parallel_for(train_idx.size(), cfg.threads, [&](std::size_t k) {
            const std::size_t si = train_idx[k];
            const Scene& scene = corpus[si];
            seq_explore(scene, query, &current, opt, [&](const StateSnapshot& snap) {
                ++states[k];
                for (std::size_t i = 0; i < snap.candidates.size(); ++i) {
                    const Region& r = scene.region(snap.candidates[i]);
                    const int truth = r.gt_class == query ? 1 : 0;
                    const bool wrong = snap.predictions[i].label != truth;
                    loss[k] += wrong;
                    if (!mask.empty() && !mask[si][static_cast<std::size_t>(r.proposal_rank)]) continue;
                    batches[k].add(snap.features[i], truth, wrong ? cfg.mistake_weight : 1.0);
                }
            });
        });

        IterationDiagnostics diag;
        diag.iteration = it;
        diag.beta = beta;
        std::size_t total_loss = 0, total_states = 0;
        for (std::size_t k = 0; k < batches.size(); ++k) {
            aggregate.append(batches[k], it);
            diag.examples_added += batches[k].size();
            total_loss += loss[k];
            total_states += states[k];
        }
        diag.aggregate_size = aggregate.size();
        diag.mean_hamming = total_states ? static_cast<double>(total_loss) / static_cast<double>(total_states) : 0.0;

        current = train_cost_sensitive(aggregate, FeatureSchema::full, catalog, cfg.train);
        diag.validation_hamming = mean_rollout_hamming(current, validation, query, base, cfg.threads);
        result.iteration_policies.push_back(current);
        result.diagnostics.push_back(diag);
        if (diag.validation_hamming < best_loss) {
            best_loss = diag.validation_hamming;
            result.policy = current;
            result.selected_iteration = it;
        }
    }
    if (aggregate_out) *aggregate_out = aggregate;
    return result;
}

}  // namespace ctxsearch
