#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ctxsearch/error.hpp"
#include "ctxsearch/features.hpp"
#include "ctxsearch/policy.hpp"
#include "ctxsearch/random.hpp"
#include "ctxsearch/scene.hpp"
#include "ctxsearch/scene_sim.hpp"

namespace ctxsearch {

/// Who picks the next region: the learned policy, the groundtruth oracle, or a
/// per-step coin flip between them (oracle with probability beta).
enum class ExploreMode { policy, oracle, mixture };

struct ExploreOptions {
    int budget = 100;
    ExploreMode mode = ExploreMode::policy;
    double beta = 0.0;
    bool background_skip = true;
    std::uint64_t noise_seed = 0;
    std::uint64_t mixture_seed = 0;
    double iou_threshold = kDefaultNmsIou;
};

/// Explored list and unexplored set at step t.
struct SearchState {
    std::vector<ExploredRegion> explored;
    std::vector<int> unexplored;  ///< region ids in proposal-rank order
    int step = 0;
    std::size_t classification_calls = 0;  ///< classify_step evaluations
    std::size_t detector_calls = 0;        ///< classify_region evaluations
    std::size_t rescoring_events = 0;
};

struct TraceStep {
    int region_id = 0;
    std::optional<double> belief;  ///< score that selected this region; empty for the forced first step
    Detection detection;
};

struct ExplorationTrace {
    int scene_id = 0;
    ClassId query = ClassId::background;
    std::vector<TraceStep> steps;
    std::size_t classification_calls = 0;
    std::size_t rescoring_events = 0;

    std::size_t non_background_explorations() const {
        return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const TraceStep& s) {
            return !is_background(s.detection.predicted_class);
        }));
    }

    friend bool operator==(const ExplorationTrace& a, const ExplorationTrace& b) {
        if (a.scene_id != b.scene_id || a.query != b.query || a.steps.size() != b.steps.size()) return false;
        for (std::size_t i = 0; i < a.steps.size(); ++i)
            if (a.steps[i].region_id != b.steps[i].region_id || a.steps[i].belief != b.steps[i].belief ||
                !(a.steps[i].detection == b.steps[i].detection))
                return false;
        return true;
    }
};

/// What an observer sees at each visited state, after the context has been scored
/// and before the next region is chosen.
struct StateSnapshot {
    const Scene& scene;
    const SearchState& state;
    ClassId query;
    std::span<const int> candidates;                  ///< unexplored ids
    std::span<const StateFeatures> features;          ///< per candidate
    std::span<const Prediction> predictions;          ///< per candidate (policy)
};

using StateObserver = std::function<void(const StateSnapshot&)>;

inline double oracle_belief(const Region& r, ClassId query) noexcept { return r.gt_class == query ? 1.0 : 0.0; }

struct ClassifyResult {
    double belief = 0.0;
    int label = 0;
    std::optional<int> loss;  ///< 0/1 disagreement with the oracle label, in training mode
};

/// Scores one unexplored region against the current explored list.
inline ClassifyResult classify_step(const Region& candidate, const SearchState& state, const Policy& policy,
                                    const Scene& scene, ClassId query, bool training = false,
                                    double iou_threshold = kDefaultNmsIou) {
    const auto ctx = FeatureContext::for_scene(scene);
    const Prediction p = predict(policy, assemble_state_features(candidate, state.explored, ctx, iou_threshold));
    ClassifyResult out{p.belief, p.label, std::nullopt};
    if (training) out.loss = (p.label != static_cast<int>(oracle_belief(candidate, query))) ? 1 : 0;
    return out;
}

/// Sequential exploration of one scene. The rank-0 proposal is always explored
/// first; after each exploration every unexplored region is rescored and the
/// highest belief (lowest rank on ties) is explored next. With background_skip a
/// region detected as background leaves the previous scores in place.
///
/// `policy` may be null only in oracle mode.
inline ExplorationTrace seq_explore(const Scene& scene, ClassId query, const Policy* policy,
                                    const ExploreOptions& opt, const StateObserver& observer = {},
                                    SearchState* final_state = nullptr) {
    if (opt.budget < 1) throw ArgumentError("exploration budget must be >= 1, got " + std::to_string(opt.budget));
    if (opt.mode != ExploreMode::oracle && policy == nullptr)
        throw ArgumentError("policy and mixture exploration need a policy");
    if (policy) policy->check_schema(FeatureSchema::full, scene.catalog);

    ExplorationTrace trace;
    trace.scene_id = scene.id;
    trace.query = query;
    if (scene.regions.empty()) return trace;

    const auto ctx = FeatureContext::for_scene(scene);
    const bool want_features = policy != nullptr || static_cast<bool>(observer);
    Rng mixture_rng(derive_seed(opt.mixture_seed, static_cast<std::uint64_t>(scene.id)));

    SearchState state;
    state.unexplored.reserve(scene.regions.size());
    for (std::size_t i = 1; i < scene.regions.size(); ++i) state.unexplored.push_back(scene.regions[i].id);

    // scores aligned with state.unexplored
    std::vector<StateFeatures> features;
    std::vector<Prediction> predictions;
    std::vector<double> oracle;
    bool have_scores = false;

    std::optional<int> current = scene.regions.front().id;
    std::optional<double> current_belief;

    while (state.step < opt.budget && current) {
        const Region& region = scene.region(*current);
        const Detection det = classify_region(scene, region.id, opt.noise_seed);
        ++state.detector_calls;
        state.explored.push_back({region, det});
        trace.steps.push_back({region.id, current_belief, det});
        ++state.step;
        current.reset();

        if (state.step >= opt.budget || state.unexplored.empty()) break;

        const bool rescore = !have_scores || !opt.background_skip || !is_background(det.predicted_class);
        if (rescore) {
            ++state.rescoring_events;
            const std::size_t m = state.unexplored.size();
            features.assign(want_features ? m : 0, {});
            predictions.assign(policy ? m : 0, {});
            oracle.resize(m);
            std::vector<ExploredRegion> kept;
            if (want_features) kept = non_maximal_suppress(state.explored, opt.iou_threshold);
            for (std::size_t i = 0; i < m; ++i) {
                const Region& cand = scene.region(state.unexplored[i]);
                oracle[i] = oracle_belief(cand, query);
                if (want_features) features[i] = state_features_from_kept(cand, kept, ctx);
                if (policy) predictions[i] = predict(*policy, features[i]);
                ++state.classification_calls;
            }
            have_scores = true;
        }

        if (observer) observer(StateSnapshot{scene, state, query, state.unexplored, features, predictions});

        bool follow_oracle = opt.mode == ExploreMode::oracle;
        if (opt.mode == ExploreMode::mixture) follow_oracle = bernoulli(mixture_rng, opt.beta);

        // unexplored is rank-ordered, so a strict comparison keeps the lowest rank on ties
        std::size_t best = 0;
        auto score = [&](std::size_t i) { return follow_oracle ? oracle[i] : predictions[i].belief; };
        for (std::size_t i = 1; i < state.unexplored.size(); ++i)
            if (score(i) > score(best)) best = i;

        current = state.unexplored[best];
        current_belief = score(best);
        const auto at = static_cast<std::ptrdiff_t>(best);
        state.unexplored.erase(state.unexplored.begin() + at);
        oracle.erase(oracle.begin() + at);
        if (!features.empty()) features.erase(features.begin() + at);
        if (!predictions.empty()) predictions.erase(predictions.begin() + at);
    }

    trace.classification_calls = state.classification_calls;
    trace.rescoring_events = state.rescoring_events;
    if (final_state) *final_state = std::move(state);
    return trace;
}

}  // namespace ctxsearch
