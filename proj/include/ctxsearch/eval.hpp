#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ctxsearch/error.hpp"
#include "ctxsearch/features.hpp"
#include "ctxsearch/parallel.hpp"
#include "ctxsearch/policy.hpp"
#include "ctxsearch/scene.hpp"
#include "ctxsearch/scene_sim.hpp"
#include "ctxsearch/search.hpp"

namespace ctxsearch {

enum class CurveMethod { proposal_rank, scene_context, scene_plus_objects };

inline const char* method_name(CurveMethod m) {
    switch (m) {
        case CurveMethod::proposal_rank: return "proposal_rank";
        case CurveMethod::scene_context: return "scene_context";
        case CurveMethod::scene_plus_objects: return "scene_plus_objects";
    }
    return "?";
}

inline CurveMethod parse_method(const std::string& s) {
    if (s == "proposal_rank") return CurveMethod::proposal_rank;
    if (s == "scene_context") return CurveMethod::scene_context;
    if (s == "scene_plus_objects") return CurveMethod::scene_plus_objects;
    throw ArgumentError("unknown method '" + s + "'");
}

/// How a detection is matched to groundtruth: by region identity (simulator
/// groundtruth lives at region granularity) or by box overlap.
enum class MatchMode { region_id, iou };

struct EvalOptions {
    MatchMode match = MatchMode::region_id;
    double match_iou = 0.5;
    std::uint64_t noise_seed = 0;
    int threads = 1;
};

struct ScoredDetection {
    double confidence = 0.0;
    bool true_positive = false;
    int scene_id = 0;
    int region_id = 0;
};

/// All-points interpolated average precision. Detections are ranked by confidence
/// (ties: scene id, then region id); `n_groundtruth` counts every positive in the
/// evaluation set, explored or not.
inline double average_precision(std::vector<ScoredDetection> dets, std::size_t n_groundtruth) {
    if (n_groundtruth == 0 || dets.empty()) return 0.0;
    std::sort(dets.begin(), dets.end(), [](const ScoredDetection& a, const ScoredDetection& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
        return a.region_id < b.region_id;
    });
    const std::size_t n = dets.size();
    std::vector<double> precision(n), recall(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tp += dets[i].true_positive;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n_groundtruth);
    }
    for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return std::clamp(ap, 0.0, 1.0);
}

/// Query-class detections of one scene's explored prefix, with true positives
/// resolved under `match`.
inline std::vector<ScoredDetection> score_detections(const Scene& scene, std::span<const Detection> explored, ClassId query,
                                                     const EvalOptions& opt = {}) {
    std::vector<ScoredDetection> out;
    for (const auto& d : explored)
        if (d.predicted_class == query) out.push_back({d.confidence, false, scene.id, d.region_id});
    if (opt.match == MatchMode::region_id) {
        for (auto& s : out) s.true_positive = scene.region(s.region_id).gt_class == query;
        return out;
    }
    std::vector<std::size_t> order(out.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return out[a].confidence > out[b].confidence; });
    std::vector<bool> used(scene.regions.size(), false);
    for (auto idx : order) {
        const BBox& box = scene.region(out[idx].region_id).bbox;
        double best = opt.match_iou;
        std::size_t best_gt = scene.regions.size();
        for (std::size_t g = 0; g < scene.regions.size(); ++g) {
            if (used[g] || scene.regions[g].gt_class != query) continue;
            const double o = iou(box, scene.regions[g].bbox);
            if (o >= best) {
                best = o;
                best_gt = g;
            }
        }
        if (best_gt < scene.regions.size()) {
            used[best_gt] = true;
            out[idx].true_positive = true;
        }
    }
    return out;
}

inline std::size_t count_groundtruth(const Corpus& corpus, ClassId query) {
    std::size_t n = 0;
    for (const auto& s : corpus) n += s.count_class(query);
    return n;
}

struct APCurve {
    CurveMethod method = CurveMethod::proposal_rank;
    ClassId query = ClassId::background;
    std::vector<std::pair<int, double>> points;  ///< (regions processed, AP)

    double at(int budget) const {
        for (const auto& [b, ap] : points)
            if (b == budget) return ap;
        throw LookupError("curve has no point at budget " + std::to_string(budget));
    }
};

/// interval, 2*interval, ... up to top_k (top_k itself is always the last point).
inline std::vector<int> interval_budgets(int interval, int top_k) {
    if (interval < 1) throw ArgumentError("interval must be >= 1");
    if (top_k < 1) throw ArgumentError("top_k must be >= 1");
    std::vector<int> out;
    for (int b = interval; b <= top_k; b += interval) out.push_back(b);
    if (out.empty() || out.back() != top_k) out.push_back(top_k);
    return out;
}

inline int corpus_top_k(const Corpus& corpus) {
    std::size_t k = 0;
    for (const auto& s : corpus) k = std::max(k, s.regions.size());
    return static_cast<int>(k);
}

/// Pooled AP after each budget, given each scene's detections in exploration order.
inline APCurve curve_from_detections(CurveMethod method, const Corpus& corpus,
                                     const std::vector<std::vector<Detection>>& per_scene, ClassId query,
                                     const std::vector<int>& budgets, const EvalOptions& opt = {}) {
    if (per_scene.size() != corpus.size()) throw ArgumentError("one detection sequence per scene required");
    APCurve curve{method, query, {}};
    const std::size_t n_gt = count_groundtruth(corpus, query);
    for (int b : budgets) {
        std::vector<ScoredDetection> pooled;
        for (std::size_t s = 0; s < corpus.size(); ++s) {
            const auto& seq = per_scene[s];
            const std::size_t len = std::min(seq.size(), static_cast<std::size_t>(std::max(b, 0)));
            auto dets = score_detections(corpus[s], std::span<const Detection>(seq.data(), len), query, opt);
            pooled.insert(pooled.end(), dets.begin(), dets.end());
        }
        curve.points.emplace_back(b, average_precision(std::move(pooled), n_gt));
    }
    return curve;
}

inline std::vector<std::vector<Detection>> detect_sequences(const Corpus& corpus,
                                                            const std::vector<std::vector<int>>& order,
                                                            const EvalOptions& opt) {
    std::vector<std::vector<Detection>> out(corpus.size());
    parallel_for(corpus.size(), opt.threads, [&](std::size_t s) {
        for (int id : order[s]) out[s].push_back(classify_region(corpus[s], id, opt.noise_seed));
    });
    return out;
}

/// Baseline: regions explored in proposal-rank order.
inline APCurve curve_proposal_rank(const Corpus& corpus, ClassId query, const std::vector<int>& budgets,
                                   const EvalOptions& opt = {}) {
    std::vector<std::vector<int>> order(corpus.size());
    for (std::size_t s = 0; s < corpus.size(); ++s)
        for (const auto& r : corpus[s].regions) order[s].push_back(r.id);
    return curve_from_detections(CurveMethod::proposal_rank, corpus, detect_sequences(corpus, order, opt), query, budgets, opt);
}

/// Region order from a unary-only classifier scored once per scene (ties: proposal rank).
inline std::vector<int> scene_context_order(const Policy& classifier, const Scene& scene) {
    classifier.check_schema(FeatureSchema::unary_only, scene.catalog);
    std::vector<std::pair<double, int>> scored;  // (belief, rank)
    for (const auto& r : scene.regions) scored.emplace_back(predict(classifier, unary_state_features(r)).belief, r.proposal_rank);
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> ids;
    for (const auto& [belief, rank] : scored) ids.push_back(scene.regions[static_cast<std::size_t>(rank)].id);
    return ids;
}

inline APCurve curve_scene_context(const Policy& classifier, const Corpus& corpus, ClassId query,
                                   const std::vector<int>& budgets, const EvalOptions& opt = {}) {
    std::vector<std::vector<int>> order(corpus.size());
    for (std::size_t s = 0; s < corpus.size(); ++s) order[s] = scene_context_order(classifier, corpus[s]);
    return curve_from_detections(CurveMethod::scene_context, corpus, detect_sequences(corpus, order, opt), query, budgets, opt);
}

inline std::vector<ExplorationTrace> explore_corpus(const Policy* policy, const Corpus& corpus, ClassId query,
                                                    const ExploreOptions& explore, int threads = 1) {
    std::vector<ExplorationTrace> traces(corpus.size());
    parallel_for(corpus.size(), threads,
                 [&](std::size_t s) { traces[s] = seq_explore(corpus[s], query, policy, explore); });
    return traces;
}

inline APCurve curve_from_traces(const Corpus& corpus, const std::vector<ExplorationTrace>& traces, ClassId query,
                                 const std::vector<int>& budgets, const EvalOptions& opt = {}) {
    if (traces.size() != corpus.size()) throw ArgumentError("one trace per scene required");
    std::vector<std::vector<Detection>> per_scene(corpus.size());
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        if (traces[s].scene_id != corpus[s].id || traces[s].query != query)
            throw ArgumentError("trace " + std::to_string(s) + " does not belong to scene " + std::to_string(corpus[s].id));
        for (const auto& step : traces[s].steps) per_scene[s].push_back(step.detection);
    }
    return curve_from_detections(CurveMethod::scene_plus_objects, corpus, per_scene, query, budgets, opt);
}

/// Full strategy: one sequential search per scene at the largest budget, truncated
/// to each smaller budget. A null policy runs the oracle.
inline APCurve curve_full_strategy(const Policy* policy, const Corpus& corpus, ClassId query, const std::vector<int>& budgets,
                                   const EvalOptions& opt = {}, ExploreOptions explore = {}) {
    if (budgets.empty()) throw ArgumentError("no budgets");
    explore.budget = *std::max_element(budgets.begin(), budgets.end());
    explore.mode = policy ? ExploreMode::policy : ExploreMode::oracle;
    explore.noise_seed = opt.noise_seed;
    return curve_from_traces(corpus, explore_corpus(policy, corpus, query, explore, opt.threads), query, budgets, opt);
}

/// Unary-only classifier for the scene-context baseline: every region of the
/// corpus is one example labelled by membership in `query`.
inline Policy train_scene_context(const Corpus& corpus, ClassId query, const TrainConfig& cfg = {}) {
    if (corpus.empty()) throw ArgumentError("train_scene_context: empty corpus");
    const ClassCatalog& catalog = corpus.front().catalog;
    DatasetAggregate data(feature_dim(FeatureSchema::unary_only, catalog.size()));
    ExampleBatch batch(data.dim());
    for (const auto& s : corpus) {
        if (!(s.catalog == catalog)) throw SchemaError("train_scene_context: scenes disagree on the class catalog");
        for (const auto& r : s.regions) batch.add(unary_state_features(r), r.gt_class == query ? 1 : 0);
    }
    data.append(batch, 1);
    return train_cost_sensitive(data, FeatureSchema::unary_only, catalog, cfg);
}

inline void write_curves_csv(std::ostream& out, const std::vector<APCurve>& curves, const ClassCatalog& catalog) {
    out << "method,query_class,regions_processed,ap\n";
    std::ostringstream line;
    line.precision(10);
    for (const auto& c : curves)
        for (const auto& [b, ap] : c.points) line << method_name(c.method) << ',' << catalog.name(c.query) << ',' << b << ',' << ap << '\n';
    out << line.str();
}

}  // namespace ctxsearch
