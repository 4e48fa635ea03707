#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ctxsearch/error.hpp"
#include "ctxsearch/geometry.hpp"
#include "ctxsearch/scene.hpp"

namespace ctxsearch {

inline constexpr std::size_t kUnaryDim = 6;
inline constexpr std::size_t kPairDim = 6;
inline constexpr double kDefaultNmsIou = 0.3;

/// objectness, proposal_rank, mean_depth, mean_dist_back, min_height, max_height
using UnaryFeatures = std::array<double, kUnaryDim>;
/// iou, size_ratio, centroid_distance, |d dist_back|, |d min_height|, |d max_height|
using PairFeatures = std::array<double, kPairDim>;
/// kPairDim slots per class, in catalog order.
using AggregateFeatures = std::vector<double>;
/// unary | aggregates | bias (full schema) or unary | bias (unary-only schema).
using StateFeatures = std::vector<double>;

enum class FeatureSchema { full, unary_only };

inline constexpr const char* kFeatureSchemaVersion = "ctxsearch-features/1";

inline const char* schema_name(FeatureSchema s) { return s == FeatureSchema::full ? "full" : "unary"; }

inline FeatureSchema parse_schema_name(const std::string& s) {
    if (s == "full") return FeatureSchema::full;
    if (s == "unary") return FeatureSchema::unary_only;
    throw SchemaError("unknown feature schema '" + s + "'");
}

inline std::size_t feature_dim(FeatureSchema schema, std::size_t n_classes) noexcept {
    return schema == FeatureSchema::full ? kUnaryDim + kPairDim * n_classes + 1 : kUnaryDim + 1;
}

struct ExploredRegion {
    Region region;
    Detection detection;
};

/// Per-scene constants the feature assembly needs: catalog size and the
/// "worst plausible" value used for classes with no explored instance.
struct FeatureContext {
    std::size_t n_classes = 0;
    PairFeatures sentinel{};

    static FeatureContext for_scene(const Scene& scene) {
        FeatureContext ctx;
        ctx.n_classes = scene.catalog.size();
        ctx.sentinel = {0.0,
                        0.0,
                        std::hypot(static_cast<double>(scene.image_width), static_cast<double>(scene.image_height)),
                        scene.room_depth,
                        scene.room_height,
                        scene.room_height};
        return ctx;
    }
};

inline UnaryFeatures unary_features(const Region& r) noexcept {
    return {r.objectness_score, static_cast<double>(r.proposal_rank), r.mean_depth, r.mean_dist_back, r.min_height,
            r.max_height};
}

/// Symmetric pairwise spatial features.
inline PairFeatures pair_features(const Region& a, const Region& b) {
    if (!a.bbox.valid() || !b.bbox.valid())
        throw ArgumentError("pair_features: degenerate bbox (region " + std::to_string(a.bbox.valid() ? b.id : a.id) + ")");
    const double area_a = a.bbox.area();
    const double area_b = b.bbox.area();
    return {iou(a.bbox, b.bbox),
            std::min(area_a, area_b) / std::max(area_a, area_b),
            centroid_distance(a.bbox, b.bbox),
            std::abs(a.mean_dist_back - b.mean_dist_back),
            std::abs(a.min_height - b.min_height),
            std::abs(a.max_height - b.max_height)};
}

/// Greedy per-class suppression. Surviving entries keep their original order;
/// background-labelled entries are never suppressed and never suppress.
inline std::vector<ExploredRegion> non_maximal_suppress(std::span<const ExploredRegion> explored,
                                                        double iou_threshold = kDefaultNmsIou) {
    std::vector<std::size_t> order(explored.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return explored[a].detection.confidence > explored[b].detection.confidence;
    });
    std::vector<bool> keep(explored.size(), true);
    std::vector<std::size_t> kept_so_far;
    for (std::size_t idx : order) {
        const auto& e = explored[idx];
        if (is_background(e.detection.predicted_class)) continue;
        for (std::size_t k : kept_so_far) {
            const auto& other = explored[k];
            if (other.detection.predicted_class == e.detection.predicted_class &&
                iou(other.region.bbox, e.region.bbox) > iou_threshold) {
                keep[idx] = false;
                break;
            }
        }
        if (keep[idx]) kept_so_far.push_back(idx);
    }
    std::vector<ExploredRegion> out;
    out.reserve(explored.size());
    for (std::size_t i = 0; i < explored.size(); ++i)
        if (keep[i]) out.push_back(explored[i]);
    return out;
}

/// Per-class element-wise minimum of pair_features(r, k) over kept regions
/// predicted as that class. Absent classes carry the sentinel.
inline AggregateFeatures aggregate_pair_features(const Region& r, std::span<const ExploredRegion> kept,
                                                 const FeatureContext& ctx) {
    AggregateFeatures agg(kPairDim * ctx.n_classes);
    std::vector<bool> populated(ctx.n_classes, false);
    for (std::size_t c = 0; c < ctx.n_classes; ++c)
        std::copy(ctx.sentinel.begin(), ctx.sentinel.end(), agg.begin() + static_cast<std::ptrdiff_t>(c * kPairDim));
    for (const auto& k : kept) {
        const ClassId label = k.detection.predicted_class;
        if (is_background(label)) continue;
        const auto c = static_cast<std::size_t>(to_index(label));
        if (c >= ctx.n_classes) throw LookupError("detection class out of catalog range");
        const PairFeatures pf = pair_features(r, k.region);
        double* slot = agg.data() + c * kPairDim;
        for (std::size_t f = 0; f < kPairDim; ++f) slot[f] = populated[c] ? std::min(slot[f], pf[f]) : pf[f];
        populated[c] = true;
    }
    return agg;
}

/// Features from an already-suppressed explored list. Lets a caller suppress once
/// and score many candidate regions against the same context.
inline StateFeatures state_features_from_kept(const Region& r, std::span<const ExploredRegion> kept,
                                              const FeatureContext& ctx) {
    StateFeatures f;
    f.reserve(feature_dim(FeatureSchema::full, ctx.n_classes));
    const UnaryFeatures u = unary_features(r);
    f.insert(f.end(), u.begin(), u.end());
    const AggregateFeatures agg = aggregate_pair_features(r, kept, ctx);
    f.insert(f.end(), agg.begin(), agg.end());
    f.push_back(1.0);
    return f;
}

inline StateFeatures assemble_state_features(const Region& r, std::span<const ExploredRegion> explored,
                                             const FeatureContext& ctx, double iou_threshold = kDefaultNmsIou) {
    const auto kept = non_maximal_suppress(explored, iou_threshold);
    return state_features_from_kept(r, kept, ctx);
}

inline StateFeatures unary_state_features(const Region& r) {
    const UnaryFeatures u = unary_features(r);
    StateFeatures f(u.begin(), u.end());
    f.push_back(1.0);
    return f;
}

}  // namespace ctxsearch
