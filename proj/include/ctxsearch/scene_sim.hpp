#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <numbers>
#include <utility>
#include <vector>

#include "ctxsearch/gen_config.hpp"
#include "ctxsearch/random.hpp"
#include "ctxsearch/scene.hpp"

namespace ctxsearch {

namespace detail {

struct PlacedObject {
    std::size_t cls;
    double cx;
    double cy;
};

/// Box of the requested size centred at (cx, cy), shrunk symmetrically so it stays
/// inside the image. The centroid is preserved exactly.
inline BBox box_around(double cx, double cy, double w, double h, int width, int height) {
    const double hw = std::max(1.0, std::min({0.5 * w, cx, width - cx}));
    const double hh = std::max(1.0, std::min({0.5 * h, cy, height - cy}));
    return {cx - hw, cy - hh, cx + hw, cy + hh};
}

inline std::vector<std::size_t> draw_present_classes(const GenConfig& cfg, Rng& rng) {
    const std::size_t n = cfg.n_classes();
    std::vector<bool> present(n, false);
    std::deque<std::size_t> work;
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < n; ++c) {
        if (bernoulli(rng, cfg.profiles[c].presence)) {
            present[c] = true;
            work.push_back(c);
        }
    }
    while (!work.empty()) {
        const std::size_t a = work.front();
        work.pop_front();
        order.push_back(a);
        for (std::size_t b = 0; b < n; ++b) {
            if (present[b] || cfg.cooccur[a][b] <= 0.0) continue;
            if (bernoulli(rng, cfg.cooccur[a][b])) {
                present[b] = true;
                work.push_back(b);
            }
        }
    }
    return order;
}

}  // namespace detail

/// Samples one scene. Deterministic in (cfg, seed); `id` only labels the result.
inline Scene generate_scene(const GenConfig& cfg, std::uint64_t seed, int id = 0) {
    validate(cfg);
    Rng rng(seed);
    const double W = cfg.image_width;
    const double H = cfg.image_height;

    Scene scene;
    scene.id = id;
    scene.image_width = cfg.image_width;
    scene.image_height = cfg.image_height;
    scene.room_depth = cfg.room_depth;
    scene.room_height = cfg.room_height;
    scene.seed = seed;
    scene.catalog = cfg.catalog;
    scene.noise = cfg.noise;

    std::vector<Region> pool;
    std::vector<detail::PlacedObject> placed;

    for (std::size_t c : detail::draw_present_classes(cfg, rng)) {
        const ClassProfile& prof = cfg.profiles[c];
        for (int inst = 0; inst < prof.instances; ++inst) {
            const double w = std::min(0.9 * W, prof.width * std::exp(normal(rng, 0.0, 0.15)));
            const double h = std::min(0.9 * H, prof.height * std::exp(normal(rng, 0.0, 0.15)));

            const detail::PlacedObject* anchor = nullptr;
            for (const auto& p : placed) {
                if (cfg.proximity[p.cls][c]) {
                    anchor = &p;
                    break;
                }
            }
            double cx = 0.0, cy = 0.0;
            if (anchor) {
                const Proximity& pr = *cfg.proximity[anchor->cls][c];
                const double dist = std::max(0.0, normal(rng, pr.mean, pr.spread));
                bool inside = false;
                for (int tries = 0; tries < 16 && !inside; ++tries) {
                    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
                    cx = anchor->cx + dist * std::cos(angle);
                    cy = anchor->cy + dist * std::sin(angle);
                    inside = cx >= 2.0 && cx <= W - 2.0 && cy >= 2.0 && cy <= H - 2.0;
                }
                cx = std::clamp(cx, 2.0, W - 2.0);
                cy = std::clamp(cy, 2.0, H - 2.0);
            } else {
                cx = uniform(rng, std::min(0.5 * w, 0.5 * W), std::max(W - 0.5 * w, 0.5 * W));
                cy = std::clamp(normal(rng, prof.center_y * H, 0.08 * H), 2.0, H - 2.0);
            }
            placed.push_back({c, cx, cy});

            Region r;
            r.bbox = detail::box_around(cx, cy, w, h, cfg.image_width, cfg.image_height);
            r.objectness_score = std::clamp(normal(rng, prof.objectness, cfg.objectness_sd), 0.0, 1.0);
            r.mean_depth = std::clamp(normal(rng, prof.depth, 0.3), 0.3, cfg.room_depth);
            r.mean_dist_back = std::max(0.0, cfg.room_depth - r.mean_depth + normal(rng, 0.0, 0.15));
            r.min_height = std::max(0.0, normal(rng, prof.min_height, 0.05));
            r.max_height = std::max(r.min_height + 0.05, normal(rng, prof.max_height, 0.08));
            r.gt_class = class_id(static_cast<int>(c));
            pool.push_back(r);
        }
    }
    if (pool.size() > static_cast<std::size_t>(cfg.top_k)) pool.resize(static_cast<std::size_t>(cfg.top_k));

    const int room = cfg.top_k - static_cast<int>(pool.size());
    int n_bg = std::uniform_int_distribution<int>(cfg.background_min, cfg.background_max)(rng);
    n_bg = std::clamp(n_bg, 0, room);
    for (int i = 0; i < n_bg; ++i) {
        const double w = uniform(rng, 20.0, std::max(21.0, 0.5 * W));
        const double h = uniform(rng, 20.0, std::max(21.0, 0.5 * H));
        const double cx = uniform(rng, 0.5 * std::min(w, W), W - 0.5 * std::min(w, W));
        const double cy = uniform(rng, 0.5 * std::min(h, H), H - 0.5 * std::min(h, H));
        Region r;
        r.bbox = detail::box_around(cx, cy, w, h, cfg.image_width, cfg.image_height);
        r.objectness_score = std::clamp(normal(rng, cfg.background_objectness, cfg.objectness_sd), 0.0, 1.0);
        r.mean_depth = uniform(rng, 0.5, cfg.room_depth);
        r.mean_dist_back = std::max(0.0, cfg.room_depth - r.mean_depth + normal(rng, 0.0, 0.15));
        r.min_height = uniform(rng, 0.0, 0.7 * cfg.room_height);
        r.max_height = std::min(cfg.room_height, r.min_height + uniform(rng, 0.05, 0.6 * cfg.room_height));
        r.gt_class = ClassId::background;
        pool.push_back(r);
    }

    // Proposal order: noisy descending objectness.
    std::vector<double> key(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) key[i] = pool[i].objectness_score + normal(rng, 0.0, cfg.rank_noise);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });

    std::vector<int> ids(pool.size());
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = ids.size(); i > 1; --i) {
        const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(ids[i - 1], ids[j]);
    }

    scene.regions.reserve(pool.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        Region r = pool[order[rank]];
        r.proposal_rank = static_cast<int>(rank);
        r.id = ids[rank];
        scene.regions.push_back(r);
    }
    return scene;
}

/// `n` scenes; scene i uses seed derive_seed(seed, i) and id i.
inline Corpus generate_corpus(const GenConfig& cfg, int n, std::uint64_t seed) {
    if (n <= 0) throw ArgumentError("corpus size must be positive, got " + std::to_string(n));
    validate(cfg);
    Corpus corpus;
    corpus.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) corpus.push_back(generate_scene(cfg, derive_seed(seed, static_cast<std::uint64_t>(i)), i));
    return corpus;
}

/// Splits by index: every `held_every`-th scene (indices held_every-1, 2*held_every-1, ...)
/// goes to the second list.
inline std::pair<Corpus, Corpus> split_by_index(const Corpus& corpus, int held_every) {
    if (held_every < 2) throw ArgumentError("held_every must be >= 2");
    std::pair<Corpus, Corpus> out;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        (static_cast<int>(i % static_cast<std::size_t>(held_every)) == held_every - 1 ? out.second : out.first)
            .push_back(corpus[i]);
    return out;
}

/// Simulated region classifier: samples the prediction from the confusion row of the
/// region's groundtruth. Pure in (scene, region_id, noise_seed).
inline Detection classify_region(const Scene& scene, int region_id, std::uint64_t noise_seed = 0) {
    const Region& region = scene.region(region_id);
    const std::size_t n = scene.catalog.size();
    const auto& row = scene.noise.confusion.at(confusion_index(region.gt_class, n));

    Rng rng(derive_seed(scene.seed, {0x5eedc1a5ULL, static_cast<std::uint64_t>(region_id), noise_seed}));
    const double u = uniform(rng, 0.0, 1.0);
    std::size_t pick = n;
    double acc = 0.0;
    bool chosen = false;
    for (std::size_t c = 0; c <= n; ++c) {
        acc += row[c];
        if (u < acc) {
            pick = c;
            chosen = true;
            break;
        }
    }
    if (!chosen) {
        // rounding left u above the cumulative sum: take the last nonzero entry
        for (std::size_t c = n + 1; c-- > 0;)
            if (row[c] > 0.0) {
                pick = c;
                break;
            }
    }
    Detection d;
    d.region_id = region_id;
    d.predicted_class = pick == n ? ClassId::background : class_id(static_cast<int>(pick));
    const auto& cm = scene.noise.confidence;
    const bool correct = d.predicted_class == region.gt_class;
    d.confidence = std::clamp(correct ? normal(rng, cm.correct_mean, cm.correct_sd) : normal(rng, cm.wrong_mean, cm.wrong_sd),
                              0.0, 1.0);
    return d;
}

}  // namespace ctxsearch
