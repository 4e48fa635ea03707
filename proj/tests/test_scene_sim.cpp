#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support/test_support.hpp"

using namespace ctxsearch;
using ctxsearch::testing::identity_confusion;

namespace {

GenConfig two_class_config(const std::string& extra) {
    return parse_gen_config("classes=bed,pillow,lamp,nightstand\nstructure=none\n" + extra);
}

}  // namespace

TEST(SceneSim, SameSeedSameScene) {
    const auto cfg = default_gen_config();
    const Scene a = generate_scene(cfg, 42);
    const Scene b = generate_scene(cfg, 42);
    EXPECT_EQ(a, b);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(SceneSim, DifferentSeedsDiffer) {
    const auto cfg = default_gen_config();
    EXPECT_NE(generate_corpus(cfg, 3, 7), generate_corpus(cfg, 3, 8));
}

TEST(SceneSim, CorpusSceneIsDerivedSeed) {
    const auto cfg = default_gen_config();
    const Corpus c = generate_corpus(cfg, 1, 7);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0], generate_scene(cfg, derive_seed(7, 0), 0));
}

TEST(SceneSim, CorpusIdsDistinct) {
    const Corpus c = generate_corpus(default_gen_config(), 100, 7);
    std::set<int> ids;
    for (const auto& s : c) ids.insert(s.id);
    EXPECT_EQ(ids.size(), 100u);
}

TEST(SceneSim, NonPositiveCorpusSizeRejected) {
    EXPECT_THROW(generate_corpus(default_gen_config(), 0, 7), ArgumentError);
    EXPECT_THROW(generate_corpus(default_gen_config(), -3, 7), ArgumentError);
}

TEST(SceneSim, RegionInvariants) {
    const auto cfg = default_gen_config();
    for (const auto& s : generate_corpus(cfg, 50, 3)) {
        ASSERT_LE(s.regions.size(), static_cast<std::size_t>(cfg.top_k));
        std::set<int> ids;
        for (std::size_t i = 0; i < s.regions.size(); ++i) {
            const Region& r = s.regions[i];
            EXPECT_EQ(r.proposal_rank, static_cast<int>(i));
            EXPECT_TRUE(r.bbox.valid());
            EXPECT_GE(r.bbox.x_min, 0.0);
            EXPECT_GE(r.bbox.y_min, 0.0);
            EXPECT_LE(r.bbox.x_max, s.image_width);
            EXPECT_LE(r.bbox.y_max, s.image_height);
            EXPECT_LE(r.min_height, r.max_height);
            EXPECT_GE(r.objectness_score, 0.0);
            EXPECT_LE(r.objectness_score, 1.0);
            ids.insert(r.id);
        }
        EXPECT_EQ(ids.size(), s.regions.size());
    }
}

TEST(SceneSim, CertainCooccurrenceAlwaysHolds) {
    auto cfg = default_gen_config();
    const auto bed = static_cast<std::size_t>(to_index(cfg.catalog.find("bed")));
    const auto pillow = static_cast<std::size_t>(to_index(cfg.catalog.find("pillow")));
    cfg.cooccur[bed][pillow] = 1.0;
    int with_bed = 0;
    for (const auto& s : generate_corpus(cfg, 1000, 11)) {
        if (s.count_class(class_id(static_cast<int>(bed))) == 0) continue;
        ++with_bed;
        EXPECT_GT(s.count_class(class_id(static_cast<int>(pillow))), 0u) << "scene " << s.id;
    }
    EXPECT_GT(with_bed, 100);
}

TEST(SceneSim, CooccurrenceRateMatchesConfig) {
    const auto cfg = two_class_config("presence.bed=0\npresence.pillow=0\npresence.lamp=1\npresence.nightstand=0\n"
                                      "cooccur.lamp.nightstand=0.8\n");
    const ClassId lamp = cfg.catalog.find("lamp"), nightstand = cfg.catalog.find("nightstand");
    int both = 0, with_lamp = 0;
    for (const auto& s : generate_corpus(cfg, 1000, 5)) {
        if (s.count_class(lamp) == 0) continue;
        ++with_lamp;
        both += s.count_class(nightstand) > 0;
    }
    ASSERT_EQ(with_lamp, 1000);
    const double rate = static_cast<double>(both) / with_lamp;
    EXPECT_GE(rate, 0.76);
    EXPECT_LE(rate, 0.84);
}

TEST(SceneSim, ProximityMeanRecovered) {
    const auto cfg = two_class_config("presence.bed=1\npresence.pillow=0\npresence.lamp=0\npresence.nightstand=0\n"
                                      "cooccur.bed.pillow=1\nproximity.bed.pillow.mean=60\nproximity.bed.pillow.spread=10\n"
                                      "class.bed.center_y=0.5\n");
    const ClassId bed = cfg.catalog.find("bed"), pillow = cfg.catalog.find("pillow");
    double sum = 0.0;
    int n = 0;
    for (const auto& s : generate_corpus(cfg, 1000, 9)) {
        const Region* b = nullptr;
        const Region* p = nullptr;
        for (const auto& r : s.regions) {
            if (r.gt_class == bed) b = &r;
            if (r.gt_class == pillow) p = &r;
        }
        ASSERT_TRUE(b && p);
        sum += centroid_distance(b->bbox, p->bbox);
        ++n;
    }
    const double mean = sum / n;
    const double three_sigma = 3.0 * 10.0 / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mean, 60.0, three_sigma);
}

TEST(SceneSim, ClassifyIsPure) {
    const Scene s = generate_scene(default_gen_config(), 13);
    for (const auto& r : s.regions) {
        EXPECT_EQ(classify_region(s, r.id), classify_region(s, r.id));
        EXPECT_EQ(classify_region(s, r.id, 4), classify_region(s, r.id, 4));
    }
}

TEST(SceneSim, NoiseSeedChangesDraws) {
    const Corpus c = generate_corpus(default_gen_config(), 5, 13);
    int differ = 0;
    for (const auto& s : c)
        for (const auto& r : s.regions) differ += !(classify_region(s, r.id, 0) == classify_region(s, r.id, 1));
    EXPECT_GT(differ, 0);
}

TEST(SceneSim, IdentityConfusionIsExact) {
    auto cfg = default_gen_config();
    cfg.noise.confusion = identity_confusion(cfg.n_classes());
    for (const auto& s : generate_corpus(cfg, 20, 17))
        for (const auto& r : s.regions) EXPECT_EQ(classify_region(s, r.id).predicted_class, r.gt_class);
}

TEST(SceneSim, ConfusionAccuracyMatches) {
    const auto cfg = two_class_config("presence.bed=1\nconfusion.bed.bed=0.9\nconfusion.bed.background=0.1\n");
    const ClassId bed = cfg.catalog.find("bed");
    int seen = 0, correct = 0;
    std::uint64_t seed = 100;
    while (seen < 1000) {
        const Scene s = generate_scene(cfg, seed++);
        for (const auto& r : s.regions) {
            if (r.gt_class != bed || seen >= 1000) continue;
            ++seen;
            correct += classify_region(s, r.id).predicted_class == bed;
        }
    }
    const double acc = correct / 1000.0;
    EXPECT_GE(acc, 0.87);
    EXPECT_LE(acc, 0.93);
}

TEST(SceneSim, UnknownRegionIsLookupError) {
    const Scene s = generate_scene(default_gen_config(), 1);
    EXPECT_THROW(classify_region(s, 100000), LookupError);
}

TEST(SceneSim, SplitByIndex) {
    const Corpus c = generate_corpus(default_gen_config(), 10, 1);
    const auto [train, held] = split_by_index(c, 5);
    ASSERT_EQ(held.size(), 2u);
    EXPECT_EQ(held[0].id, 4);
    EXPECT_EQ(held[1].id, 9);
    EXPECT_EQ(train.size(), 8u);
}
