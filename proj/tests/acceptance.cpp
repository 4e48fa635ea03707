// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "support/oracles.hpp"
#include "support/test_support.hpp"

namespace fs = std::filesystem;
using namespace ctxsearch;
using namespace ctxsearch::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int number, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0.0 && secs >= limit_s) {
        o.pass = false;
        o.detail += "; exceeded " + std::to_string(limit_s) + " s";
    }
    failures += !o.pass;
    std::printf("[%s] criterion %2d %-28s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", number, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// Shared by criteria 3 and 8: rollouts seen elsewhere in the run.
std::size_t bound_checked = 0, bound_violations = 0;

void check_bound(const Scene& s, const ExplorationTrace& t) {
    ++bound_checked;
    if (t.classification_calls > (t.non_background_explorations() + 1) * s.regions.size()) ++bound_violations;
}

struct PlantedRun {
    double full_25 = 0, full_100 = 0, prop_25 = 0, prop_100 = 0;
    DaggerResult dagger;
};

std::vector<PlantedRun> planted_runs;

}  // namespace

int main() {
    std::printf("ctxsearch acceptance run\n");

    report(1, "oracle-optimality", 10.0, [] {
        const Corpus c = generate_corpus(default_gen_config(), 500, 1001);
        std::size_t violations = 0, with_positives = 0;
        ExploreOptions opt;
        opt.mode = ExploreMode::oracle;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const Scene& s = c[i];
            const ClassId q = class_id(static_cast<int>(i % s.catalog.size()));
            opt.budget = static_cast<int>(s.regions.size());
            const auto t = seq_explore(s, q, nullptr, opt);
            with_positives += s.count_class(q) > 0;
            bool seen_negative = false;
            for (std::size_t k = 1; k < t.steps.size(); ++k) {
                const bool pos = s.region(t.steps[k].region_id).gt_class == q;
                if (!pos) seen_negative = true;
                else if (seen_negative) ++violations;
            }
        }
        return Outcome{violations == 0, fmt("500 scenes (%.0f with positives), %.0f ordering violations", static_cast<double>(with_positives),
                                            static_cast<double>(violations))};
    });

    report(2, "background-skip-equivalence", 0.0, [] {
        const auto cfg = default_gen_config();
        const Corpus c = generate_corpus(cfg, 500, 2002);
        const Corpus train = generate_corpus(cfg, 20, 2003);
        std::size_t compared = 0, mismatched = 0;
        for (const char* name : {"pillow", "chair", "lamp"}) {
            const ClassId q = cfg.catalog.find(name);
            DaggerConfig dc;
            dc.iterations = 1;
            dc.budget = 20;
            const Policy p = dagger_train(train, q, dc).policy;
            ExploreOptions on, off;
            off.background_skip = false;
            for (const auto& s : c) {
                on.budget = off.budget = static_cast<int>(s.regions.size());
                const auto a = seq_explore(s, q, &p, on), b = seq_explore(s, q, &p, off);
                check_bound(s, a);  // the bound is a property of the skipping search only
                ++compared;
                mismatched += !(a == b);
            }
        }
        return Outcome{mismatched == 0, fmt("%.0f trace pairs, %.0f differ", static_cast<double>(compared), static_cast<double>(mismatched))};
    });

    report(4, "planted-context-curve", 300.0, [] {
        const auto cfg = planted_context_config();
        const ClassId pillow = cfg.catalog.find("pillow");
        const int b_small = cfg.top_k / 4;
        PlantedRun mean;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const Corpus train = generate_corpus(cfg, 40, derive_seed(seed, 1));
            const Corpus test = generate_corpus(cfg, 50, derive_seed(seed, 2));
            DaggerConfig dc;
            dc.iterations = 3;
            dc.budget = b_small;
            dc.seed = seed;
            PlantedRun run;
            run.dagger = dagger_train(train, pillow, dc);
            ExploreOptions opt;
            opt.budget = cfg.top_k;
            const auto traces = explore_corpus(&run.dagger.policy, test, pillow, opt);
            for (std::size_t i = 0; i < test.size(); ++i) check_bound(test[i], traces[i]);
            const auto full = curve_from_traces(test, traces, pillow, {b_small, cfg.top_k});
            const auto prop = curve_proposal_rank(test, pillow, {b_small, cfg.top_k});
            run.full_25 = full.at(b_small);
            run.full_100 = full.at(cfg.top_k);
            run.prop_25 = prop.at(b_small);
            run.prop_100 = prop.at(cfg.top_k);
            mean.full_25 += run.full_25 / 5;
            mean.full_100 += run.full_100 / 5;
            mean.prop_25 += run.prop_25 / 5;
            mean.prop_100 += run.prop_100 / 5;
            planted_runs.push_back(std::move(run));
        }
        const bool ok = mean.full_25 >= 0.9 * mean.full_100 && mean.prop_25 <= 0.6 * mean.prop_100;
        return Outcome{ok, fmt("full AP@25/AP@100 = %.3f/%.3f (need >= 0.9x), proposal = %.3f/%.3f (need <= 0.6x)", mean.full_25,
                               mean.full_100, mean.prop_25, mean.prop_100)};
    });

    report(3, "complexity-bound", 0.0, [] {
        // every skipping rollout of criteria 2 and 4, plus policy and mixture rollouts here
        const auto cfg = default_gen_config();
        const Corpus c = generate_corpus(cfg, 100, 3003);
        Policy p = Policy::zero(FeatureSchema::full, cfg.catalog);
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n01(0.0, 1.0);
        for (auto& w : p.weights) w = n01(rng);
        for (const auto& s : c) {
            for (ExploreMode m : {ExploreMode::policy, ExploreMode::mixture}) {
                ExploreOptions opt;
                opt.mode = m;
                opt.beta = 0.5;
                opt.budget = static_cast<int>(s.regions.size());
                check_bound(s, seq_explore(s, cfg.catalog.find("table"), &p, opt));
            }
        }
        return Outcome{bound_checked > 0 && bound_violations == 0,
                       fmt("%.0f rollouts, %.0f exceed (k+1)*n", static_cast<double>(bound_checked), static_cast<double>(bound_violations))};
    });

    report(5, "scene-context-baseline", 120.0, [] {
        const auto cfg = unary_signature_config();
        const ClassId lamp = cfg.catalog.find("lamp");
        double min_gain = 1.0, sum_gain = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const Corpus train = generate_corpus(cfg, 40, derive_seed(seed, 11));
            const Corpus test = generate_corpus(cfg, 50, derive_seed(seed, 12));
            const Policy ctx = train_scene_context(train, lamp);
            const double gain = curve_scene_context(ctx, test, lamp, {20}).at(20) - curve_proposal_rank(test, lamp, {20}).at(20);
            min_gain = std::min(min_gain, gain);
            sum_gain += gain / 5;
        }
        return Outcome{min_gain >= 0.1, fmt("AP@20 gain over proposal rank: min %.3f, mean %.3f over 5 seeds (need >= 0.1)", min_gain,
                                            sum_gain)};
    });

    report(6, "doptimal-vs-exhaustive", 10.0, [] {
        std::mt19937_64 rng(6006);
        std::normal_distribution<double> n01(0.0, 1.0);
        int matched = 0;
        for (int t = 0; t < 100; ++t) {
            Eigen::MatrixXd raw(8, 2);
            for (Eigen::Index i = 0; i < 8; ++i)
                for (Eigen::Index j = 0; j < 2; ++j) raw(i, j) = n01(rng);
            const SubsetProblem prob{center_features(raw), {}, 4};
            const auto res = select_subset(prob, 20, static_cast<std::uint64_t>(t));
            matched += std::abs(res.logdet - exhaustive_best_logdet(prob.X, {}, 4)) <= 1e-9;
        }
        return Outcome{matched >= 95, fmt("%.0f/100 instances within 1e-9 of the exhaustive optimum (need >= 95)", matched)};
    });

    report(7, "rank-one-update-fidelity", 5.0, [] {
        std::mt19937_64 rng(7007);
        std::normal_distribution<double> n01(0.0, 1.0);
        double worst = 0.0;
        int failed = 0;
        for (int t = 0; t < 1000; ++t) {
            Eigen::MatrixXd r(10, 6);
            for (Eigen::Index i = 0; i < 10; ++i)
                for (Eigen::Index j = 0; j < 6; ++j) r(i, j) = n01(rng);
            const Eigen::MatrixXd cov = r.transpose() * r;
            Eigen::VectorXd a(6);
            for (Eigen::Index j = 0; j < 6; ++j) a[j] = n01(rng);
            const Eigen::VectorXd b = r.row(t % 10).transpose();
            const auto u = logdet_add_remove(cov, dense_logdet(cov), a, b);
            if (!u) {
                ++failed;
                continue;
            }
            const double dense = dense_logdet(cov + a * a.transpose() - b * b.transpose());
            worst = std::max(worst, std::abs(u->logdet - dense) / std::max(1.0, std::abs(dense)));
        }
        return Outcome{failed == 0 && worst <= 1e-8, fmt("1000 updates, worst relative logdet error %.2e, %.0f rejected", worst, failed)};
    });

    report(8, "dagger-sanity", 0.0, [] {
        if (planted_runs.size() != 5) return Outcome{false, "planted-context runs unavailable"};
        bool grows = true;
        double selected = 0.0, first = 0.0;
        for (const auto& run : planted_runs) {
            const auto& d = run.dagger.diagnostics;
            for (std::size_t i = 0; i < d.size(); ++i)
                grows &= d[i].examples_added > 0 && (i == 0 || d[i].aggregate_size > d[i - 1].aggregate_size);
            selected += d[static_cast<std::size_t>(run.dagger.selected_iteration - 1)].validation_hamming / 5;
            first += d[0].validation_hamming / 5;
        }
        return Outcome{grows && selected <= first,
                       std::string("aggregate strictly grows: ") + (grows ? "yes" : "no") +
                           fmt("; mean validation Hamming of returned policy %.4f vs iteration 1 %.4f", selected, first)};
    });

    report(9, "ap-vs-brute-force", 0.0, [] {
        std::mt19937_64 rng(9009);
        double worst = 0.0;
        int corpora = 0;
        for (int t = 0; t < 300; ++t) {
            auto cfg = parse_gen_config("classes=a,b,c\nstructure=none\ntop_k=6\nbackground.min=2\nbackground.max=6\n"
                                        "presence.a=0.7\npresence.b=0.5\npresence.c=0.5\ninstances.a=2\n"
                                        "classifier.accuracy=0.6\nclassifier.background_accuracy=0.7\n");
            const int n_scenes = 1 + static_cast<int>(rng() % 3);
            const Corpus c = generate_corpus(cfg, n_scenes, rng());
            const ClassId q = class_id(static_cast<int>(rng() % 3));
            std::size_t n_gt = 0, regions = 0;
            for (const auto& s : c) {
                regions += s.regions.size();
                for (const auto& r : s.regions) n_gt += r.gt_class == q;
            }
            if (regions > 20) continue;
            ++corpora;
            std::vector<int> budgets{1, 2, 3, 4, 5, 6};
            const auto curve = curve_proposal_rank(c, q, budgets);
            for (int b : budgets) {
                std::vector<ScoredDetection> pooled;
                for (const auto& s : c)
                    for (std::size_t i = 0; i < s.regions.size() && static_cast<int>(i) < b; ++i) {
                        const Detection d = classify_region(s, s.regions[i].id);
                        if (d.predicted_class == q)
                            pooled.push_back({d.confidence, s.regions[i].gt_class == q, s.id, d.region_id});
                    }
                worst = std::max(worst, std::abs(curve.at(b) - brute_force_ap(pooled, n_gt)));
            }
        }
        return Outcome{corpora >= 100 && worst <= 1e-12,
                       fmt("%.0f toy corpora x 6 budgets, worst |AP - brute force| = %.2e", corpora, worst)};
    });

    report(10, "cli-determinism", 0.0, [] {
        const fs::path dir = fs::temp_directory_path() / "ctxsearch_acceptance_determinism";
        fs::remove_all(dir);
        fs::create_directories(dir);
        const std::string bin = CTXSEARCH_CLI_PATH;
        const std::string cfg = config_path("planted_context.cfg");
        auto slurp = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream s;
            s << in.rdbuf();
            return s.str();
        };
        std::vector<std::string> names{"train.jsonl", "test.jsonl", "model.json", "model.json.diagnostics.csv", "ctx.json",
                                       "traces.jsonl", "curves.csv"};
        std::vector<std::string> first;
        for (int round = 0; round < 2; ++round) {
            const fs::path d = dir / std::to_string(round);
            fs::create_directories(d);
            auto p = [&](const std::string& n) { return (d / n).string(); };
            const std::vector<std::string> cmds{
                "gen --config " + cfg + " --n 20 --seed 5 --out " + p("train.jsonl"),
                "gen --config " + cfg + " --n 10 --seed 6 --out " + p("test.jsonl"),
                "train --corpus " + p("train.jsonl") + " --query pillow --iterations 2 --budget 20 --seed 3 --subset doptimal --out " +
                    p("model.json"),
                "train --corpus " + p("train.jsonl") + " --query pillow --kind unary --out " + p("ctx.json"),
                "search --model " + p("model.json") + " --corpus " + p("test.jsonl") + " --query pillow --budget 40 --out " +
                    p("traces.jsonl"),
                "eval --corpus " + p("test.jsonl") + " --query pillow --model " + p("model.json") + " --context-model " +
                    p("ctx.json") + " --out " + p("curves.csv")};
            for (const auto& c : cmds)
                if (std::system((bin + " " + c + " > /dev/null 2>&1").c_str()) != 0)
                    return Outcome{false, "command failed: ctxsearch " + c};
            for (std::size_t i = 0; i < names.size(); ++i) {
                const std::string bytes = slurp(d / names[i]);
                if (bytes.empty()) return Outcome{false, "empty output " + names[i]};
                if (round == 0)
                    first.push_back(bytes);
                else if (bytes != first[i])
                    return Outcome{false, names[i] + " differs between runs"};
            }
        }
        fs::remove_all(dir);
        return Outcome{true, "gen, train (full + unary), search, eval outputs byte-identical across reruns"};
    });

    std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
