#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxsearch.hpp"

namespace ctxsearch::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kInternal = 4 };

namespace detail {

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Config text with `--set key=value` overrides applied (overrides replace file keys).
inline GenConfig load_config_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
    std::vector<std::string> lines;
    if (!path.empty()) {
        std::istringstream in(read_text(path));
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    std::string text;
    std::map<std::string, std::string> set;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError(o, "--set expects key=value");
        set[ctxsearch::detail::trim(o.substr(0, eq))] = o.substr(eq + 1);
    }
    for (const auto& line : lines) {
        std::string stripped = line;
        if (auto h = stripped.find('#'); h != std::string::npos) stripped.erase(h);
        const auto eq = stripped.find('=');
        if (eq != std::string::npos && set.count(ctxsearch::detail::trim(stripped.substr(0, eq)))) continue;
        text += line + "\n";
    }
    for (const auto& [k, v] : set) text += k + "=" + v + "\n";
    return parse_gen_config(text);
}

inline ClassId resolve_query(const ClassCatalog& catalog, const std::string& name) {
    if (!catalog.contains(name))
        throw LookupError("unknown query class '" + name + "'; catalog: " + catalog.joined());
    return catalog.find(name);
}

inline const ClassCatalog& corpus_catalog(const Corpus& corpus) {
    if (corpus.empty()) throw SchemaError("corpus is empty");
    for (const auto& s : corpus)
        if (!(s.catalog == corpus.front().catalog)) throw SchemaError("corpus scenes disagree on the class catalog");
    return corpus.front().catalog;
}

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write '" + path + "'");
    fn(out);
    if (!out) throw ArgumentError("failed writing '" + path + "'");
}

struct MatrixRows {
    std::vector<std::string> ids;
    Eigen::MatrixXd raw;
    std::vector<int> labels;
};

inline MatrixRows read_matrix_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot read '" + path + "'");
    MatrixRows m;
    std::vector<std::array<double, kUnaryDim>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = ctxsearch::detail::split(line, ',');
        if (line_no == 1 && cells.size() > 0 && cells[0] == "row_id") continue;
        if (cells.size() != kUnaryDim + 2)
            throw SchemaError("matrix line " + std::to_string(line_no) + ": expected " + std::to_string(kUnaryDim + 2) + " columns");
        std::array<double, kUnaryDim> r{};
        try {
            for (std::size_t f = 0; f < kUnaryDim; ++f) r[f] = ctxsearch::detail::parse_double("column", cells[f + 1]);
            const int label = ctxsearch::detail::parse_int("label", ctxsearch::detail::trim(cells.back()));
            if (label != 0 && label != 1) throw SchemaError("label must be 0 or 1");
            m.labels.push_back(label);
        } catch (const ConfigError& e) {
            throw SchemaError("matrix line " + std::to_string(line_no) + ": " + e.what());
        }
        m.ids.push_back(cells[0]);
        rows.push_back(r);
    }
    m.raw.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kUnaryDim));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t f = 0; f < kUnaryDim; ++f) m.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i][f];
    return m;
}

inline void write_matrix_csv(std::ostream& out, const MatrixRows& m) {
    std::ostringstream s;
    s.precision(17);
    s << "row_id,objectness_score,proposal_rank,mean_depth,mean_dist_back,min_height,max_height,label\n";
    for (std::size_t i = 0; i < m.ids.size(); ++i) {
        s << m.ids[i];
        for (std::size_t f = 0; f < kUnaryDim; ++f) s << ',' << m.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
        s << ',' << m.labels[i] << '\n';
    }
    out << s.str();
}

/// Subset-size argument: "doptimal" (5x the fixed rows) or "doptimal:K".
inline std::size_t subset_size(const std::string& choice, std::size_t n_fixed, std::size_t n_rows) {
    std::size_t k = 5 * n_fixed;
    if (choice.rfind("doptimal:", 0) == 0) {
        const int v = ctxsearch::detail::parse_int("--subset", choice.substr(9));
        if (v <= 0) throw ArgumentError("--subset size must be positive");
        k = static_cast<std::size_t>(v);
    } else if (choice != "doptimal") {
        throw ArgumentError("--subset expects none, doptimal or doptimal:K");
    }
    return std::min(std::max(k, n_fixed + kUnaryDim), n_rows);
}

inline SubsetResult run_subset(const Eigen::MatrixXd& raw, const std::vector<int>& labels, std::size_t k, int max_passes,
                               std::uint64_t seed, std::ostream& err) {
    SubsetProblem problem;
    problem.X = center_features(raw);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i]) problem.fixed_rows.push_back(i);
    problem.k = k;
    SubsetResult res = select_subset(problem, max_passes, seed);
    if (res.warning) err << "warning: " << *res.warning << '\n';
    return res;
}

}  // namespace detail

/// Runs one CLI invocation; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Context-guided sequential object search over synthetic region proposals"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // gen
    std::string gen_config, gen_out;
    std::vector<std::string> gen_set;
    int gen_n = -1;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic scene corpus (JSON lines)");
    gen->add_option("--config", gen_config, "Generator config (key=value text); built-in defaults when omitted");
    gen->add_option("--set", gen_set, "Override a config key (key=value); repeatable, wins over the file");
    gen->add_option("--n", gen_n, "Number of scenes (default: n_scenes from the config)");
    gen->add_option("--seed", gen_seed, "Corpus seed");
    gen->add_option("--out", gen_out, "Output corpus path")->required();

    // train
    std::string tr_corpus, tr_query, tr_out, tr_diag, tr_kind = "full", tr_subset = "none", tr_scope = "query";
    int tr_iterations = 3, tr_budget = 0, tr_validation = 5, tr_threads = default_thread_count(), tr_passes = 20;
    double tr_l2 = 1e-4, tr_beta0 = 0.0, tr_mistake = 1.0;
    std::uint64_t tr_seed = 0, tr_noise = 0;
    auto* train = app.add_subcommand("train", "Train a search policy (full) or a scene-context classifier (unary)");
    train->add_option("--corpus", tr_corpus, "Training corpus")->required();
    train->add_option("--query", tr_query, "Query class")->required();
    train->add_option("--kind", tr_kind, "full (DAgger search policy) or unary (scene-context classifier)")
        ->check(CLI::IsMember({"full", "unary"}));
    train->add_option("--iterations", tr_iterations, "DAgger iterations");
    train->add_option("--budget", tr_budget, "Exploration budget of training rollouts (default: top_k)");
    train->add_option("--subset", tr_subset, "Background subset selection: none, doptimal, doptimal:K");
    train->add_option("--subset-scope", tr_scope, "Fixed rows of the subset: query (query-class regions) or global (all objects)")
        ->check(CLI::IsMember({"query", "global"}));
    train->add_option("--subset-passes", tr_passes, "Row-exchange passes");
    train->add_option("--validation-every", tr_validation, "Hold out every k-th scene for policy selection (0: none)");
    train->add_option("--l2", tr_l2, "L2 regularization strength");
    train->add_option("--beta0", tr_beta0, "Oracle mixture base: iteration i follows the oracle w.p. beta0^(i-1)");
    train->add_option("--mistake-weight", tr_mistake, "Cost multiplier on examples the rollout policy mislabelled");
    train->add_option("--seed", tr_seed, "Seed for mixture rollouts and subset initialization");
    train->add_option("--noise-seed", tr_noise, "Detector noise stream");
    train->add_option("--threads", tr_threads, "Worker threads for scene-parallel phases");
    train->add_option("--out", tr_out, "Model output path")->required();
    train->add_option("--diagnostics", tr_diag, "Per-iteration diagnostics CSV (default: <out>.diagnostics.csv)");

    // search
    std::string se_model, se_corpus, se_query, se_out;
    int se_budget = 0, se_threads = default_thread_count();
    std::uint64_t se_noise = 0;
    bool se_no_skip = false;
    auto* search = app.add_subcommand("search", "Run sequential exploration and write one trace per scene");
    search->add_option("--model", se_model, "Full-schema model")->required();
    search->add_option("--corpus", se_corpus, "Corpus")->required();
    search->add_option("--query", se_query, "Query class")->required();
    search->add_option("--budget", se_budget, "Regions to explore per scene (default: top_k)");
    search->add_option("--noise-seed", se_noise, "Detector noise stream");
    search->add_flag("--no-background-skip", se_no_skip, "Rescore after every exploration");
    search->add_option("--threads", se_threads, "Worker threads");
    search->add_option("--out", se_out, "Trace output path (JSON lines)")->required();

    // eval
    std::string ev_corpus, ev_query, ev_model, ev_ctx_model, ev_out, ev_match = "region";
    std::vector<std::string> ev_methods = {"proposal_rank", "scene_context", "scene_plus_objects"};
    int ev_interval = 10, ev_threads = default_thread_count();
    std::uint64_t ev_noise = 0;
    auto* eval = app.add_subcommand("eval", "AP versus regions processed for each method (CSV)");
    eval->add_option("--corpus", ev_corpus, "Evaluation corpus")->required();
    eval->add_option("--query", ev_query, "Query class")->required();
    eval->add_option("--model", ev_model, "Full-schema model (scene_plus_objects)");
    eval->add_option("--context-model", ev_ctx_model, "Unary-schema model (scene_context)");
    eval->add_option("--methods", ev_methods, "Subset of proposal_rank,scene_context,scene_plus_objects")->delimiter(',');
    eval->add_option("--interval", ev_interval, "Budget spacing");
    eval->add_option("--match", ev_match, "Groundtruth matching: region or iou")->check(CLI::IsMember({"region", "iou"}));
    eval->add_option("--noise-seed", ev_noise, "Detector noise stream");
    eval->add_option("--threads", ev_threads, "Worker threads");
    eval->add_option("--out", ev_out, "Curve CSV path")->required();

    // subset
    std::string su_matrix, su_corpus, su_query, su_out, su_write_matrix, su_scope = "query";
    int su_k = 0, su_passes = 20;
    std::uint64_t su_seed = 0;
    auto* subset = app.add_subcommand("subset", "D-optimal background subset selection");
    subset->add_option("--matrix", su_matrix, "Feature matrix CSV (row_id, 6 unary columns, label)");
    subset->add_option("--corpus", su_corpus, "Build the matrix from a corpus instead");
    subset->add_option("--query", su_query, "Query class (with --corpus)");
    subset->add_option("--scope", su_scope, "Fixed rows: query or global (with --corpus)")->check(CLI::IsMember({"query", "global"}));
    subset->add_option("--write-matrix", su_write_matrix, "Also write the corpus-derived matrix CSV");
    subset->add_option("--k", su_k, "Subset size (default: 5x the labelled rows)");
    subset->add_option("--max-passes", su_passes, "Row-exchange passes");
    subset->add_option("--seed", su_seed, "Initialization seed");
    subset->add_option("--out", su_out, "Selected row ids, one per line")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) {
            GenConfig cfg = detail::load_config_with_overrides(gen_config, gen_set);
            const int n = gen_n < 0 ? cfg.n_scenes : gen_n;
            const Corpus corpus = generate_corpus(cfg, n, gen_seed);
            detail::write_file(gen_out, [&](std::ostream& o) { write_corpus(o, corpus); });
            out << "scenes: " << corpus.size() << '\n';
            for (std::size_t c = 0; c < cfg.n_classes(); ++c) {
                std::size_t scenes_with = 0, regions = 0;
                for (const auto& s : corpus) {
                    const std::size_t k = s.count_class(class_id(static_cast<int>(c)));
                    regions += k;
                    scenes_with += k > 0;
                }
                out << cfg.catalog.names()[c] << ": " << regions << " regions in " << scenes_with << " scenes\n";
            }
            return kOk;
        }

        if (*train) {
            const Corpus corpus = load_corpus(tr_corpus);
            const ClassCatalog& catalog = detail::corpus_catalog(corpus);
            const ClassId query = detail::resolve_query(catalog, tr_query);
            TrainConfig tc;
            tc.l2 = tr_l2;
            if (tr_kind == "unary") {
                const Policy p = train_scene_context(corpus, query, tc);
                save_policy(tr_out, p);
                out << "trained scene-context classifier for '" << tr_query << "'\n";
                return kOk;
            }
            ExampleMask mask;
            if (tr_subset != "none") {
                UnaryDesign design = build_unary_design(corpus, query);
                if (tr_scope == "global")
                    for (std::size_t i = 0; i < design.rows.size(); ++i)
                        design.labels[i] = corpus[design.rows[i].scene_index].regions[static_cast<std::size_t>(design.rows[i].proposal_rank)].gt_class !=
                                           ClassId::background;
                const auto n_fixed = static_cast<std::size_t>(std::count(design.labels.begin(), design.labels.end(), 1));
                const std::size_t k = detail::subset_size(tr_subset, n_fixed, design.labels.size());
                const SubsetResult sel = detail::run_subset(design.raw, design.labels, k, tr_passes, tr_seed, err);
                mask.assign(corpus.size(), {});
                for (std::size_t s = 0; s < corpus.size(); ++s) mask[s].assign(corpus[s].regions.size(), false);
                for (auto row : sel.selection) mask[design.rows[row].scene_index][static_cast<std::size_t>(design.rows[row].proposal_rank)] = true;
                out << "subset: " << sel.selection.size() << " of " << design.labels.size() << " regions, logdet " << sel.logdet << '\n';
            }
            DaggerConfig dc;
            dc.iterations = tr_iterations;
            dc.budget = tr_budget > 0 ? tr_budget : corpus_top_k(corpus);
            dc.validation_every = tr_validation;
            dc.beta0 = tr_beta0;
            dc.mistake_weight = tr_mistake;
            dc.seed = tr_seed;
            dc.noise_seed = tr_noise;
            dc.threads = tr_threads;
            dc.train = tc;
            const DaggerResult res = dagger_train(corpus, query, dc, mask);
            save_policy(tr_out, res.policy);
            const std::string diag_path = tr_diag.empty() ? tr_out + ".diagnostics.csv" : tr_diag;
            detail::write_file(diag_path, [&](std::ostream& o) { write_diagnostics_csv(o, res.diagnostics, res.selected_iteration); });
            out << "selected iteration " << res.selected_iteration << " of " << res.diagnostics.size() << '\n';
            return kOk;
        }

        if (*search) {
            const Policy policy = load_policy(se_model);
            const Corpus corpus = load_corpus(se_corpus);
            const ClassCatalog& catalog = detail::corpus_catalog(corpus);
            const ClassId query = detail::resolve_query(catalog, se_query);
            policy.check_schema(FeatureSchema::full, catalog);
            ExploreOptions opt;
            opt.budget = se_budget > 0 ? se_budget : corpus_top_k(corpus);
            opt.mode = ExploreMode::policy;
            opt.noise_seed = se_noise;
            opt.background_skip = !se_no_skip;
            const auto traces = explore_corpus(&policy, corpus, query, opt, se_threads);
            detail::write_file(se_out, [&](std::ostream& o) { write_traces(o, traces, catalog); });
            out << "wrote " << traces.size() << " traces\n";
            return kOk;
        }

        if (*eval) {
            std::vector<CurveMethod> methods;
            for (const auto& m : ev_methods) methods.push_back(parse_method(m));
            for (auto m : methods) {
                if (m == CurveMethod::scene_plus_objects && ev_model.empty())
                    throw ArgumentError("method scene_plus_objects needs --model");
                if (m == CurveMethod::scene_context && ev_ctx_model.empty())
                    throw ArgumentError("method scene_context needs --context-model");
            }
            const Corpus corpus = load_corpus(ev_corpus);
            const ClassCatalog& catalog = detail::corpus_catalog(corpus);
            const ClassId query = detail::resolve_query(catalog, ev_query);
            EvalOptions opt;
            opt.noise_seed = ev_noise;
            opt.threads = ev_threads;
            opt.match = ev_match == "iou" ? MatchMode::iou : MatchMode::region_id;
            const auto budgets = interval_budgets(ev_interval, corpus_top_k(corpus));
            std::vector<APCurve> curves;
            for (auto m : methods) {
                switch (m) {
                    case CurveMethod::proposal_rank: curves.push_back(curve_proposal_rank(corpus, query, budgets, opt)); break;
                    case CurveMethod::scene_context: {
                        const Policy p = load_policy(ev_ctx_model);
                        curves.push_back(curve_scene_context(p, corpus, query, budgets, opt));
                        break;
                    }
                    case CurveMethod::scene_plus_objects: {
                        const Policy p = load_policy(ev_model);
                        p.check_schema(FeatureSchema::full, catalog);
                        curves.push_back(curve_full_strategy(&p, corpus, query, budgets, opt));
                        break;
                    }
                }
            }
            detail::write_file(ev_out, [&](std::ostream& o) { write_curves_csv(o, curves, catalog); });
            out << "wrote " << curves.size() << " curves\n";
            return kOk;
        }

        if (*subset) {
            detail::MatrixRows m;
            if (!su_matrix.empty() == !su_corpus.empty()) throw ArgumentError("give exactly one of --matrix or --corpus");
            if (!su_matrix.empty()) {
                m = detail::read_matrix_csv(su_matrix);
            } else {
                const Corpus corpus = load_corpus(su_corpus);
                const ClassCatalog& catalog = detail::corpus_catalog(corpus);
                if (su_query.empty() && su_scope == "query") throw ArgumentError("--corpus with --scope query needs --query");
                const ClassId query = su_scope == "query" ? detail::resolve_query(catalog, su_query) : ClassId::background;
                const UnaryDesign design = build_unary_design(corpus, query);
                m.raw = design.raw;
                for (std::size_t i = 0; i < design.rows.size(); ++i) {
                    const Scene& s = corpus[design.rows[i].scene_index];
                    const Region& r = s.regions[static_cast<std::size_t>(design.rows[i].proposal_rank)];
                    m.ids.push_back(std::to_string(s.id) + ":" + std::to_string(r.id));
                    m.labels.push_back(su_scope == "query" ? design.labels[i] : (r.gt_class != ClassId::background ? 1 : 0));
                }
                if (!su_write_matrix.empty())
                    detail::write_file(su_write_matrix, [&](std::ostream& o) { detail::write_matrix_csv(o, m); });
            }
            const auto n_fixed = static_cast<std::size_t>(std::count(m.labels.begin(), m.labels.end(), 1));
            const std::size_t k = su_k > 0 ? static_cast<std::size_t>(su_k)
                                            : std::min(std::max(5 * n_fixed, n_fixed + kUnaryDim), m.labels.size());
            const SubsetResult res = detail::run_subset(m.raw, m.labels, k, su_passes, su_seed, err);
            detail::write_file(su_out, [&](std::ostream& o) {
                std::ostringstream s;
                s.precision(17);
                for (auto row : res.selection) s << m.ids[row] << '\n';
                s << "# logdet=" << res.logdet << " k=" << res.selection.size() << " exchanges=" << res.exchanges << '\n';
                o << s.str();
            });
            out << "selected " << res.selection.size() << " rows, logdet " << res.logdet << '\n';
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const ArgumentError& e) {
        err << "argument error: " << e.what() << '\n';
        return kUsage;
    } catch (const LookupError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const SchemaError& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DegenerateDataError& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}

}  // namespace ctxsearch::cli
