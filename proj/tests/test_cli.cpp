#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support/test_support.hpp"

namespace fs = std::filesystem;
using namespace ctxsearch;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("ctxsearch_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "ctxsearch");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        out_.str("");
        err_.str("");
        return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static std::vector<std::string> lines(const std::string& p) {
        std::ifstream in(p);
        std::vector<std::string> out;
        for (std::string l; std::getline(in, l);)
            if (!l.empty()) out.push_back(l);
        return out;
    }

    void make_planted(const std::string& name, int n, int seed) {
        ASSERT_EQ(run({"gen", "--config", ctxsearch::testing::config_path("planted_context.cfg"), "--n", std::to_string(n),
                       "--seed", std::to_string(seed), "--out", path(name)}),
                  0)
            << err_.str();
    }

    void train_quick(const std::string& corpus, const std::string& model, const std::string& kind = "full") {
        ASSERT_EQ(run({"train", "--corpus", path(corpus), "--query", "pillow", "--kind", kind, "--iterations", "2",
                       "--budget", "15", "--out", path(model)}),
                  0)
            << err_.str();
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

}  // namespace

TEST_F(Cli, GenWritesOneScenePerLine) {
    ASSERT_EQ(run({"gen", "--n", "10", "--seed", "1", "--out", path("c.jsonl")}), 0) << err_.str();
    EXPECT_EQ(lines(path("c.jsonl")).size(), 10u);
}

TEST_F(Cli, GenIsByteDeterministic) {
    ASSERT_EQ(run({"gen", "--n", "5", "--seed", "3", "--out", path("a.jsonl")}), 0);
    ASSERT_EQ(run({"gen", "--n", "5", "--seed", "3", "--out", path("b.jsonl")}), 0);
    EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
    ASSERT_EQ(run({"gen", "--n", "5", "--seed", "4", "--out", path("c.jsonl")}), 0);
    EXPECT_NE(slurp(path("a.jsonl")), slurp(path("c.jsonl")));
}

TEST_F(Cli, GenOverridesWinOverFile) {
    ASSERT_EQ(run({"gen", "--config", ctxsearch::testing::config_path("default.cfg"), "--set", "top_k=20", "--set",
                   "background.min=20", "--set", "background.max=20", "--n", "2", "--out", path("c.jsonl")}),
              0)
        << err_.str();
    for (const auto& s : load_corpus(path("c.jsonl"))) EXPECT_EQ(s.regions.size(), 20u);
}

TEST_F(Cli, GenUsageErrors) {
    EXPECT_EQ(run({"gen", "--n", "0", "--out", path("c.jsonl")}), 2);
    EXPECT_EQ(run({"gen", "--set", "presence.bed=2", "--out", path("c.jsonl")}), 2);
    EXPECT_NE(err_.str().find("presence.bed"), std::string::npos);
    EXPECT_EQ(run({"gen", "--config", path("missing.cfg"), "--out", path("c.jsonl")}), 2);
    EXPECT_EQ(run({"frobnicate"}), 2);
}

TEST_F(Cli, TrainSearchEvalPipeline) {
    make_planted("train.jsonl", 15, 1);
    make_planted("test.jsonl", 8, 2);
    train_quick("train.jsonl", "full.json");
    train_quick("train.jsonl", "ctx.json", "unary");
    EXPECT_EQ(lines(path("full.json.diagnostics.csv")).size(), 3u);  // header + 2 iterations

    ASSERT_EQ(run({"search", "--model", path("full.json"), "--corpus", path("test.jsonl"), "--query", "pillow", "--budget",
                   "1", "--out", path("t1.jsonl")}),
              0)
        << err_.str();
    const Corpus test = load_corpus(path("test.jsonl"));
    for (const auto& t : read_traces(*std::make_unique<std::ifstream>(path("t1.jsonl")), test[0].catalog)) {
        ASSERT_EQ(t.steps.size(), 1u);
        EXPECT_EQ(t.steps[0].region_id, test[static_cast<std::size_t>(t.scene_id)].regions[0].id);
    }

    ASSERT_EQ(run({"search", "--model", path("full.json"), "--corpus", path("test.jsonl"), "--query", "pillow", "--out",
                   path("t.jsonl")}),
              0);
    std::ifstream tin(path("t.jsonl"));
    const auto traces = read_traces(tin, test[0].catalog);
    ASSERT_EQ(traces.size(), test.size());
    for (std::size_t i = 0; i < traces.size(); ++i) EXPECT_EQ(traces[i].steps.size(), test[i].regions.size());

    ASSERT_EQ(run({"eval", "--corpus", path("test.jsonl"), "--query", "pillow", "--model", path("full.json"),
                   "--context-model", path("ctx.json"), "--out", path("curves.csv")}),
              0)
        << err_.str();
    const auto rows = lines(path("curves.csv"));
    ASSERT_EQ(rows.size(), 31u);
    EXPECT_EQ(rows[0], "method,query_class,regions_processed,ap");
    for (const char* m : {"proposal_rank", "scene_context", "scene_plus_objects"})
        EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [&](const std::string& r) { return r.rfind(std::string(m) + ",", 0) == 0; }), 10);

    // replaying the saved traces reproduces the evaluated curve
    const auto replay = curve_from_traces(test, traces, test[0].catalog.find("pillow"), interval_budgets(10, 100));
    std::ostringstream csv;
    write_curves_csv(csv, {replay}, test[0].catalog);
    std::istringstream replay_lines(csv.str());
    std::string line;
    std::getline(replay_lines, line);
    while (std::getline(replay_lines, line)) EXPECT_NE(std::find(rows.begin(), rows.end(), line), rows.end()) << line;
}

TEST_F(Cli, EndToEndIsByteDeterministic) {
    make_planted("train.jsonl", 10, 1);
    make_planted("test.jsonl", 5, 2);
    std::string first[3];
    for (int round = 0; round < 2; ++round) {
        const std::string tag = std::to_string(round);
        train_quick("train.jsonl", "m" + tag + ".json");
        ASSERT_EQ(run({"search", "--model", path("m" + tag + ".json"), "--corpus", path("test.jsonl"), "--query", "pillow",
                       "--budget", "20", "--out", path("t" + tag + ".jsonl")}),
                  0);
        ASSERT_EQ(run({"eval", "--corpus", path("test.jsonl"), "--query", "pillow", "--model", path("m" + tag + ".json"),
                       "--methods", "proposal_rank,scene_plus_objects", "--out", path("e" + tag + ".csv")}),
                  0);
        const std::string got[3] = {slurp(path("m" + tag + ".json")), slurp(path("t" + tag + ".jsonl")),
                                    slurp(path("e" + tag + ".csv"))};
        for (int i = 0; i < 3; ++i) {
            if (round == 0)
                first[i] = got[i];
            else
                EXPECT_EQ(first[i], got[i]) << "artifact " << i;
        }
    }
}

TEST_F(Cli, TrainWithSubsetSelection) {
    make_planted("train.jsonl", 10, 1);
    for (const char* mode : {"none", "doptimal", "doptimal:200"}) {
        ASSERT_EQ(run({"train", "--corpus", path("train.jsonl"), "--query", "pillow", "--iterations", "1", "--budget", "10",
                       "--subset", mode, "--out", path("m.json")}),
                  0)
            << mode << ": " << err_.str();
        EXPECT_NO_THROW(load_policy(path("m.json")));
    }
}

TEST_F(Cli, ErrorExitCodes) {
    make_planted("c.jsonl", 6, 1);
    EXPECT_EQ(run({"train", "--corpus", path("c.jsonl"), "--query", "unicorn", "--out", path("m.json")}), 2);
    EXPECT_NE(err_.str().find("pillow"), std::string::npos);  // lists the catalog
    EXPECT_EQ(run({"eval", "--corpus", path("c.jsonl"), "--query", "pillow", "--methods", "scene_plus_objects", "--out",
                   path("e.csv")}),
              2);
    train_quick("c.jsonl", "ctx.json", "unary");
    EXPECT_EQ(run({"search", "--model", path("ctx.json"), "--corpus", path("c.jsonl"), "--query", "pillow", "--out",
                   path("t.jsonl")}),
              3);
    EXPECT_EQ(run({"search", "--model", path("missing.json"), "--corpus", path("c.jsonl"), "--query", "pillow", "--out",
                   path("t.jsonl")}),
              2);
}

TEST_F(Cli, SubsetFromMatrix) {
    std::ofstream m(path("x.csv"));
    m << "row_id,objectness_score,proposal_rank,mean_depth,mean_dist_back,min_height,max_height,label\n";
    for (int i = 0; i < 40; ++i)
        m << "r" << i << ',' << (i % 7) * 0.1 << ',' << i << ',' << (i % 5) << ',' << (i % 3) << ',' << (i % 4) * 0.2 << ','
          << (i % 6) * 0.3 + 1 << ',' << (i < 3 ? 1 : 0) << '\n';
    m.close();
    ASSERT_EQ(run({"subset", "--matrix", path("x.csv"), "--k", "12", "--out", path("sel.txt")}), 0) << err_.str();
    std::vector<std::string> ids;
    for (const auto& l : lines(path("sel.txt")))
        if (l[0] != '#') ids.push_back(l);
    EXPECT_EQ(ids.size(), 12u);
    for (const char* fixed : {"r0", "r1", "r2"}) EXPECT_NE(std::find(ids.begin(), ids.end(), fixed), ids.end());
}

TEST_F(Cli, SubsetFromCorpus) {
    make_planted("c.jsonl", 4, 1);
    ASSERT_EQ(run({"subset", "--corpus", path("c.jsonl"), "--query", "pillow", "--write-matrix", path("x.csv"), "--out",
                   path("sel.txt")}),
              0)
        << err_.str();
    EXPECT_EQ(lines(path("x.csv")).size(), 1u + 4u * 100u);
    EXPECT_GT(lines(path("sel.txt")).size(), 4u);
}

TEST_F(Cli, BinaryExitCodes) {
    const std::string bin = CTXSEARCH_CLI_PATH;
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " gen --n 0 --out " + path("c.jsonl") + " 2>/dev/null").c_str())), 2);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " gen --n 2 --out " + path("c.jsonl")).c_str())), 0);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " search --model " + path("c.jsonl") + " --corpus " + path("c.jsonl") +
                                       " --query bed --out " + path("t.jsonl") + " 2>/dev/null")
                                          .c_str())),
              3);
}
