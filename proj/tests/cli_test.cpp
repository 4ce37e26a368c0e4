#include <gtest/gtest.h>

#include <sstream>

#include "mapo/cli.hpp"
#include "test_support.hpp"

using namespace mapo;
using mapo::testing::TempDir;
using mapo::testing::write_file;

namespace {

struct CliWorkspace {
    TempDir dir;

    CliWorkspace() {
        mapo::testing::write_dataset_tsv(dir / "data.tsv", synthetic::make_dataset(300));
        write_config("config.ini", {});
    }

    using Settings = std::map<std::string, std::map<std::string, std::string>>;

    /// Writes the base config with `overrides` applied per section and key.
    void write_config(const std::string& name, const Settings& overrides) {
        Settings settings{
            {"run",
             {{"seed_prompt", "Is the statement true? Answer Yes or No."},
              {"beam_width", "2"},
              {"search_depth", "2"},
              {"minibatch_size", "16"},
              {"candidates_per_parent", "4"},
              {"test_set_size", "50"},
              {"seed", "5"}}},
            {"bandit", {{"time_steps", "6"}, {"sample_size", "4"}}},
            {"dataset", {{"path", "data.tsv"}, {"labels", "Yes,No"}}},
            {"backend", {{"kind", "scripted"}, {"latency_s", "0.01"}}},
        };
        for (const auto& [section, keys] : overrides) {
            for (const auto& [key, value] : keys) settings[section][key] = value;
        }
        std::string text = "; small offline run\n";
        for (const auto& [section, keys] : settings) {
            text += "[" + section + "]\n";
            for (const auto& [key, value] : keys) text += key + " = " + value + "\n";
        }
        write_file(dir / name, text);
    }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "mapo");
        out.str("");
        err.str("");
        return cli::run(args, out, err);
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    std::ostringstream out;
    std::ostringstream err;
};

}  // namespace

TEST(Report, ComparisonHasOneColumnPerMethod) {
    CliWorkspace ws;
    ASSERT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--out", ws.path("a")}), 0) << ws.err.str();
    ASSERT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--mode", "protegi", "--out", ws.path("b")}), 0)
        << ws.err.str();
    ASSERT_EQ(ws.run({"report", ws.path("a"), ws.path("b"), "--out", ws.path("report")}), 0) << ws.err.str();

    const auto comparison = mapo::testing::read_file(ws.dir / "report/comparison.csv");
    std::istringstream lines(comparison);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "round,mapo,protegi");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    EXPECT_EQ(rows, 3);
    EXPECT_TRUE(fs::exists(ws.dir / "report/mapo_score_vs_calls.csv"));
    EXPECT_TRUE(fs::exists(ws.dir / "report/protegi_score_vs_time.csv"));
}

TEST(Report, SixRoundsGiveSevenRows) {
    TempDir dir;
    RunResult r;
    r.complete = true;
    r.metadata = {{"method", "mapo"}};
    for (int i = 0; i <= 6; ++i) {
        MetricEvent e;
        e.round = i;
        e.best_test_score = 0.1 * i;
        r.events.push_back(e);
    }
    write_run_artifact(dir / "run", r, json::object(), Transcript{});
    write_report({dir / "run"}, dir / "out");
    const auto csv = mapo::testing::read_file(dir / "out/mapo_score_vs_round.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,best_test_score");
}

TEST(Report, SameMethodLabelsAreDisambiguated) {
    CliWorkspace ws;
    ASSERT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--out", ws.path("x")}), 0);
    ASSERT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--seed", "6", "--out", ws.path("y")}), 0);
    ASSERT_EQ(ws.run({"report", ws.path("x"), ws.path("y"), "--out", ws.path("r")}), 0);
    const auto csv = mapo::testing::read_file(ws.dir / "r/comparison.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,mapo@x,mapo@y");
}

TEST(Report, EmptyArtifactDirectoryIsAnError) {
    CliWorkspace ws;
    fs::create_directories(ws.dir / "empty");
    EXPECT_NE(ws.run({"report", ws.path("empty"), "--out", ws.path("r")}), 0);
    EXPECT_THROW(write_report({ws.dir / "empty"}, ws.dir / "r2"), Error);
}

TEST(Cli, OptimizeWritesArtifact) {
    CliWorkspace ws;
    ASSERT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--out", ws.path("run"), "--verbose"}), 0)
        << ws.err.str();
    for (const char* f : {"config.json", "config.ini", "metadata.json", "transcript.jsonl", "prompts.jsonl",
                          "gradients.jsonl", "beams.jsonl", "history.json", "bandit.jsonl", "events.jsonl",
                          "convergence.json", "shortfalls.jsonl", "summary.json", "predictions.jsonl"}) {
        EXPECT_TRUE(fs::exists(ws.dir / "run" / f)) << f;
    }
    EXPECT_NE(ws.out.str().find("best_prompt:"), std::string::npos);
    const auto summary = json::parse(mapo::testing::read_file(ws.dir / "run/summary.json"));
    EXPECT_TRUE(summary["complete"].get<bool>());
}

TEST(Cli, ReplayReproducesArtifact) {
    CliWorkspace ws;
    ASSERT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--out", ws.path("rec")}), 0);
    ASSERT_EQ(ws.run({"replay", ws.path("rec"), "--out", ws.path("rep")}), 0) << ws.err.str();
    for (const char* f : {"events.jsonl", "prompts.jsonl", "beams.jsonl", "transcript.jsonl", "summary.json"}) {
        EXPECT_EQ(mapo::testing::read_file(ws.dir / "rec" / f), mapo::testing::read_file(ws.dir / "rep" / f)) << f;
    }
}

TEST(Cli, ConfigErrorsExitTwo) {
    CliWorkspace ws;
    ws.write_config("bad.ini", {{"run", {{"unknown_key", "1"}}}});
    EXPECT_EQ(ws.run({"optimize", "--config", ws.path("bad.ini")}), 2);
    ws.write_config("div.ini", {{"run", {{"candidates_per_parent", "5"}}}});
    EXPECT_EQ(ws.run({"optimize", "--config", ws.path("div.ini")}), 2);
    EXPECT_NE(ws.err.str().find("divisibility"), std::string::npos);
    EXPECT_EQ(ws.run({"optimize", "--config", ws.path("missing.ini")}), 2);
    EXPECT_EQ(ws.run({"optimize"}), 2);
    EXPECT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--momentum", "maybe"}), 2);
}

TEST(Cli, DatasetErrorsExitThree) {
    CliWorkspace ws;
    ws.write_config("nodata.ini", {{"dataset", {{"path", "nothing_here.tsv"}}}});
    EXPECT_EQ(ws.run({"optimize", "--config", ws.path("nodata.ini")}), 3);
    ws.write_config("big.ini", {{"run", {{"test_set_size", "5000"}}}});
    EXPECT_EQ(ws.run({"optimize", "--config", ws.path("big.ini")}), 3);
}

TEST(Cli, ScriptExhaustionIsIncompleteRun) {
    CliWorkspace ws;
    write_file(ws.dir / "empty_transcript.jsonl", "");
    EXPECT_EQ(ws.run({"optimize", "--config", ws.path("config.ini"), "--backend", "replay", "--transcript",
                      ws.path("empty_transcript.jsonl"), "--out", ws.path("partial")}),
              5);
    EXPECT_TRUE(fs::exists(ws.dir / "partial/summary.json"));
}

TEST(Cli, EvaluateScoresTestSplit) {
    CliWorkspace ws;
    write_file(ws.dir / "prompt.txt", "Is the statement true? Answer Yes or No.\n");
    ASSERT_EQ(ws.run({"evaluate", "--config", ws.path("config.ini"), "--prompt", ws.path("prompt.txt")}), 0)
        << ws.err.str();
    EXPECT_NE(ws.out.str().find("calls: 50"), std::string::npos);
    EXPECT_NE(ws.out.str().find("score: "), std::string::npos);

    write_file(ws.dir / "blank.txt", "  \n");
    EXPECT_EQ(ws.run({"evaluate", "--config", ws.path("config.ini"), "--prompt", ws.path("blank.txt")}), 2);
}

TEST(Cli, EvaluateGatewayErrorExitsFour) {
    CliWorkspace ws;
    write_file(ws.dir / "prompt.txt", "p");
    write_file(ws.dir / "empty_transcript.jsonl", "");
    EXPECT_EQ(ws.run({"evaluate", "--config", ws.path("config.ini"), "--prompt", ws.path("prompt.txt"), "--backend",
                      "replay", "--transcript", ws.path("empty_transcript.jsonl")}),
              4);
}

TEST(ConfigFile, EchoRoundTrips) {
    CliWorkspace ws;
    ws.write_config("full.ini", {{"output", {{"verbose", "on"}}}});
    const auto cfg = load_config(ws.dir / "full.ini");
    write_file(ws.dir / "echo.ini", to_ini(cfg));
    const auto again = load_config(ws.dir / "echo.ini");
    EXPECT_EQ(to_ini(again), to_ini(cfg));
    EXPECT_EQ(again.run, cfg.run);
    EXPECT_EQ(again.dataset.path, (ws.dir / "data.tsv").lexically_normal().string());
}

TEST(ConfigFile, ProtegiModePreset) {
    AppConfig cfg;
    apply_setting(cfg, "run", "mode", "protegi");
    EXPECT_TRUE(cfg.run.baseline_mode);
    EXPECT_EQ(cfg.run.gradient_mode, GradientMode::negative_only);
    EXPECT_FALSE(cfg.run.momentum_enabled);
    EXPECT_THROW(apply_setting(cfg, "run", "mode", "other"), ConfigError);
    EXPECT_THROW(apply_setting(cfg, "nosuch", "x", "1"), ConfigError);
}
