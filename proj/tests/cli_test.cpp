#include "icvar/export.hpp"
#include "icvar/io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

using namespace icvar;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "icvar_cli_test";
    std::filesystem::create_directories(dir);
    return dir;
}

Run run(const std::string& args) {
    const auto err_path = scratch_dir() / "stderr.txt";
    const std::string cmd = std::string(ICVAR_CLI_PATH) + " " + args + " 2>" + err_path.string();
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_text_file(err_path.string());
    return r;
}

} // namespace

TEST(Cli, SolveHardInstanceDocument) {
    const auto path = (scratch_dir() / "hard.json").string();
    const auto gen = run("gen-instance cvar-hard --tau 0.5 --gamma 0.9 --c 0.5 --epsilon 0.01 --out " + path);
    ASSERT_EQ(gen.code, 0) << gen.err;
    EXPECT_TRUE(gen.out.empty());
    const auto r = run("solve --mdp " + path + " --tau 0.5");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = parse_json_text(r.out);
    EXPECT_NEAR(doc["v"][0].get<double>(), 3.103448, 1e-6);
    EXPECT_LE(doc["certified_gap"].get<double>(), 1e-9);
    EXPECT_TRUE(r.err.empty());
}

TEST(Cli, SolveTauOneMatchesRiskNeutralSolve) {
    const auto r = run("solve --instance random --num-states 6 --num-actions 3 --sparsity 3 --tau 1");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = parse_json_text(r.out);
    const auto mdp = random_mdp([] {
        RandomMdpSpec s;
        s.num_states = 6;
        s.num_actions = 3;
        s.sparsity = 3;
        return s;
    }());
    // Expectation backup by hand.
    std::vector<double> v(6, 0.0);
    for (int it = 0; it < 2000; ++it) {
        std::vector<double> next(6, 0.0);
        for (std::size_t s = 0; s < 6; ++s) {
            double best = -1.0;
            for (std::size_t a = 0; a < 3; ++a) {
                double ev = 0.0;
                for (std::size_t k = 0; k < 6; ++k) ev += mdp.transition(s, a, k) * v[k];
                best = std::max(best, mdp.reward(s, a) + 0.9 * ev);
            }
            next[s] = best;
        }
        v = next;
    }
    for (std::size_t s = 0; s < 6; ++s) EXPECT_NEAR(doc["v"][s].get<double>(), v[s], 1e-8);
}

TEST(Cli, MalformedJsonExitsTwo) {
    const auto path = (scratch_dir() / "bad.json").string();
    write_text_file(path, "{\"num_states\": 2, ");
    const auto r = run("solve --mdp " + path);
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    EXPECT_EQ(parse_json_text(r.err)["error"], "validation");
}

TEST(Cli, MissingFileExitsThree) {
    const auto r = run("solve --mdp /nonexistent/m.json");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(parse_json_text(r.err)["path"], "/nonexistent/m.json");
}

TEST(Cli, GenInstanceNamesViolatedConstraint) {
    const auto r = run("gen-instance cvar-hard --gamma 0.4");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("gamma must exceed 1/2"), std::string::npos);
}

TEST(Cli, GenInstanceMetaAndDeterminism) {
    const auto r = run("gen-instance cvar-hard --tau 0.5 --gamma 0.9 --c 0.5 --epsilon 0.01");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(parse_json_text(r.out)["meta"]["p"].get<double>(), 0.525, 1e-15);
    const auto a = run("gen-instance random --seed 7 --num-states 5");
    const auto b = run("gen-instance random --seed 7 --num-states 5");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
}

TEST(Cli, UnknownFlagsAndMissingSubcommandExitTwo) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("solve --bogus").code, 2);
    EXPECT_EQ(run("solve --instance cvar-hard --mode sideways").code, 2);
}

TEST(Cli, EvalSampleAndTrial) {
    const auto e = run("eval --instance cvar-hard --tau 0.5 --policy 1,0,0");
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_LT(parse_json_text(e.out)["v"][0].get<double>(), 3.1);
    EXPECT_EQ(run("eval --instance cvar-hard --tau 0.5 --policy 1,0").code, 2);

    const auto s = run("sample --instance worst-path-hard --n 12 --seed 3");
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_EQ(parse_json_text(s.out)["n"], 12);

    const auto t = run("trial --instance cvar-hard --tau 0.5 --n 100 --seed 4 --random-phi");
    ASSERT_EQ(t.code, 0) << t.err;
    const auto doc = parse_json_text(t.out);
    EXPECT_TRUE(doc["picked_phi"].is_boolean());
    EXPECT_GE(doc["gap"].get<double>(), -2e-9);
}

TEST(Cli, SweepWritesFilesReproducibly) {
    const auto dir = scratch_dir() / "sweep";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto spec = (dir / "spec.json").string();
    json doc = parse_json_text(R"({
        "instance": {"kind": "cvar-hard", "phi": "random"},
        "grid": {"n": [100]},
        "seeds": 4, "master_seed": 3, "target_epsilon": 0.01
    })");
    doc["outputs"] = {{"trial_csv", (dir / "trials.csv").string()},
                      {"aggregate_csv", (dir / "agg.csv").string()},
                      {"svg", (dir / "chart.svg").string()}};
    write_text_file(spec, doc.dump());
    const auto first = run("sweep --spec " + spec + " --jobs 2");
    ASSERT_EQ(first.code, 0) << first.err;
    EXPECT_EQ(std::count(first.out.begin(), first.out.end(), '\n'), 1);
    const auto trials = read_text_file((dir / "trials.csv").string());
    EXPECT_TRUE(std::filesystem::exists(dir / "agg.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "chart.svg"));
    ASSERT_EQ(run("sweep --spec " + spec).code, 0);
    EXPECT_EQ(read_text_file((dir / "trials.csv").string()), trials);

    const auto plot = run("plot --trials " + (dir / "trials.csv").string());
    ASSERT_EQ(plot.code, 0) << plot.err;
    EXPECT_NE(plot.out.find("<svg"), std::string::npos);
}

TEST(Cli, SweepWithMissingInstanceFileExitsThree) {
    const auto spec = (scratch_dir() / "missing_spec.json").string();
    write_text_file(spec, R"({"instance": {"kind": "file", "path": "does_not_exist.json"},
                             "grid": {"n": [5]}, "seeds": 1})");
    EXPECT_EQ(run("sweep --spec " + spec).code, 3);
    EXPECT_EQ(run("sweep --spec /nonexistent/spec.json").code, 3);
}

TEST(Cli, SweepWithWhollyFailedCellExitsNonZero) {
    const auto spec = (scratch_dir() / "failing_spec.json").string();
    write_text_file(spec, R"({"instance": {"kind": "cvar-hard"},
                             "grid": {"n": [5], "gamma": [0.9, 0.3]}, "seeds": 2})");
    const auto r = run("sweep --spec " + spec);
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("cell-failed"), std::string::npos);
}

TEST(Cli, ShippedConfigsParse) {
    for (const auto& entry : std::filesystem::directory_iterator(std::string(ICVAR_SOURCE_DIR) + "/configs")) {
        if (entry.path().extension() != ".json") continue;
        const auto spec = load_sweep_spec(entry.path().string());
        EXPECT_FALSE(spec.ns.empty()) << entry.path();
        EXPECT_FALSE(spec.trial_csv.empty()) << entry.path();
    }
}
