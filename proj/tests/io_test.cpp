#include "icvar/io.hpp"
#include "icvar/solver.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace icvar;

namespace {

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "icvar_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST(MdpJson, RoundTripIsExact) {
    std::mt19937_64 rng(1);
    const auto mdp = testing_support::random_dense_mdp(rng, 5, 3, 0.87);
    const auto doc = mdp_to_json(mdp);
    EXPECT_EQ(doc["num_states"], 5);
    EXPECT_EQ(doc["transition"][2][1].size(), 5u);
    EXPECT_EQ(mdp_from_json(parse_json_text(doc.dump())), mdp);
}

TEST(MdpJson, ShapeErrorsAreValidationErrors) {
    auto doc = mdp_to_json(TabularMdp(2, 1, {1, 0, 0, 1}, {0, 1}, 0.5));
    auto missing = doc;
    missing.erase("reward");
    EXPECT_THROW(mdp_from_json(missing), ValidationError);
    auto short_row = doc;
    short_row["transition"][0][0] = json::array({1.0});
    EXPECT_THROW(mdp_from_json(short_row), ValidationError);
    auto wrong_type = doc;
    wrong_type["discount"] = "high";
    EXPECT_THROW(mdp_from_json(wrong_type), ValidationError);
    EXPECT_THROW(parse_json_text("{\"num_states\": "), ValidationError);
}

TEST(MdpJson, ValueProblemsAreLeftToValidation) {
    auto doc = mdp_to_json(TabularMdp(2, 1, {1, 0, 0, 1}, {0, 1}, 0.5));
    doc["transition"][0][0] = json::array({0.5, 0.4});
    const auto mdp = mdp_from_json(doc);
    EXPECT_FALSE(validate_mdp(mdp).ok());
}

TEST(Files, MissingFileIsIoErrorWithPath) {
    try {
        load_mdp("/nonexistent/dir/mdp.json");
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_EQ(e.path(), "/nonexistent/dir/mdp.json");
    }
    EXPECT_THROW(write_text_file("/nonexistent/dir/out.txt", "x"), IoError);
}

TEST(Files, WriteThenLoad) {
    const auto path = (scratch_dir() / "mdp.json").string();
    const TabularMdp mdp(2, 1, {0.25, 0.75, 0, 1}, {0.5, 1}, 0.8);
    write_text_file(path, mdp_to_json(mdp).dump(2));
    EXPECT_EQ(load_mdp(path), mdp);
}

TEST(EmpiricalModelJson, RoundTrip) {
    const TabularMdp mdp(2, 2, {0.3, 0.7, 1, 0, 0.5, 0.5, 0, 1}, {0, 1, 0.5, 0.25}, 0.9);
    const auto model = sample_empirical_model(mdp, 17, Seed{42});
    const auto doc = empirical_model_to_json(model);
    EXPECT_EQ(doc["n"], 17);
    EXPECT_EQ(doc["seed"], 42);
    const auto back = empirical_model_from_json(parse_json_text(doc.dump()));
    EXPECT_EQ(back.kernel(), model.kernel());
    EXPECT_TRUE(std::equal(back.count_data().begin(), back.count_data().end(), model.count_data().begin()));
    auto bad = doc;
    bad["counts"][0][0] = json::array({1, 1});
    EXPECT_THROW(empirical_model_from_json(bad), ValidationError);
}

TEST(SolveResultJson, Fields) {
    const auto r = icvar_vi(build_cvar_hard_mdp(CvarHardParams{}), RiskLevel(0.5));
    const auto doc = solve_result_to_json(r);
    EXPECT_NEAR(doc["v"][0].get<double>(), 3.103448, 1e-6);
    EXPECT_EQ(doc["policy"][0], 0);
    EXPECT_EQ(doc["q"].size(), 3u);
    EXPECT_EQ(doc["iterations"], r.iterations);
    EXPECT_LE(doc["certified_gap"].get<double>(), 1e-9);
}

TEST(InstanceMeta, CvarHardCarriesDerivedQuantities) {
    const auto meta = cvar_hard_meta(CvarHardParams{});
    EXPECT_NEAR(meta["p"].get<double>(), 0.525, 1e-15);
    EXPECT_NEAR(meta["q"].get<double>(), 0.5242, 1e-15);
    EXPECT_NEAR(meta["delta"].get<double>(), 0.0008, 1e-15);
    EXPECT_EQ(meta["initial_state"], 0);
    EXPECT_TRUE(meta.contains("action_layout"));
    EXPECT_EQ(worst_path_meta(WorstPathHardParams{})["kind"], "worst-path-hard");
    EXPECT_EQ(random_meta(RandomMdpSpec{})["kind"], "random");
}
