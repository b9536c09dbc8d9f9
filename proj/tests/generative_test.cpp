#include "icvar/generative.hpp"
#include "icvar/instances.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace icvar;

namespace {

TabularMdp point_mass_mdp() { return {3, 2, {0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0}, {0, 1, 0, 1, 0, 1}, 0.9}; }

TabularMdp one_row(std::vector<double> row) {
    std::vector<double> p(row);
    p.resize(row.size() * row.size(), 0.0);
    for (std::size_t s = 1; s < row.size(); ++s) p[s * row.size() + s] = 1.0;
    return {row.size(), 1, std::move(p), std::vector<double>(row.size(), 0.0), 0.5};
}

} // namespace

TEST(KeyedRandom, DeterministicAndKeySensitive) {
    EXPECT_EQ(keyed_hash({1, 2, 3}), keyed_hash({1, 2, 3}));
    EXPECT_NE(keyed_hash({1, 2, 3}), keyed_hash({1, 3, 2}));
    EXPECT_NE(derive_seed(Seed{1}, 0, 0), derive_seed(Seed{1}, 0, 1));
    EXPECT_NE(derive_seed(Seed{1}, 0, 0), derive_seed(Seed{1}, 1, 0));
    const double u = keyed_uniform({4, 5});
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
}

TEST(InverseCdf, TiesGoToLowerIndexAndRoundingFallsBack) {
    std::vector<double> cum{0.25, 0.25, 0.75, 0.999999};
    EXPECT_EQ(inverse_cdf(cum, 0.0), 0u);
    EXPECT_EQ(inverse_cdf(cum, 0.25), 2u);
    EXPECT_EQ(inverse_cdf(cum, 0.9), 3u);
    EXPECT_EQ(inverse_cdf(cum, 0.9999995), 3u);
    std::vector<double> trailing{0.5, 0.9999999, 0.9999999};
    EXPECT_EQ(inverse_cdf(trailing, 0.99999995), 1u);
}

TEST(SampleEmpiricalModel, PointMassKernelIsReproducedExactly) {
    const auto mdp = point_mass_mdp();
    for (std::uint64_t seed : {0ULL, 7ULL, 12345ULL}) {
        const auto model = sample_empirical_model(mdp, 13, Seed{seed});
        EXPECT_EQ(model.kernel(), mdp);
    }
}

TEST(SampleEmpiricalModel, FrequenciesConcentrate) {
    const auto mdp = one_row({0.3, 0.7});
    const auto model = sample_empirical_model(mdp, 1000000, Seed{99});
    EXPECT_NEAR(model.kernel().transition(0, 0, 0), 0.3, 5e-3);
    // 10 binomial standard deviations.
    EXPECT_NEAR(model.kernel().transition(0, 0, 0), 0.3, 10 * std::sqrt(0.21 / 1e6));
}

TEST(SampleEmpiricalModel, DeterministicInSeed) {
    std::mt19937_64 rng(3);
    const auto mdp = testing_support::random_dense_mdp(rng, 5, 3, 0.9);
    const auto a = sample_empirical_model(mdp, 50, Seed{4});
    const auto b = sample_empirical_model(mdp, 50, Seed{4});
    const auto c = sample_empirical_model(mdp, 50, Seed{5});
    EXPECT_TRUE(std::equal(a.count_data().begin(), a.count_data().end(), b.count_data().begin()));
    EXPECT_FALSE(std::equal(a.count_data().begin(), a.count_data().end(), c.count_data().begin()));
}

TEST(SampleEmpiricalModel, DrawsArePureFunctionsOfTheirKey) {
    // A single-pair MDP and a multi-pair MDP sharing a row see the same draws.
    const auto small = one_row({0.2, 0.5, 0.3});
    const auto model = sample_empirical_model(small, 40, Seed{8});
    std::vector<double> cum{0.2, 0.7, 1.0};
    std::vector<std::uint64_t> expect(3, 0);
    for (std::uint64_t i = 0; i < 40; ++i) ++expect[inverse_cdf(cum, sample_uniform(Seed{8}, 0, 0, i))];
    auto got = model.counts(0, 0);
    EXPECT_TRUE(std::equal(got.begin(), got.end(), expect.begin()));
}

TEST(SampleEmpiricalModel, CountInvariants) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mdp = testing_support::random_dense_mdp(rng, 6, 2, 0.8, 0.5);
        const std::size_t n = 1 + rng() % 60;
        const auto model = sample_empirical_model(mdp, n, Seed{rng()});
        EXPECT_TRUE(validate_mdp(model.kernel()).ok());
        for (std::size_t s = 0; s < 6; ++s) {
            for (std::size_t a = 0; a < 2; ++a) {
                std::uint64_t total = 0;
                double row_sum = 0.0;
                for (std::size_t next = 0; next < 6; ++next) {
                    total += model.counts(s, a)[next];
                    row_sum += model.kernel().transition(s, a, next);
                    if (mdp.transition(s, a, next) == 0.0) {
                        EXPECT_EQ(model.counts(s, a)[next], 0u);
                    }
                }
                EXPECT_EQ(total, n);
                EXPECT_NEAR(row_sum, 1.0, 1e-12);
            }
        }
        EXPECT_EQ(std::vector<double>(model.kernel().reward_data().begin(), model.kernel().reward_data().end()),
                  std::vector<double>(mdp.reward_data().begin(), mdp.reward_data().end()));
    }
}

TEST(SampleEmpiricalModel, RejectsZeroSamples) {
    EXPECT_THROW(sample_empirical_model(point_mass_mdp(), 0, Seed{1}), ValidationError);
}

TEST(SampleEmpiricalModel, UnbiasedAcrossSeeds) {
    const auto mdp = one_row({0.1, 0.6, 0.3});
    constexpr std::size_t n = 20;
    constexpr std::size_t seeds = 4000;
    std::vector<double> mean(3, 0.0);
    for (std::size_t k = 0; k < seeds; ++k) {
        const auto model = sample_empirical_model(mdp, n, Seed{k});
        for (std::size_t j = 0; j < 3; ++j) mean[j] += model.kernel().transition(0, 0, j) / seeds;
    }
    const double p[3] = {0.1, 0.6, 0.3};
    for (std::size_t j = 0; j < 3; ++j) {
        const double se = std::sqrt(p[j] * (1 - p[j]) / (n * seeds));
        EXPECT_NEAR(mean[j], p[j], 5 * se);
    }
}

TEST(EmpiricalModel, RejectsCountsThatDoNotSumToN) {
    EXPECT_THROW(EmpiricalModel(one_row({0.5, 0.5}), {1, 1, 0, 1}, 2, Seed{}), ValidationError);
    EXPECT_THROW(EmpiricalModel(one_row({0.5, 0.5}), {1, 1, 0}, 2, Seed{}), ValidationError);
}

TEST(EmpiricalSupports, FromCounts) {
    const auto source = one_row({0.2, 0.3, 0.5});
    const EmpiricalModel model(source, {3, 0, 2, 0, 5, 0, 0, 0, 5}, 5, Seed{});
    const auto sets = empirical_supports(model);
    EXPECT_EQ(std::vector<std::size_t>(sets.at(0, 0).begin(), sets.at(0, 0).end()), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(sets.at(1, 0).size(), 1u);
}

TEST(EmpiricalSupports, PointMassesGiveSingletons) {
    const auto model = sample_empirical_model(point_mass_mdp(), 4, Seed{2});
    EXPECT_EQ(empirical_supports(model), true_supports(point_mass_mdp()));
}

TEST(EmpiricalSupports, LargeSamplesRecoverTrueSupport) {
    std::mt19937_64 rng(6);
    const auto mdp = testing_support::random_dense_mdp(rng, 5, 2, 0.9, 0.0);
    const double smallest = p_min(mdp);
    // Coupon-collector scale with a wide margin.
    const auto n = static_cast<std::size_t>(std::ceil(40.0 / smallest));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EXPECT_EQ(empirical_supports(sample_empirical_model(mdp, n, Seed{seed})), true_supports(mdp));
    }
}

TEST(PMin, Examples) {
    EXPECT_DOUBLE_EQ(p_min(point_mass_mdp()), 1.0);
    EXPECT_DOUBLE_EQ(p_min(build_worst_path_hard_mdp(WorstPathHardParams{})), 0.1);
    EXPECT_DOUBLE_EQ(p_min(one_row({0.25, 0.75})), 0.25);
    EXPECT_THROW(p_min(TabularMdp(1, 1, {0.0}, {0.0}, 0.5)), ValidationError);
}
