#include "covwin/species_stats.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace covwin;

namespace {

AbundanceStats fold(const std::vector<std::string>& obs) {
    AbundanceStats s;
    for (const auto& o : obs) s.observe(o);
    return s;
}

void expect_matches_batch(const AbundanceStats& s, const std::vector<std::string>& obs) {
    const auto b = oracle::recount(obs);
    ASSERT_EQ(s.n(), b.n);
    ASSERT_EQ(s.distinct(), b.s_n);
    ASSERT_EQ(s.singletons(), b.f1);
    ASSERT_EQ(s.doubletons(), b.f2);
    ASSERT_EQ(s.counts().size(), b.counts.size());
    for (const auto& [k, x] : b.counts) ASSERT_EQ(s.count(k), x) << k;
}

/// Zipf(1) over `k` tokens by inverse CDF.
std::vector<std::string> zipf_draws(std::size_t count, std::size_t k, std::uint64_t seed) {
    std::vector<double> cdf;
    double acc = 0.0;
    for (std::size_t i = 1; i <= k; ++i) cdf.push_back(acc += 1.0 / static_cast<double>(i));
    std::mt19937_64 rng(seed);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * acc;
        const auto idx = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        out.push_back("z" + std::to_string(idx));
    }
    return out;
}

const std::vector<std::string> kWorked = {"A", "B", "A", "C", "B", "D", "A", "C", "E"};

} // namespace

TEST(AbundanceStats, FirstObservationIsSingleton) {
    AbundanceStats s;
    s.observe("A");
    EXPECT_EQ(s.n(), 1u);
    EXPECT_EQ(s.distinct(), 1u);
    EXPECT_EQ(s.singletons(), 1u);
    EXPECT_EQ(s.doubletons(), 0u);
}

TEST(AbundanceStats, WorkedExampleCounts) {
    const auto s = fold(kWorked);
    EXPECT_EQ(s.n(), 9u);
    EXPECT_EQ(s.distinct(), 5u);
    EXPECT_EQ(s.singletons(), 2u);
    EXPECT_EQ(s.doubletons(), 2u);
    EXPECT_EQ(s.count("A"), 3u);
}

TEST(AbundanceStats, TransitionsThroughCountThree) {
    AbundanceStats s;
    s.observe("x");
    EXPECT_EQ(s.singletons(), 1u);
    s.observe("x");
    EXPECT_EQ(s.singletons(), 0u);
    EXPECT_EQ(s.doubletons(), 1u);
    s.observe("x");
    EXPECT_EQ(s.doubletons(), 0u);
    s.observe("x");
    EXPECT_EQ(s.singletons() + s.doubletons(), 0u);
}

TEST(AbundanceStats, UniformDrawsMatchBatchRecount) {
    std::mt19937_64 rng(1234);
    std::vector<std::string> obs;
    AbundanceStats s;
    for (int i = 0; i < 1000; ++i) {
        obs.push_back("t" + std::to_string(rng() % 50));
        s.observe(obs.back());
    }
    expect_matches_batch(s, obs);
}

TEST(AbundanceStats, PrefixesMatchBatchRecount) {
    std::mt19937_64 rng(99);
    std::vector<std::string> obs;
    AbundanceStats s;
    for (int i = 0; i < 300; ++i) {
        obs.push_back("t" + std::to_string(rng() % 17));
        s.observe(obs.back());
        expect_matches_batch(s, obs);
    }
}

TEST(AbundanceStats, ResetEmptiesAndIsIdempotent) {
    auto s = fold(kWorked);
    s.reset();
    EXPECT_EQ(s, AbundanceStats{});
    s.reset();
    EXPECT_EQ(s, AbundanceStats{});
    s.observe("A");
    s.reset();
    EXPECT_TRUE(s.empty());
}

TEST(Estimators, WorkedExample) {
    const auto s = fold(kWorked);
    EXPECT_DOUBLE_EQ(chao1(s), 6.0);
    EXPECT_NEAR(completeness(s), 5.0 / 6.0, 1e-12);
    EXPECT_NEAR(coverage(s), 1.0 - (2.0 / 9.0) * (1.0 - 4.0 / 20.0), 1e-12);
    EXPECT_NEAR(coverage(s), 0.822222, 1e-6);

    const auto est = estimates(s);
    EXPECT_EQ(est.chao1, chao1(s));
    EXPECT_EQ(est.completeness, completeness(s));
    EXPECT_EQ(est.coverage, coverage(s));
}

TEST(Estimators, EmptySampleIsZero) {
    AbundanceStats s;
    EXPECT_EQ(estimates(s), (Estimates{0.0, 0.0, 0.0}));
}

TEST(Estimators, NoSingletonsMeansComplete) {
    const auto s = fold({"A", "A", "B", "B", "B", "C", "C"});
    EXPECT_EQ(s.singletons(), 0u);
    EXPECT_DOUBLE_EQ(chao1(s), 3.0);
    EXPECT_EQ(completeness(s), 1.0);
    EXPECT_EQ(coverage(s), 1.0);
}

TEST(Estimators, BiasCorrectedBranchWithoutDoubletons) {
    const auto s = fold({"A", "B", "C", "D", "D", "D"});
    ASSERT_EQ(s.distinct(), 4u);
    ASSERT_EQ(s.singletons(), 3u);
    ASSERT_EQ(s.doubletons(), 0u);
    EXPECT_DOUBLE_EQ(chao1(s), 7.0);
}

TEST(Estimators, SingleObservationHasZeroCoverage) {
    const auto s = fold({"A"});
    EXPECT_EQ(coverage(s), 0.0);
    EXPECT_DOUBLE_EQ(chao1(s), 1.0);
    EXPECT_EQ(completeness(s), 1.0);
}

TEST(Estimators, ZipfCompletenessMatchesBatchOracle) {
    const auto obs = zipf_draws(200, 30, 7);
    const auto s = fold(obs);
    const auto b = oracle::recount(obs);
    EXPECT_NEAR(completeness(s), oracle::completeness(b), 1e-12);
    EXPECT_NEAR(coverage(s), oracle::coverage(b), 1e-12);
    EXPECT_NEAR(chao1(s), oracle::chao1(b), 1e-12);
}

TEST(EstimatorProperties, RangesAndBoundsOnRandomSamples) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t alphabet = 1 + rng() % 40;
        const std::size_t count = 1 + rng() % 120;
        std::vector<std::string> obs;
        for (std::size_t i = 0; i < count; ++i) obs.push_back(std::to_string(rng() % alphabet));
        const auto s = fold(obs);
        EXPECT_GE(chao1(s), static_cast<double>(s.distinct()));
        EXPECT_GE(completeness(s), 0.0);
        EXPECT_LE(completeness(s), 1.0);
        EXPECT_GE(coverage(s), 0.0);
        EXPECT_LE(coverage(s), 1.0);
        EXPECT_LE(s.singletons() + s.doubletons(), s.distinct());
        EXPECT_LE(s.distinct(), s.n());

        // Any permutation of the sample gives the same estimates.
        auto shuffled = obs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(estimates(fold(shuffled)), estimates(s));
    }
}

TEST(EstimatorProperties, AllCountsAtLeastThreeIsFullyCovered) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> obs;
        const std::size_t species = 1 + rng() % 10;
        for (std::size_t k = 0; k < species; ++k)
            for (std::size_t r = 0; r < 3 + rng() % 4; ++r) obs.push_back("s" + std::to_string(k));
        std::shuffle(obs.begin(), obs.end(), rng);
        const auto s = fold(obs);
        EXPECT_EQ(s.singletons(), 0u);
        EXPECT_EQ(s.doubletons(), 0u);
        EXPECT_EQ(completeness(s), 1.0);
        EXPECT_EQ(coverage(s), 1.0);
    }
}
