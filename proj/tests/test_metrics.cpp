#include <gtest/gtest.h>

#include <random>

#include "hyperquery/metrics.hpp"
#include "test_support.hpp"

using namespace hyperquery;

TEST(RankOfTrue, StrictMaximumRanksFirst) {
    std::vector<double> s{0.1, 0.9, 0.5};
    EXPECT_EQ(rank_of_true(s, 1), 1u);
    EXPECT_EQ(rank_of_true(s, 0), 3u);
}

TEST(RankOfTrue, TiesCountAgainstTheTrueItem) {
    std::vector<double> s{0.5, 0.5};
    EXPECT_EQ(rank_of_true(s, 0), 2u);
    EXPECT_EQ(rank_of_true(s, 1), 2u);
}

TEST(RankOfTrue, RejectsOutOfRangeTruth) {
    std::vector<double> s{0.5};
    EXPECT_THROW(rank_of_true(s, 1), std::out_of_range);
}

TEST(Mrr, Examples) {
    std::vector<std::size_t> ones{1, 1, 1};
    EXPECT_DOUBLE_EQ(mrr(ones), 1.0);
    std::vector<std::size_t> r{1, 2};
    EXPECT_DOUBLE_EQ(mrr(r), 0.75);
    EXPECT_THROW(mrr(std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(HitAt, Examples) {
    std::vector<std::size_t> a{1, 4};
    EXPECT_DOUBLE_EQ(hit_at(a, 3), 0.5);
    EXPECT_DOUBLE_EQ(hit_at(a, 8), 1.0);
    std::vector<std::size_t> b{2, 3, 5};
    EXPECT_DOUBLE_EQ(hit_at(b, 3), 2.0 / 3.0);
}

TEST(Auc, Examples) {
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.7, 0.1}), 1.0);
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.6, 0.1}), 0.75);
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.3, 0.3}, std::vector<double>{0.3}), 0.5);
    EXPECT_THROW(auc(std::vector<double>{}, std::vector<double>{0.1}), std::invalid_argument);
}

TEST(Accuracy, CountsMatches) {
    std::vector<std::size_t> p{0, 1, 2, 2}, t{0, 1, 1, 2};
    EXPECT_DOUBLE_EQ(accuracy(p, t), 0.75);
}

TEST(Metrics, MatchBruteForceOracles) {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> coarse(0, 4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> ranks;
        for (int q = 0; q < 10; ++q) {
            std::vector<double> scores(1 + rng() % 8);
            for (auto& s : scores) s = coarse(rng);
            const std::size_t truth = rng() % scores.size();
            ranks.push_back(rank_of_true(scores, truth));
            ASSERT_EQ(ranks.back(), fixtures::rank_oracle(scores, truth));
        }
        double rr = 0.0;
        std::size_t hits = 0;
        for (auto r : ranks) {
            rr += 1.0 / static_cast<double>(r);
            hits += r <= 3;
        }
        ASSERT_EQ(mrr(ranks), rr / 10.0);
        ASSERT_EQ(hit_at(ranks, 3), static_cast<double>(hits) / 10.0);

        std::vector<double> pos(1 + rng() % 20), neg(1 + rng() % 20);
        for (auto& s : pos) s = coarse(rng);
        for (auto& s : neg) s = coarse(rng);
        ASSERT_EQ(auc(pos, neg), fixtures::auc_oracle(pos, neg));
    }
}

TEST(Metrics, StayInUnitInterval) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> pos(5), neg(7);
        for (auto& s : pos) s = g(rng);
        for (auto& s : neg) s = g(rng);
        const double a = auc(pos, neg);
        ASSERT_GE(a, 0.0);
        ASSERT_LE(a, 1.0);
    }
}
