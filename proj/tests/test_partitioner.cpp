#include <gtest/gtest.h>

#include <random>

#include "hyperquery/partitioner.hpp"
#include "test_support.hpp"

using namespace hyperquery;

namespace {

ClusterAssignment assign(std::vector<ClusterId> c, std::uint32_t k) {
    ClusterAssignment a;
    a.cluster_of = std::move(c);
    a.k = k;
    return a;
}

}  // namespace

TEST(Cut, SingleClusterEdgeContributesZero) {
    auto h = Hypergraph::build({{0, 1, 2}});
    EXPECT_EQ(cut(h, assign({0, 0, 0}, 1)), 0u);
}

TEST(Cut, EdgeSpanningThreeClustersContributesTwo) {
    auto h = Hypergraph::build({{0, 1, 2}});
    EXPECT_EQ(cut(h, assign({0, 1, 2}, 3)), 2u);
}

TEST(Cut, TriangleExample) {
    auto h = Hypergraph::build({{0, 1}, {1, 2}, {0, 2}});
    EXPECT_EQ(cut(h, assign({0, 0, 1}, 2)), 2u);
}

TEST(Cut, RejectsSizeMismatch) {
    auto h = Hypergraph::build({{0, 1}});
    EXPECT_THROW(cut(h, assign({0}, 1)), HypergraphError);
}

TEST(Cut, MatchesSetRecount) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        auto edges = fixtures::random_edges(rng, n, 1 + rng() % 8, n);
        auto c = fixtures::random_assignment(rng, n, 1 + rng() % 4);
        ASSERT_EQ(cut(Hypergraph::build(edges, n), c), fixtures::cut_oracle(edges, c.cluster_of));
    }
}

TEST(MaxClusterSize, UsesCeiling) {
    EXPECT_EQ(max_cluster_size(10, 2, 0.05), 6u);
    EXPECT_EQ(max_cluster_size(12, 2, 0.05), 7u);
    EXPECT_EQ(max_cluster_size(100, 4, 0.0), 25u);
}

TEST(Coarsen, MergesTwoNodesSharingAnEdge) {
    auto level = coarsen(Hypergraph::build({{0, 1}}));
    EXPECT_EQ(level.coarse.num_nodes(), 1u);
    EXPECT_EQ(level.coarse.num_edges(), 0u);
    EXPECT_EQ(level.projection, (std::vector<NodeId>{0, 0}));
}

TEST(Coarsen, IsolatedNodeSurvivesUnmerged) {
    auto level = coarsen(Hypergraph::build({{0, 1}}, 3));
    EXPECT_EQ(level.coarse.num_nodes(), 2u);
    EXPECT_NE(level.projection[2], level.projection[0]);
    EXPECT_EQ(level.node_weight[level.projection[2]], 1u);
}

TEST(Coarsen, GroupsHoldAtMostFourNodes) {
    auto level = coarsen(Hypergraph::build({{0, 1, 2, 3, 4, 5}}));
    std::vector<std::size_t> members(level.coarse.num_nodes(), 0);
    for (NodeId cv : level.projection) ++members[cv];
    for (std::size_t m : members) EXPECT_LE(m, 4u);
}

TEST(Coarsen, LiftPreservesCut) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        auto h = Hypergraph::build(fixtures::random_edges(rng, 30, 25, 4), 30);
        auto level = coarsen(h);
        // Total and surjective projection.
        std::vector<char> hit(level.coarse.num_nodes(), 0);
        for (NodeId cv : level.projection) {
            ASSERT_LT(cv, level.coarse.num_nodes());
            hit[cv] = 1;
        }
        ASSERT_EQ(std::count(hit.begin(), hit.end(), 1), static_cast<long>(hit.size()));
        ASSERT_TRUE(level.no_progress || level.coarse.num_nodes() < h.num_nodes());

        auto coarse = fixtures::random_assignment(rng, level.coarse.num_nodes(), 3);
        ASSERT_EQ(cut(level.coarse, coarse), cut(h, project(level, coarse)));
    }
}

TEST(Coarsen, IsDeterministic) {
    std::mt19937_64 rng(23);
    auto h = Hypergraph::build(fixtures::random_edges(rng, 40, 30, 5), 40);
    auto a = coarsen(h), b = coarsen(h);
    EXPECT_EQ(a.projection, b.projection);
    EXPECT_EQ(a.coarse, b.coarse);
}

TEST(FmRefine, LeavesOptimalAssignmentUnchanged) {
    auto h = Hypergraph::build({{0, 1}, {2, 3}});
    auto c = assign({0, 0, 1, 1}, 2);
    auto r = fm_refine(h, c);
    EXPECT_EQ(r.cluster_of, c.cluster_of);
    EXPECT_EQ(cut(h, r), 0u);
}

TEST(FmRefine, ReachesZeroCutOnTwoPairs) {
    auto h = Hypergraph::build({{0, 1}, {2, 3}});
    auto c = assign({0, 1, 0, 1}, 2);
    ASSERT_EQ(cut(h, c), 2u);
    ASSERT_EQ(fixtures::optimal_balanced_cut(h.edge_lists(), 4, 2, 0.05), 0u);
    auto r = fm_refine(h, c);
    EXPECT_EQ(cut(h, r), 0u);
    EXPECT_TRUE(is_balanced(r));
}

TEST(FmRefine, CutNeverIncreasesAcrossPasses) {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10 + rng() % 30;
        auto h = Hypergraph::build(fixtures::random_edges(rng, n, 20, 4), n);
        ClusterAssignment c = assign(std::vector<ClusterId>(n), 3);
        for (std::size_t v = 0; v < n; ++v) c.cluster_of[v] = static_cast<ClusterId>(v % 3);
        std::shuffle(c.cluster_of.begin(), c.cluster_of.end(), rng);
        RefineStats stats;
        auto r = fm_refine(h, c, 8, &stats);
        std::uint64_t prev = cut(h, c);
        for (auto after : stats.cut_after_pass) {
            ASSERT_LE(after, prev);
            prev = after;
        }
        ASSERT_EQ(prev, cut(h, r));
        ASSERT_TRUE(is_balanced(r));
    }
}

TEST(Partition, SingleClusterPutsEverythingInZero) {
    auto h = Hypergraph::build({{0, 1}, {1, 2, 3}});
    auto r = partition(h, 1, 0);
    EXPECT_EQ(r.assignment.cluster_of, (std::vector<ClusterId>(4, 0)));
    EXPECT_EQ(r.cut, 0u);
}

TEST(Partition, RejectsTooManyClusters) {
    auto h = Hypergraph::build({{0, 1}});
    EXPECT_THROW(partition(h, 3, 0), HypergraphError);
    EXPECT_THROW(partition(h, 0, 0), HypergraphError);
}

TEST(Partition, SeparatesTwoBlobsJoinedByABridge) {
    // Two 4-node blobs, each covered by all its triples, plus one bridge edge.
    std::vector<std::vector<NodeId>> edges;
    for (NodeId base : {0u, 4u}) {
        for (NodeId skip = 0; skip < 4; ++skip) {
            std::vector<NodeId> triple;
            for (NodeId i = 0; i < 4; ++i) {
                if (i != skip) triple.push_back(base + i);
            }
            edges.push_back(triple);
        }
    }
    edges.push_back({3, 4});
    auto h = Hypergraph::build(edges);
    ASSERT_EQ(fixtures::optimal_balanced_cut(edges, 8, 2, 0.05), 1u);
    auto r = partition(h, 2, 0);
    EXPECT_EQ(r.cut, 1u);
    for (NodeId v = 1; v < 4; ++v) EXPECT_EQ(r.assignment.cluster_of[v], r.assignment.cluster_of[0]);
    for (NodeId v = 5; v < 8; ++v) EXPECT_EQ(r.assignment.cluster_of[v], r.assignment.cluster_of[4]);
}

TEST(Partition, IsDeterministic) {
    std::mt19937_64 rng(25);
    auto h = Hypergraph::build(fixtures::random_edges(rng, 500, 800, 5), 500);
    auto a = partition(h, 16, 3), b = partition(h, 16, 3);
    EXPECT_EQ(a.assignment.cluster_of, b.assignment.cluster_of);
    EXPECT_EQ(a.cut, b.cut);
}

TEST(Partition, RespectsBalanceBoundWithCoarsening) {
    std::mt19937_64 rng(26);
    for (std::uint32_t k : {2u, 4u, 16u}) {
        auto h = Hypergraph::build(fixtures::random_edges(rng, 600, 900, 4), 600);
        auto r = partition(h, k, 0);
        EXPECT_GT(r.levels, 0u);
        EXPECT_TRUE(is_balanced(r.assignment)) << "k=" << k;
        EXPECT_EQ(r.cut, cut(h, r.assignment));
    }
}

TEST(Partition, QualityWithinBoundOfExhaustiveOptimum) {
    std::mt19937_64 rng(27);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 11;
        auto edges = fixtures::random_edges(rng, n, 1 + rng() % 8, 4);
        auto r = partition(Hypergraph::build(edges, n), 2, trial);
        const auto best = fixtures::optimal_balanced_cut(edges, n, 2, 0.05);
        ASSERT_LE(static_cast<double>(r.cut), 1.5 * static_cast<double>(best)) << "trial " << trial;
        ASSERT_TRUE(is_balanced(r.assignment));
    }
}
