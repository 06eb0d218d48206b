#include <gtest/gtest.h>

#include <random>

#include "hyperquery/features.hpp"
#include "test_support.hpp"

using namespace hyperquery;

namespace {

ClusterAssignment assign(std::vector<ClusterId> c, std::uint32_t k) {
    ClusterAssignment a;
    a.cluster_of = std::move(c);
    a.k = k;
    return a;
}

Eigen::RowVectorXd row(std::initializer_list<double> values) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double v : values) r(i++) = v;
    return r;
}

}  // namespace

TEST(NodeOnehot, PlacesOneAtCluster) {
    auto t = node_onehot(assign({2, 0}, 4));
    EXPECT_EQ(t.dim(), 4u);
    EXPECT_EQ(t.rows.row(0), row({0, 0, 1, 0}));
    EXPECT_EQ(t.layer_index, 0);
    EXPECT_TRUE(t.all_finite());
}

TEST(NodeOnehot, SingleClusterGivesOnes) {
    auto t = node_onehot(assign({0, 0, 0}, 1));
    EXPECT_EQ(t.rows, Matrix::Ones(3, 1));
}

TEST(EdgeClusterPool, StrictMajorityWins) {
    auto c = assign({1, 1, 3}, 4);
    std::vector<NodeId> e{0, 1, 2};
    EXPECT_EQ(majority_cluster(e, c), 1u);
}

TEST(EdgeClusterPool, TieGoesToLowestId) {
    auto c = assign({0, 2}, 3);
    std::vector<NodeId> e{0, 1};
    EXPECT_EQ(majority_cluster(e, c), 0u);
    auto flipped = assign({2, 0}, 3);
    EXPECT_EQ(majority_cluster(e, flipped), 0u);
}

TEST(EdgeClusterPool, UnanimousEdgesKeepTheirCluster) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint32_t k = 1 + rng() % 8;
        const ClusterId q = static_cast<ClusterId>(rng() % k);
        auto h = Hypergraph::build(fixtures::random_edges(rng, 10, 5, 6), 10);
        auto pooled = edge_cluster_pool(h, assign(std::vector<ClusterId>(10, q), k));
        for (ClusterId p : pooled) ASSERT_EQ(p, q);
    }
}

TEST(EdgeOnehot, MultiHotMarksEverySpannedCluster) {
    auto h = Hypergraph::build({{0, 1, 2}});
    auto t = edge_onehot(h, assign({0, 2, 2}, 3), EdgePooling::multi_hot);
    EXPECT_EQ(t.rows.row(0), row({1, 0, 1}));
    auto m = edge_onehot(h, assign({0, 2, 2}, 3));
    EXPECT_EQ(m.rows.row(0), row({0, 0, 1}));
}

TEST(KnowledgeEdgeInit, ConcatenatesTypeAndCluster) {
    KnowledgeHypergraph kh;
    kh.base = Hypergraph::build({{0, 1}});
    for (const char* r : {"r0", "r1", "r2"}) kh.relations.intern(r);
    kh.edge_type = {1};
    auto c = assign({0, 0}, 2);
    EXPECT_EQ(knowledge_edge_init(kh, c).rows.row(0), row({0, 1, 0, 1, 0}));
    EXPECT_EQ(knowledge_edge_init(kh, c, EdgeId{0}).rows.row(0), row({0, 0, 0, 1, 0}));
}

TEST(KnowledgeEdgeInit, WidthIsRelationsPlusClusters) {
    // 8 relations and 16 clusters give 24 columns.
    std::mt19937_64 rng(32);
    KnowledgeHypergraph kh;
    kh.base = Hypergraph::build(fixtures::random_edges(rng, 40, 30, 4), 40);
    for (int r = 0; r < 8; ++r) kh.relations.intern("r" + std::to_string(r));
    for (EdgeId e = 0; e < 30; ++e) kh.edge_type.push_back(e % 8);
    auto c = fixtures::random_assignment(rng, 40, 16);
    auto t = knowledge_edge_init(kh, c);
    EXPECT_EQ(t.dim(), 24u);
    EXPECT_EQ(t.size(), 30u);
    for (Eigen::Index e = 0; e < 30; ++e) EXPECT_DOUBLE_EQ(t.rows.row(e).sum(), 2.0);
}

TEST(KnowledgeEdgeInit, RejectsBadTypes) {
    auto h = Hypergraph::build({{0, 1}});
    auto c = assign({0, 0}, 1);
    std::vector<RelationId> types{3};
    EXPECT_THROW(knowledge_edge_init(h, types, 2, c, {}), HypergraphError);
    std::vector<RelationId> short_types;
    EXPECT_THROW(knowledge_edge_init(h, short_types, 2, c, {}), HypergraphError);
}
