#include "hyperquery/features.hpp"

#include <algorithm>

namespace hyperquery {

EmbeddingTable node_onehot(const ClusterAssignment& c) {
    EmbeddingTable t;
    t.rows = Matrix::Zero(static_cast<Eigen::Index>(c.num_nodes()), c.k);
    for (std::size_t v = 0; v < c.num_nodes(); ++v) {
        t.rows(static_cast<Eigen::Index>(v), c.cluster_of[v]) = 1.0;
    }
    return t;
}

ClusterId majority_cluster(std::span<const NodeId> members, const ClusterAssignment& c) {
    std::vector<std::uint32_t> votes(c.k, 0);
    for (NodeId v : members) ++votes.at(c.cluster_of.at(v));
    // max_element returns the first maximum, i.e. the lowest cluster id.
    return static_cast<ClusterId>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::vector<ClusterId> edge_cluster_pool(const Hypergraph& h, const ClusterAssignment& c) {
    std::vector<ClusterId> out(h.num_edges());
    for (EdgeId e = 0; e < h.num_edges(); ++e) out[e] = majority_cluster(h.edge_members(e), c);
    return out;
}

namespace {

void write_cluster_block(Matrix& rows, const Hypergraph& h, const ClusterAssignment& c, Eigen::Index offset,
                         EdgePooling pooling) {
    if (pooling == EdgePooling::majority) {
        auto pooled = edge_cluster_pool(h, c);
        for (EdgeId e = 0; e < h.num_edges(); ++e) rows(e, offset + pooled[e]) = 1.0;
    } else {
        for (EdgeId e = 0; e < h.num_edges(); ++e) {
            for (NodeId v : h.edge_members(e)) rows(e, offset + c.cluster_of[v]) = 1.0;
        }
    }
}

}  // namespace

EmbeddingTable edge_onehot(const Hypergraph& h, const ClusterAssignment& c, EdgePooling pooling) {
    EmbeddingTable t;
    t.rows = Matrix::Zero(static_cast<Eigen::Index>(h.num_edges()), c.k);
    write_cluster_block(t.rows, h, c, 0, pooling);
    return t;
}

EmbeddingTable knowledge_edge_init(const KnowledgeHypergraph& kh, const ClusterAssignment& c,
                                   std::optional<EdgeId> mask_edge, EdgePooling pooling) {
    std::vector<EdgeId> masked;
    if (mask_edge) masked.push_back(*mask_edge);
    return knowledge_edge_init(kh.base, kh.edge_type, kh.num_relations(), c, masked, pooling);
}

EmbeddingTable knowledge_edge_init(const Hypergraph& h, std::span<const RelationId> edge_type,
                                   std::size_t num_relations, const ClusterAssignment& c,
                                   std::span<const EdgeId> masked, EdgePooling pooling) {
    if (edge_type.size() != h.num_edges()) {
        throw HypergraphError("edge_type length does not match edge count");
    }
    const auto r = static_cast<Eigen::Index>(num_relations);
    EmbeddingTable t;
    t.rows = Matrix::Zero(static_cast<Eigen::Index>(h.num_edges()), r + c.k);
    for (EdgeId e = 0; e < h.num_edges(); ++e) {
        if (edge_type[e] >= num_relations) throw HypergraphError("edge type out of range");
        t.rows(e, edge_type[e]) = 1.0;
    }
    for (EdgeId e : masked) t.rows.row(e).head(r).setZero();
    write_cluster_block(t.rows, h, c, r, pooling);
    return t;
}

}  // namespace hyperquery
