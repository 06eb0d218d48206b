// features.hpp - initial one-hot node/edge features from a cluster assignment
#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hyperquery/hypergraph.hpp"
#include "hyperquery/partitioner.hpp"

namespace hyperquery {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Row-per-item feature table. layer_index is the convolution step the rows
// belong to (0 for bootstrap features).
struct EmbeddingTable {
    Matrix rows;
    int layer_index = 0;

    std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }
    bool all_finite() const { return rows.allFinite(); }
};

enum class EdgePooling {
    majority,  // single cluster id per edge, ties to the lowest id
    multi_hot  // indicator of every cluster the edge spans
};

// h_v^0 = x_v: one-hot of length k at cluster_of[v].
EmbeddingTable node_onehot(const ClusterAssignment& c);

// Majority cluster among the members of each edge, lowest id on ties.
std::vector<ClusterId> edge_cluster_pool(const Hypergraph& h, const ClusterAssignment& c);

// Same rule for an arbitrary node set.
ClusterId majority_cluster(std::span<const NodeId> members, const ClusterAssignment& c);

// h_e^0 for a simple hypergraph: pooled cluster as one-hot (or multi-hot).
EmbeddingTable edge_onehot(const Hypergraph& h, const ClusterAssignment& c,
                           EdgePooling pooling = EdgePooling::majority);

// Knowledge-hypergraph h_e^0 = [onehot(type, |R|), onehot(cluster, k)].
// Edges in `masked` get an all-zero type block.
EmbeddingTable knowledge_edge_init(const KnowledgeHypergraph& kh, const ClusterAssignment& c,
                                   std::optional<EdgeId> mask_edge = std::nullopt,
                                   EdgePooling pooling = EdgePooling::majority);

EmbeddingTable knowledge_edge_init(const Hypergraph& h, std::span<const RelationId> edge_type,
                                   std::size_t num_relations, const ClusterAssignment& c,
                                   std::span<const EdgeId> masked,
                                   EdgePooling pooling = EdgePooling::majority);

}  // namespace hyperquery
