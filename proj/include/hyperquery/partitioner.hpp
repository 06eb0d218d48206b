// partitioner.hpp - deterministic multilevel k-way partitioner for the
// connectivity-minus-one cut objective.
#pragma once

#include <cstdint>
#include <vector>

#include "hyperquery/hypergraph.hpp"

namespace hyperquery {

using ClusterId = std::uint32_t;

struct ClusterAssignment {
    std::vector<ClusterId> cluster_of;
    std::uint32_t k = 1;
    double balance_epsilon = 0.05;

    std::size_t num_nodes() const { return cluster_of.size(); }
    std::vector<std::size_t> cluster_sizes() const;
};

// ceil((1 + epsilon) * n / k)
std::size_t max_cluster_size(std::size_t n, std::uint32_t k, double epsilon);

bool is_balanced(const ClusterAssignment& c);

// Sum over edges of (number of distinct clusters spanned - 1).
std::uint64_t cut(const Hypergraph& h, const ClusterAssignment& c);

struct CoarseLevel {
    Hypergraph coarse;
    std::vector<NodeId> projection;       // fine node -> coarse node
    std::vector<std::uint64_t> node_weight;  // coarse node -> number of original nodes
    bool no_progress = false;
};

// One round of size-ordered multi-node matching. Unit fine weights.
CoarseLevel coarsen(const Hypergraph& h);

// Weighted variant used between levels; groups never exceed max_group_weight.
CoarseLevel coarsen(const Hypergraph& h, const std::vector<std::uint64_t>& fine_weight,
                    std::uint64_t max_group_weight);

// Lift a coarse assignment back to the fine nodes of `level`.
ClusterAssignment project(const CoarseLevel& level, const ClusterAssignment& coarse);

struct RefineStats {
    std::vector<std::uint64_t> cut_after_pass;
    std::size_t moves = 0;
};

ClusterAssignment fm_refine(const Hypergraph& h, const ClusterAssignment& c, std::size_t max_passes = 8,
                            RefineStats* stats = nullptr);

// Weighted refinement; balance is enforced on summed node weight with the
// bound computed from total_weight.
ClusterAssignment fm_refine(const Hypergraph& h, const std::vector<std::uint64_t>& node_weight,
                            std::uint64_t total_weight, const ClusterAssignment& c, std::size_t max_passes,
                            RefineStats* stats = nullptr);

struct PartitionOptions {
    double epsilon = 0.05;
    std::size_t max_passes = 8;
    // Off by default: shuffles equal-weight ties of the initial order with `seed`.
    bool randomized_initial = false;
};

struct PartitionResult {
    ClusterAssignment assignment;
    std::uint64_t cut = 0;
    std::size_t levels = 0;
};

PartitionResult partition(const Hypergraph& h, std::uint32_t k, std::uint64_t seed,
                          const PartitionOptions& options = {});

}  // namespace hyperquery
