// test_support.hpp - random generators, planted datasets and brute-force
// oracles shared by the unit tests and the acceptance runner
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hyperquery/hypergraph.hpp"
#include "hyperquery/partitioner.hpp"
#include "hyperquery/train.hpp"

namespace hyperquery::fixtures {

inline std::vector<std::vector<NodeId>> random_edges(std::mt19937_64& rng, std::size_t n, std::size_t m,
                                                     std::size_t max_size, std::size_t min_size = 1) {
    std::uniform_int_distribution<std::size_t> size_dist(min_size, std::min(max_size, n));
    std::vector<NodeId> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::vector<NodeId>> edges;
    for (std::size_t e = 0; e < m; ++e) {
        std::shuffle(all.begin(), all.end(), rng);
        edges.emplace_back(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size_dist(rng)));
    }
    return edges;
}

inline ClusterAssignment random_assignment(std::mt19937_64& rng, std::size_t n, std::uint32_t k) {
    std::uniform_int_distribution<ClusterId> d(0, k - 1);
    ClusterAssignment c;
    c.k = k;
    c.cluster_of.resize(n);
    for (auto& x : c.cluster_of) x = d(rng);
    return c;
}

// Recount with ordered sets, independent of the library's pin counting.
inline std::uint64_t cut_oracle(const std::vector<std::vector<NodeId>>& edges, const std::vector<ClusterId>& c) {
    std::uint64_t total = 0;
    for (const auto& e : edges) {
        std::set<ClusterId> spanned;
        for (NodeId v : e) spanned.insert(c[v]);
        total += spanned.size() - 1;
    }
    return total;
}

// Best cut over every assignment whose clusters respect the size bound.
inline std::uint64_t optimal_balanced_cut(const std::vector<std::vector<NodeId>>& edges, std::size_t n,
                                          std::uint32_t k, double epsilon) {
    const std::size_t bound = static_cast<std::size_t>(std::ceil((1.0 + epsilon) * static_cast<double>(n) / k));
    std::vector<ClusterId> c(n, 0);
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= k;
    for (std::uint64_t code = 0; code < total; ++code) {
        std::uint64_t x = code;
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = static_cast<ClusterId>(x % k);
            x /= k;
            ++sizes[c[i]];
        }
        if (*std::max_element(sizes.begin(), sizes.end()) > bound) continue;
        best = std::min(best, cut_oracle(edges, c));
    }
    return best;
}

// 1 + position of the true item after sorting descending with the true item
// placed behind every equal score.
inline std::size_t rank_oracle(const std::vector<double>& scores, std::size_t true_id) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if ((a == true_id) != (b == true_id)) return b == true_id;
        return a < b;
    });
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), true_id) - order.begin()) + 1;
}

inline double auc_oracle(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos) {
        for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Two communities of n/2 nodes; every edge (size 3..5) stays inside one.
inline SimpleDataset planted_communities(std::size_t n, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> size_dist(3, 5);
    const std::size_t half = n / 2;
    std::vector<NodeId> side[2];
    for (NodeId v = 0; v < n; ++v) side[v < half ? 0 : 1].push_back(v);
    std::vector<std::vector<NodeId>> edges;
    for (std::size_t e = 0; e < m; ++e) {
        auto& pool = side[e % 2];
        std::shuffle(pool.begin(), pool.end(), rng);
        edges.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size_dist(rng)));
    }
    SimpleDataset d;
    d.graph = Hypergraph::build(edges, n);
    for (std::size_t v = 0; v < n; ++v) d.nodes.intern("n" + std::to_string(v));
    d.split = split_edges(m, 0.7, 0.1, seed);
    return d;
}

// `communities` groups of `per_community` entities; each fact stays inside a
// group and its relation is the group index.
inline KnowledgeDataset planted_knowledge(std::size_t communities, std::size_t per_community, std::size_t m,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> size_dist(2, 4);
    KnowledgeDataset d;
    for (std::size_t r = 0; r < communities; ++r) d.graph.relations.intern("rel" + std::to_string(r));
    for (std::size_t v = 0; v < communities * per_community; ++v) d.graph.entities.intern("e" + std::to_string(v));
    std::vector<std::vector<NodeId>> edges;
    std::vector<NodeId> pool(per_community);
    for (std::size_t e = 0; e < m; ++e) {
        const std::size_t r = e % communities;
        std::iota(pool.begin(), pool.end(), static_cast<NodeId>(r * per_community));
        std::shuffle(pool.begin(), pool.end(), rng);
        edges.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size_dist(rng)));
        d.graph.edge_type.push_back(static_cast<RelationId>(r));
    }
    d.graph.base = Hypergraph::build(edges, communities * per_community);
    d.split = split_edges(m, 0.7, 0.1, seed);
    return d;
}

}  // namespace hyperquery::fixtures
