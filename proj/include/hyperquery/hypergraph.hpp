// hypergraph.hpp - immutable hypergraph with incidence stored in both directions
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hyperquery {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;
using RelationId = std::uint32_t;

class HypergraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// CSR-style incidence. edge_members(e) and node_incidence(v) are sorted and
// exact transposes of each other.
class Hypergraph {
public:
    Hypergraph() = default;

    // Builds from member lists. Duplicate ids inside an edge are dropped and
    // counted in duplicate_count(). num_nodes == 0 means "max id + 1".
    static Hypergraph build(const std::vector<std::vector<NodeId>>& edges, std::size_t num_nodes = 0);

    std::size_t num_nodes() const { return node_offsets_.empty() ? 0 : node_offsets_.size() - 1; }
    std::size_t num_edges() const { return edge_offsets_.empty() ? 0 : edge_offsets_.size() - 1; }
    std::size_t total_incidence() const { return edge_pins_.size(); }

    std::span<const NodeId> edge_members(EdgeId e) const {
        return {edge_pins_.data() + edge_offsets_[e], edge_offsets_[e + 1] - edge_offsets_[e]};
    }
    std::span<const EdgeId> node_incidence(NodeId v) const {
        return {node_pins_.data() + node_offsets_[v], node_offsets_[v + 1] - node_offsets_[v]};
    }
    std::size_t edge_size(EdgeId e) const { return edge_offsets_[e + 1] - edge_offsets_[e]; }
    std::size_t node_degree(NodeId v) const { return node_offsets_[v + 1] - node_offsets_[v]; }

    // Number of repeated node ids dropped while building.
    std::size_t duplicate_count() const { return duplicates_dropped_; }

    std::vector<std::vector<NodeId>> edge_lists() const;

    friend bool operator==(const Hypergraph&, const Hypergraph&) = default;

private:
    std::vector<std::size_t> edge_offsets_;
    std::vector<NodeId> edge_pins_;
    std::vector<std::size_t> node_offsets_;
    std::vector<EdgeId> node_pins_;
    std::size_t duplicates_dropped_ = 0;
};

// Convenience wrapper matching the loader-facing name.
inline Hypergraph build_hypergraph(const std::vector<std::vector<NodeId>>& edges, std::size_t num_nodes = 0) {
    return Hypergraph::build(edges, num_nodes);
}

struct DegreeStats {
    std::size_t max_node_degree = 0;
    std::size_t max_edge_size = 0;
    std::size_t total_incidence = 0;

    friend bool operator==(const DegreeStats&, const DegreeStats&) = default;
};

DegreeStats degree_stats(const Hypergraph& h);

// Bidirectional name <-> dense id map; ids assigned in first-seen order.
class Vocabulary {
public:
    std::uint32_t intern(const std::string& name);
    std::uint32_t id(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.contains(name); }
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

struct KnowledgeHypergraph {
    Hypergraph base;
    std::vector<RelationId> edge_type;
    Vocabulary relations;
    Vocabulary entities;

    std::size_t num_relations() const { return relations.size(); }

    // Checks edge_type length and range against the relation vocabulary.
    void validate() const;
};

}  // namespace hyperquery
