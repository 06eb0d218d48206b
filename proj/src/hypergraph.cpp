#include "hyperquery/hypergraph.hpp"

#include <algorithm>

namespace hyperquery {

Hypergraph Hypergraph::build(const std::vector<std::vector<NodeId>>& edges, std::size_t num_nodes) {
    Hypergraph h;
    std::size_t max_id_plus_one = 0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].empty()) {
            throw HypergraphError("empty edge at index " + std::to_string(e));
        }
        for (NodeId v : edges[e]) {
            max_id_plus_one = std::max<std::size_t>(max_id_plus_one, std::size_t{v} + 1);
        }
    }
    if (num_nodes == 0) {
        num_nodes = max_id_plus_one;
    } else if (max_id_plus_one > num_nodes) {
        throw HypergraphError("node id " + std::to_string(max_id_plus_one - 1) + " out of range for " +
                              std::to_string(num_nodes) + " nodes");
    }

    h.edge_offsets_.reserve(edges.size() + 1);
    h.edge_offsets_.push_back(0);
    std::vector<NodeId> members;
    for (const auto& edge : edges) {
        members.assign(edge.begin(), edge.end());
        std::sort(members.begin(), members.end());
        auto last = std::unique(members.begin(), members.end());
        h.duplicates_dropped_ += static_cast<std::size_t>(members.end() - last);
        members.erase(last, members.end());
        h.edge_pins_.insert(h.edge_pins_.end(), members.begin(), members.end());
        h.edge_offsets_.push_back(h.edge_pins_.size());
    }

    // Transpose by counting sort; edges are visited in ascending id so each
    // node's incidence list comes out sorted.
    h.node_offsets_.assign(num_nodes + 1, 0);
    for (NodeId v : h.edge_pins_) {
        ++h.node_offsets_[v + 1];
    }
    for (std::size_t v = 0; v < num_nodes; ++v) {
        h.node_offsets_[v + 1] += h.node_offsets_[v];
    }
    h.node_pins_.resize(h.edge_pins_.size());
    std::vector<std::size_t> cursor(h.node_offsets_.begin(), h.node_offsets_.end() - 1);
    for (EdgeId e = 0; e < edges.size(); ++e) {
        for (std::size_t i = h.edge_offsets_[e]; i < h.edge_offsets_[e + 1]; ++i) {
            h.node_pins_[cursor[h.edge_pins_[i]]++] = e;
        }
    }
    return h;
}

std::vector<std::vector<NodeId>> Hypergraph::edge_lists() const {
    std::vector<std::vector<NodeId>> out(num_edges());
    for (EdgeId e = 0; e < num_edges(); ++e) {
        auto m = edge_members(e);
        out[e].assign(m.begin(), m.end());
    }
    return out;
}

DegreeStats degree_stats(const Hypergraph& h) {
    DegreeStats s;
    s.total_incidence = h.total_incidence();
    for (EdgeId e = 0; e < h.num_edges(); ++e) {
        s.max_edge_size = std::max(s.max_edge_size, h.edge_size(e));
    }
    for (NodeId v = 0; v < h.num_nodes(); ++v) {
        s.max_node_degree = std::max(s.max_node_degree, h.node_degree(v));
    }
    return s;
}

std::uint32_t Vocabulary::intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) {
        names_.push_back(name);
    }
    return it->second;
}

std::uint32_t Vocabulary::id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw HypergraphError("unknown name '" + name + "'");
    }
    return it->second;
}

void KnowledgeHypergraph::validate() const {
    if (edge_type.size() != base.num_edges()) {
        throw HypergraphError("edge_type has " + std::to_string(edge_type.size()) + " entries for " +
                              std::to_string(base.num_edges()) + " edges");
    }
    RelationId max_type = 0;
    for (RelationId r : edge_type) {
        if (r >= relations.size()) {
            throw HypergraphError("relation id " + std::to_string(r) + " outside vocabulary");
        }
        max_type = std::max(max_type, r);
    }
    if (!edge_type.empty() && relations.size() != std::size_t{max_type} + 1) {
        throw HypergraphError("relation vocabulary size does not match max edge type + 1");
    }
}

}  // namespace hyperquery
