#include "hyperquery/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

namespace hyperquery {

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (ClusterId c : cluster_of) {
        ++sizes.at(c);
    }
    return sizes;
}

std::size_t max_cluster_size(std::size_t n, std::uint32_t k, double epsilon) {
    return static_cast<std::size_t>(std::ceil((1.0 + epsilon) * static_cast<double>(n) / static_cast<double>(k)));
}

bool is_balanced(const ClusterAssignment& c) {
    const std::size_t bound = max_cluster_size(c.num_nodes(), c.k, c.balance_epsilon);
    for (std::size_t s : c.cluster_sizes()) {
        if (s > bound) return false;
    }
    return true;
}

std::uint64_t cut(const Hypergraph& h, const ClusterAssignment& c) {
    if (c.num_nodes() != h.num_nodes()) {
        throw HypergraphError("assignment covers " + std::to_string(c.num_nodes()) + " nodes, hypergraph has " +
                              std::to_string(h.num_nodes()));
    }
    std::vector<EdgeId> seen(c.k, static_cast<EdgeId>(-1));
    std::uint64_t total = 0;
    for (EdgeId e = 0; e < h.num_edges(); ++e) {
        std::uint64_t spanned = 0;
        for (NodeId v : h.edge_members(e)) {
            ClusterId q = c.cluster_of[v];
            if (q >= c.k) throw HypergraphError("cluster id out of range");
            if (seen[q] != e) {
                seen[q] = e;
                ++spanned;
            }
        }
        total += spanned - 1;
    }
    return total;
}

CoarseLevel coarsen(const Hypergraph& h) {
    return coarsen(h, std::vector<std::uint64_t>(h.num_nodes(), 1), std::numeric_limits<std::uint64_t>::max());
}

CoarseLevel coarsen(const Hypergraph& h, const std::vector<std::uint64_t>& fine_weight,
                    std::uint64_t max_group_weight) {
    constexpr std::size_t kMaxGroup = 4;
    const std::size_t n = h.num_nodes();

    std::vector<EdgeId> order(h.num_edges());
    std::iota(order.begin(), order.end(), EdgeId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](EdgeId a, EdgeId b) { return h.edge_size(a) < h.edge_size(b); });

    constexpr NodeId kUnmatched = static_cast<NodeId>(-1);
    std::vector<NodeId> group_of(n, kUnmatched);
    std::vector<std::vector<NodeId>> groups;
    std::vector<NodeId> candidate;
    for (EdgeId e : order) {
        candidate.clear();
        std::uint64_t weight = 0;
        for (NodeId v : h.edge_members(e)) {
            if (group_of[v] != kUnmatched) continue;
            if (weight + fine_weight[v] > max_group_weight) continue;
            candidate.push_back(v);
            weight += fine_weight[v];
            if (candidate.size() == kMaxGroup) break;
        }
        if (candidate.size() < 2) continue;
        for (NodeId v : candidate) group_of[v] = static_cast<NodeId>(groups.size());
        groups.push_back(candidate);
    }
    for (NodeId v = 0; v < n; ++v) {
        if (group_of[v] == kUnmatched) {
            group_of[v] = static_cast<NodeId>(groups.size());
            groups.push_back({v});
        }
    }

    // Renumber groups by their smallest member.
    std::vector<NodeId> rank(groups.size());
    std::iota(rank.begin(), rank.end(), NodeId{0});
    std::sort(rank.begin(), rank.end(), [&](NodeId a, NodeId b) { return groups[a].front() < groups[b].front(); });
    std::vector<NodeId> coarse_id(groups.size());
    for (NodeId i = 0; i < rank.size(); ++i) coarse_id[rank[i]] = i;

    CoarseLevel level;
    level.projection.resize(n);
    level.node_weight.assign(groups.size(), 0);
    for (NodeId v = 0; v < n; ++v) {
        NodeId cv = coarse_id[group_of[v]];
        level.projection[v] = cv;
        level.node_weight[cv] += fine_weight[v];
    }

    std::vector<std::vector<NodeId>> coarse_edges;
    coarse_edges.reserve(h.num_edges());
    std::vector<NodeId> image;
    for (EdgeId e = 0; e < h.num_edges(); ++e) {
        image.clear();
        for (NodeId v : h.edge_members(e)) image.push_back(level.projection[v]);
        std::sort(image.begin(), image.end());
        image.erase(std::unique(image.begin(), image.end()), image.end());
        if (image.size() > 1) coarse_edges.push_back(image);
    }
    level.coarse = Hypergraph::build(coarse_edges, groups.size());
    level.no_progress = groups.size() == n;
    return level;
}

ClusterAssignment project(const CoarseLevel& level, const ClusterAssignment& coarse) {
    ClusterAssignment fine;
    fine.k = coarse.k;
    fine.balance_epsilon = coarse.balance_epsilon;
    fine.cluster_of.resize(level.projection.size());
    for (std::size_t v = 0; v < level.projection.size(); ++v) {
        fine.cluster_of[v] = coarse.cluster_of.at(level.projection[v]);
    }
    return fine;
}

namespace {

// Pin counts per (edge, cluster) plus cluster weights, shared by refinement
// and rebalancing.
class GainState {
public:
    GainState(const Hypergraph& h, const std::vector<std::uint64_t>& weight, const ClusterAssignment& c)
        : h_(h), weight_(weight), k_(c.k), cluster_(c.cluster_of), pins_(h.num_edges() * c.k, 0),
          load_(c.k, 0) {
        for (EdgeId e = 0; e < h.num_edges(); ++e) {
            for (NodeId v : h.edge_members(e)) ++pins_[e * k_ + cluster_[v]];
        }
        for (NodeId v = 0; v < cluster_.size(); ++v) load_[cluster_[v]] += weight_[v];
    }

    // gains[b] = cut reduction of moving v to b (gains[cluster(v)] = 0).
    void gains(NodeId v, std::vector<std::int64_t>& out) const {
        const ClusterId a = cluster_[v];
        out.assign(k_, 0);
        std::int64_t leave = 0;
        for (EdgeId e : h_.node_incidence(v)) {
            const std::uint32_t* p = &pins_[e * k_];
            if (p[a] == 1) ++leave;
            for (ClusterId b = 0; b < k_; ++b) {
                if (p[b] == 0) --out[b];
            }
        }
        for (ClusterId b = 0; b < k_; ++b) out[b] += leave;
        out[a] = 0;
    }

    void move(NodeId v, ClusterId b) {
        const ClusterId a = cluster_[v];
        for (EdgeId e : h_.node_incidence(v)) {
            --pins_[e * k_ + a];
            ++pins_[e * k_ + b];
        }
        load_[a] -= weight_[v];
        load_[b] += weight_[v];
        cluster_[v] = b;
    }

    ClusterId cluster(NodeId v) const { return cluster_[v]; }
    std::uint64_t load(ClusterId c) const { return load_[c]; }
    std::uint64_t weight(NodeId v) const { return weight_[v]; }
    const std::vector<ClusterId>& assignment() const { return cluster_; }

private:
    const Hypergraph& h_;
    const std::vector<std::uint64_t>& weight_;
    std::uint32_t k_;
    std::vector<ClusterId> cluster_;
    std::vector<std::uint32_t> pins_;
    std::vector<std::uint64_t> load_;
};

struct HeapEntry {
    std::int64_t gain;
    NodeId node;
};

struct HeapOrder {
    // max-heap on gain, then min node id
    bool operator()(const HeapEntry& x, const HeapEntry& y) const {
        if (x.gain != y.gain) return x.gain < y.gain;
        return x.node > y.node;
    }
};

// Moves overweight clusters back under `bound`, choosing the best-gain
// feasible move each time. Negative gains are allowed here.
void rebalance(GainState& state, std::size_t n, std::uint32_t k, std::uint64_t bound) {
    std::vector<std::int64_t> g;
    for (;;) {
        ClusterId over = k;
        for (ClusterId c = 0; c < k; ++c) {
            if (state.load(c) > bound && (over == k || state.load(c) > state.load(over))) over = c;
        }
        if (over == k) return;
        bool found = false;
        std::int64_t best_gain = 0;
        NodeId best_node = 0;
        ClusterId best_target = 0;
        for (NodeId v = 0; v < n; ++v) {
            if (state.cluster(v) != over) continue;
            state.gains(v, g);
            for (ClusterId b = 0; b < k; ++b) {
                if (b == over || state.load(b) + state.weight(v) > bound) continue;
                if (!found || g[b] > best_gain) {
                    found = true;
                    best_gain = g[b];
                    best_node = v;
                    best_target = b;
                }
            }
        }
        if (!found) return;
        state.move(best_node, best_target);
    }
}

}  // namespace

ClusterAssignment fm_refine(const Hypergraph& h, const ClusterAssignment& c, std::size_t max_passes,
                            RefineStats* stats) {
    std::vector<std::uint64_t> unit(h.num_nodes(), 1);
    return fm_refine(h, unit, h.num_nodes(), c, max_passes, stats);
}

ClusterAssignment fm_refine(const Hypergraph& h, const std::vector<std::uint64_t>& node_weight,
                            std::uint64_t total_weight, const ClusterAssignment& c, std::size_t max_passes,
                            RefineStats* stats) {
    if (c.num_nodes() != h.num_nodes()) {
        throw HypergraphError("assignment/node-count mismatch in fm_refine");
    }
    const std::size_t n = h.num_nodes();
    const std::uint32_t k = c.k;
    const std::uint64_t bound = max_cluster_size(total_weight, k, c.balance_epsilon);
    GainState state(h, node_weight, c);
    std::uint64_t current_cut = cut(h, c);

    std::vector<std::int64_t> g;
    std::vector<std::vector<NodeId>> blocked(k);
    std::vector<char> is_blocked(std::size_t{k} * n, 0);

    // Best balance-feasible positive move for v; records infeasible positive
    // targets so the node is revisited when that cluster lightens.
    auto evaluate = [&](NodeId v, ClusterId& target) -> std::int64_t {
        state.gains(v, g);
        std::int64_t best = 0;
        target = k;
        for (ClusterId b = 0; b < k; ++b) {
            if (b == state.cluster(v) || g[b] <= 0) continue;
            if (state.load(b) + state.weight(v) > bound) {
                char& flag = is_blocked[std::size_t{b} * n + v];
                if (!flag) {
                    flag = 1;
                    blocked[b].push_back(v);
                }
                continue;
            }
            if (g[b] > best) {
                best = g[b];
                target = b;
            }
        }
        return best;
    };

    // Lazy max-heap: latest[v] is the key of v's live entry (0 = none);
    // entries with any other key are stale and skipped.
    std::vector<char> locked(n);
    std::vector<std::int64_t> latest(n);
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        std::fill(locked.begin(), locked.end(), 0);
        std::fill(latest.begin(), latest.end(), 0);
        std::fill(is_blocked.begin(), is_blocked.end(), 0);
        for (auto& b : blocked) b.clear();
        std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapOrder> heap;
        ClusterId target;

        std::size_t moves_this_pass = 0;
        auto repush = [&](NodeId u) {
            if (locked[u]) return;
            ClusterId t;
            const std::int64_t gain = evaluate(u, t);
            if (gain == latest[u]) return;
            latest[u] = gain;
            if (gain > 0) heap.push({gain, u});
        };
        for (NodeId v = 0; v < n; ++v) repush(v);
        while (!heap.empty()) {
            HeapEntry top = heap.top();
            heap.pop();
            if (locked[top.node] || top.gain != latest[top.node]) continue;
            const std::int64_t gain = evaluate(top.node, target);
            if (gain != top.gain) {
                latest[top.node] = gain;
                if (gain > 0) heap.push({gain, top.node});
                continue;
            }
            const NodeId v = top.node;
            const ClusterId source = state.cluster(v);
            state.move(v, target);
            locked[v] = 1;
            current_cut -= static_cast<std::uint64_t>(gain);
            ++moves_this_pass;

            for (EdgeId e : h.node_incidence(v)) {
                for (NodeId u : h.edge_members(e)) repush(u);
            }
            std::vector<NodeId> waiting;
            waiting.swap(blocked[source]);
            for (NodeId u : waiting) is_blocked[std::size_t{source} * n + u] = 0;
            for (NodeId u : waiting) repush(u);
        }

        if (stats) {
            stats->cut_after_pass.push_back(current_cut);
            stats->moves += moves_this_pass;
        }
        if (moves_this_pass == 0) break;
    }

    ClusterAssignment out = c;
    out.cluster_of = state.assignment();
    return out;
}

namespace {

// Refined starts at the coarsest level; tiny levels get more of them.
constexpr std::size_t kCoarseStarts = 8;
constexpr std::size_t kSmallLevelStarts = 64;
constexpr std::size_t kSmallLevelNodes = 64;

ClusterAssignment initial_partition(const Hypergraph& h, const std::vector<std::uint64_t>& weight,
                                    std::uint64_t total_weight, std::uint32_t k, double epsilon,
                                    bool randomized, std::uint64_t seed, bool by_degree = true) {
    const std::size_t n = h.num_nodes();
    const std::uint64_t bound = max_cluster_size(total_weight, k, epsilon);
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    if (randomized) {
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    if (by_degree) {
        std::stable_sort(order.begin(), order.end(),
                         [&](NodeId a, NodeId b) { return h.node_degree(a) > h.node_degree(b); });
    }

    ClusterAssignment c;
    c.k = k;
    c.balance_epsilon = epsilon;
    c.cluster_of.assign(n, 0);
    std::vector<std::uint64_t> load(k, 0);
    ClusterId next = 0;
    for (NodeId v : order) {
        ClusterId chosen = k;
        for (ClusterId step = 0; step < k; ++step) {
            ClusterId q = (next + step) % k;
            if (load[q] + weight[v] <= bound) {
                chosen = q;
                break;
            }
        }
        if (chosen == k) {
            chosen = static_cast<ClusterId>(std::min_element(load.begin(), load.end()) - load.begin());
        }
        c.cluster_of[v] = chosen;
        load[chosen] += weight[v];
        next = (chosen + 1) % k;
    }
    return c;
}

// Exchanges node pairs across clusters while some exchange lowers the cut.
// Single moves stall when every cluster sits at the balance bound; swaps keep
// the loads (nearly) fixed. Quadratic, so only used on the coarsest level.
void swap_refine(const Hypergraph& h, const std::vector<std::uint64_t>& weight, std::uint64_t bound,
                 ClusterAssignment& c, std::size_t max_passes) {
    const std::size_t n = h.num_nodes();
    GainState state(h, weight, c);
    std::vector<std::int64_t> g;
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        bool improved = false;
        for (NodeId u = 0; u < n; ++u) {
            for (NodeId v = u + 1; v < n; ++v) {
                const ClusterId a = state.cluster(u), b = state.cluster(v);
                if (a == b) continue;
                if (state.load(b) - weight[v] + weight[u] > bound || state.load(a) - weight[u] + weight[v] > bound) {
                    continue;
                }
                state.gains(u, g);
                const std::int64_t first = g[b];
                state.move(u, b);
                state.gains(v, g);
                if (first + g[a] > 0) {
                    state.move(v, a);
                    improved = true;
                } else {
                    state.move(u, a);
                }
            }
        }
        if (!improved) break;
    }
    c.cluster_of = state.assignment();
}

ClusterAssignment refine_level(const Hypergraph& h, const std::vector<std::uint64_t>& weight,
                               std::uint64_t total_weight, ClusterAssignment c, std::size_t max_passes) {
    const std::uint64_t bound = max_cluster_size(total_weight, c.k, c.balance_epsilon);
    {
        GainState state(h, weight, c);
        rebalance(state, h.num_nodes(), c.k, bound);
        c.cluster_of = state.assignment();
    }
    return fm_refine(h, weight, total_weight, c, max_passes);
}

}  // namespace

PartitionResult partition(const Hypergraph& h, std::uint32_t k, std::uint64_t seed,
                          const PartitionOptions& options) {
    const std::size_t n = h.num_nodes();
    if (k == 0) throw HypergraphError("k must be at least 1");
    if (k > n) {
        throw HypergraphError("k = " + std::to_string(k) + " exceeds node count " + std::to_string(n));
    }

    PartitionResult result;
    if (k == 1) {
        result.assignment.k = 1;
        result.assignment.balance_epsilon = options.epsilon;
        result.assignment.cluster_of.assign(n, 0);
        return result;
    }

    const std::uint64_t total = n;
    const std::size_t floor_nodes = std::max<std::size_t>(20 * std::size_t{k}, 200);
    const std::uint64_t group_cap = std::max<std::uint64_t>(1, max_cluster_size(n, k, options.epsilon) / 4);

    std::vector<CoarseLevel> levels;
    std::vector<std::vector<std::uint64_t>> fine_weights{std::vector<std::uint64_t>(n, 1)};
    const Hypergraph* current = &h;
    while (current->num_nodes() > floor_nodes) {
        CoarseLevel level = coarsen(*current, fine_weights.back(), group_cap);
        if (level.no_progress) break;
        const bool stalled = level.coarse.num_nodes() * 100 > current->num_nodes() * 99;
        fine_weights.push_back(level.node_weight);
        levels.push_back(std::move(level));
        current = &levels.back().coarse;
        if (stalled) break;
    }

    // Coarsest level: the degree-ordered round-robin start plus a few seeded
    // shuffled starts, each refined, keeping the lowest cut (first on ties).
    const auto& coarse_weight = fine_weights.back();
    const std::uint64_t bound = max_cluster_size(total, k, options.epsilon);
    ClusterAssignment c;
    std::uint64_t best_cut = std::numeric_limits<std::uint64_t>::max();
    const std::size_t starts = current->num_nodes() <= kSmallLevelNodes ? kSmallLevelStarts : kCoarseStarts;
    for (std::size_t start = 0; start < starts; ++start) {
        const bool shuffled = options.randomized_initial || start > 0;
        ClusterAssignment candidate = initial_partition(*current, coarse_weight, total, k, options.epsilon, shuffled,
                                                        seed + start, start == 0);
        candidate = refine_level(*current, coarse_weight, total, std::move(candidate), options.max_passes);
        swap_refine(*current, coarse_weight, bound, candidate, options.max_passes);
        candidate = fm_refine(*current, coarse_weight, total, candidate, options.max_passes);
        const std::uint64_t candidate_cut = cut(*current, candidate);
        if (candidate_cut < best_cut) {
            best_cut = candidate_cut;
            c = std::move(candidate);
        }
    }
    for (std::size_t i = levels.size(); i-- > 0;) {
        const Hypergraph& fine = i == 0 ? h : levels[i - 1].coarse;
        c = project(levels[i], c);
        c = refine_level(fine, fine_weights[i], total, std::move(c), options.max_passes);
    }

    result.assignment = std::move(c);
    result.cut = cut(h, result.assignment);
    result.levels = levels.size();
    return result;
}

}  // namespace hyperquery
