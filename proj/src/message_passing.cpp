#include "hyperquery/message_passing.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hyperquery {

std::string to_string(OmegaKind kind) {
    switch (kind) {
        case OmegaKind::mean: return "mean";
        case OmegaKind::var: return "var";
        case OmegaKind::minmax: return "minmax";
    }
    return "?";
}

OmegaKind parse_omega(const std::string& name) {
    if (name == "mean") return OmegaKind::mean;
    if (name == "var") return OmegaKind::var;
    if (name == "minmax") return OmegaKind::minmax;
    throw std::invalid_argument("unknown omega kind '" + name + "'");
}

std::size_t E2EModel::output_dim() const {
    return readout ? static_cast<std::size_t>(readout->weight.rows()) : layer2.out_dim();
}

namespace {

using Index = Eigen::Index;

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
    }
    return m;
}

std::size_t pooled_dim(std::size_t d, bool bilinear) { return bilinear ? d * d : d; }

void omega_into(OmegaKind kind, const Matrix& x, std::span<const std::size_t> rows, OmegaCache& out,
                bool keep_args) {
    if (rows.empty()) throw std::invalid_argument("omega over an empty set");
    const Index d = x.cols();
    const double n = static_cast<double>(rows.size());
    out.value.setZero(d);
    switch (kind) {
        case OmegaKind::mean:
            for (std::size_t r : rows) out.value += x.row(static_cast<Index>(r)).transpose();
            out.value /= n;
            break;
        case OmegaKind::var: {
            Vector mu = Vector::Zero(d);
            for (std::size_t r : rows) mu += x.row(static_cast<Index>(r)).transpose();
            mu /= n;
            for (std::size_t r : rows) {
                out.value += (x.row(static_cast<Index>(r)).transpose() - mu).cwiseAbs2();
            }
            out.value /= n;
            break;
        }
        case OmegaKind::minmax: {
            if (keep_args) {
                out.arg_max.assign(static_cast<std::size_t>(d), 0);
                out.arg_min.assign(static_cast<std::size_t>(d), 0);
            }
            for (Index l = 0; l < d; ++l) {
                std::size_t hi = 0, lo = 0;
                for (std::size_t i = 1; i < rows.size(); ++i) {
                    const double v = x(static_cast<Index>(rows[i]), l);
                    // strict comparisons keep the first (lowest) index on ties
                    if (v > x(static_cast<Index>(rows[hi]), l)) hi = i;
                    if (v < x(static_cast<Index>(rows[lo]), l)) lo = i;
                }
                out.value(l) = x(static_cast<Index>(rows[hi]), l) - x(static_cast<Index>(rows[lo]), l);
                if (keep_args) {
                    out.arg_max[static_cast<std::size_t>(l)] = rows[hi];
                    out.arg_min[static_cast<std::size_t>(l)] = rows[lo];
                }
            }
            break;
        }
    }
}

// Scatter d(loss)/d(omega) back onto the member rows of grad.
void omega_backward(OmegaKind kind, const Matrix& x, std::span<const std::size_t> rows, const OmegaCache& cache,
                    const Vector& d_omega, Matrix& grad) {
    const double n = static_cast<double>(rows.size());
    switch (kind) {
        case OmegaKind::mean:
            for (std::size_t r : rows) grad.row(static_cast<Index>(r)) += d_omega.transpose() / n;
            break;
        case OmegaKind::var: {
            Vector mu = Vector::Zero(x.cols());
            for (std::size_t r : rows) mu += x.row(static_cast<Index>(r)).transpose();
            mu /= n;
            for (std::size_t r : rows) {
                grad.row(static_cast<Index>(r)) +=
                    (2.0 / n) * d_omega.cwiseProduct(x.row(static_cast<Index>(r)).transpose() - mu).transpose();
            }
            break;
        }
        case OmegaKind::minmax:
            for (Index l = 0; l < x.cols(); ++l) {
                grad(static_cast<Index>(cache.arg_max[static_cast<std::size_t>(l)]), l) += d_omega(l);
                grad(static_cast<Index>(cache.arg_min[static_cast<std::size_t>(l)]), l) -= d_omega(l);
            }
            break;
    }
}

void write_pooled(const Vector& w, bool bilinear, Eigen::Ref<Eigen::RowVectorXd> out) {
    const Index d = w.size();
    if (!bilinear) {
        out = w.transpose();
        return;
    }
    for (Index i = 0; i < d; ++i) {
        out.segment(i * d, d) = w(i) * w.transpose();
    }
}

// d(flat(w w^T))/dw applied to an upstream row.
Vector pooled_backward(const Vector& w, bool bilinear, const Eigen::Ref<const Eigen::RowVectorXd>& d_flat) {
    if (!bilinear) return d_flat.transpose();
    const Index d = w.size();
    Eigen::Map<const Matrix> g(d_flat.data(), d, d);
    return (g + g.transpose()) * w;
}

void aggregate(Aggregation agg, const Matrix& src, std::span<const std::size_t> rows,
               Eigen::Ref<Eigen::RowVectorXd> out) {
    out.setZero();
    if (rows.empty()) return;
    const double n = static_cast<double>(rows.size());
    if (agg == Aggregation::mean) {
        for (std::size_t r : rows) out += src.row(static_cast<Index>(r));
        out /= n;
    } else {
        for (std::size_t r : rows) out += (src.row(static_cast<Index>(r)).array() + kHarmonicEpsilon).inverse().matrix();
        out = (n / out.array()).matrix();
    }
}

void aggregate_backward(Aggregation agg, const Matrix& src, std::span<const std::size_t> rows,
                        const Eigen::Ref<const Eigen::RowVectorXd>& value,
                        const Eigen::Ref<const Eigen::RowVectorXd>& d_value, Matrix& d_src) {
    if (rows.empty()) return;
    const double n = static_cast<double>(rows.size());
    if (agg == Aggregation::mean) {
        for (std::size_t r : rows) d_src.row(static_cast<Index>(r)) += d_value / n;
    } else {
        for (std::size_t r : rows) {
            auto shifted = src.row(static_cast<Index>(r)).array() + kHarmonicEpsilon;
            d_src.row(static_cast<Index>(r)) +=
                (d_value.array() * value.array().square() / (n * shifted.square())).matrix();
        }
    }
}

void activate(Activation act, const Matrix& z, Matrix& a) {
    a = act == Activation::relu ? Matrix(z.cwiseMax(0.0)) : z;
}

void activation_backward(Activation act, const Matrix& z, Matrix& grad) {
    if (act == Activation::identity) return;
    grad = grad.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
}

constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

bool is_excluded(std::span<const char> excluded, EdgeId e) { return !excluded.empty() && excluded[e]; }

}  // namespace

E2EModel make_model(const ConvSettings& conv, std::size_t edge_dim, std::size_t node_x_dim, std::size_t hidden_dim,
                    std::size_t layer2_dim, std::optional<std::size_t> readout_classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    E2EModel m;
    m.conv = conv;
    const std::size_t d1 = edge_dim + node_x_dim;
    const std::size_t d2 = hidden_dim + node_x_dim;
    m.layer1.weight = glorot(hidden_dim, pooled_dim(d1, conv.bilinear), rng);
    m.layer1.activation = Activation::relu;
    m.layer2.weight = glorot(layer2_dim, pooled_dim(d2, conv.bilinear), rng);
    if (readout_classes) {
        m.layer2.activation = Activation::relu;
        Readout r;
        r.weight = glorot(*readout_classes, layer2_dim, rng);
        r.bias = Vector::Zero(static_cast<Index>(*readout_classes));
        m.readout = std::move(r);
    } else {
        m.layer2.activation = Activation::identity;
    }
    return m;
}

Vector omega(OmegaKind kind, const Matrix& vectors, std::span<const std::size_t> rows) {
    OmegaCache c;
    omega_into(kind, vectors, rows, c, false);
    return c.value;
}

Vector omega(OmegaKind kind, const std::vector<Vector>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("omega over an empty set");
    Matrix x(static_cast<Index>(vectors.size()), vectors.front().size());
    std::vector<std::size_t> rows(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != x.cols()) throw std::invalid_argument("omega over vectors of mixed dimension");
        x.row(static_cast<Index>(i)) = vectors[i].transpose();
        rows[i] = i;
    }
    return omega(kind, x, rows);
}

Vector bilinear_flat(const Vector& v) {
    Eigen::RowVectorXd out(v.size() * v.size());
    write_pooled(v, true, out);
    return out.transpose();
}

std::vector<NodeId> canonical_set(std::span<const NodeId> members) {
    if (members.empty()) throw std::invalid_argument("empty node set");
    std::vector<NodeId> s(members.begin(), members.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

Matrix e2n(const Hypergraph& h, const Matrix& edge_features, const Matrix& node_x, Aggregation aggregation,
           std::span<const char> excluded) {
    if (static_cast<std::size_t>(edge_features.rows()) != h.num_edges() ||
        static_cast<std::size_t>(node_x.rows()) != h.num_nodes()) {
        throw std::invalid_argument("e2n: feature table does not match hypergraph");
    }
    const Index de = edge_features.cols();
    Matrix out(static_cast<Index>(h.num_nodes()), de + node_x.cols());
    std::vector<std::size_t> rows;
    for (NodeId v = 0; v < h.num_nodes(); ++v) {
        rows.clear();
        for (EdgeId e : h.node_incidence(v)) {
            if (!is_excluded(excluded, e)) rows.push_back(e);
        }
        aggregate(aggregation, edge_features, rows, out.row(v).head(de));
        out.row(v).tail(node_x.cols()) = node_x.row(v);
    }
    return out;
}

Matrix n2e(const LayerParams& params, OmegaKind kind, bool bilinear, const Matrix& node_features,
           const std::vector<std::vector<NodeId>>& target_sets) {
    const std::size_t d = static_cast<std::size_t>(node_features.cols());
    if (pooled_dim(d, bilinear) != params.in_dim()) {
        throw std::invalid_argument("n2e: weight has " + std::to_string(params.in_dim()) + " columns, expected " +
                                    std::to_string(pooled_dim(d, bilinear)));
    }
    Matrix f(static_cast<Index>(target_sets.size()), static_cast<Index>(params.in_dim()));
    OmegaCache oc;
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < target_sets.size(); ++t) {
        auto set = canonical_set(target_sets[t]);
        rows.assign(set.begin(), set.end());
        for (std::size_t r : rows) {
            if (r >= static_cast<std::size_t>(node_features.rows())) throw std::out_of_range("n2e: node id");
        }
        omega_into(kind, node_features, rows, oc, false);
        write_pooled(oc.value, bilinear, f.row(static_cast<Index>(t)));
    }
    Matrix z = f * params.weight.transpose();
    Matrix a;
    activate(params.activation, z, a);
    return a;
}

ForwardResult e2e_forward(const E2EModel& model, const E2EInputs& inputs,
                          const std::vector<std::vector<NodeId>>& targets) {
    const Hypergraph& h = *inputs.structure;
    const Matrix& edge_init = *inputs.edge_init;
    const Matrix& node_x = *inputs.node_x;
    const std::size_t n = h.num_nodes();
    const std::size_t m = h.num_edges();
    if (static_cast<std::size_t>(edge_init.rows()) != m || static_cast<std::size_t>(node_x.rows()) != n) {
        throw std::invalid_argument("e2e_forward: feature tables do not match the hypergraph");
    }
    if (!inputs.excluded.empty() && inputs.excluded.size() != m) {
        throw std::invalid_argument("e2e_forward: exclusion mask size mismatch");
    }
    const bool bilinear = model.conv.bilinear;
    const Index de = edge_init.cols();
    const Index kx = node_x.cols();
    const Index d1 = de + kx;
    const Index hidden = static_cast<Index>(model.layer1.out_dim());
    const Index d2 = hidden + kx;
    if (pooled_dim(static_cast<std::size_t>(d1), bilinear) != model.layer1.in_dim() ||
        pooled_dim(static_cast<std::size_t>(d2), bilinear) != model.layer2.in_dim()) {
        throw std::invalid_argument("e2e_forward: model dimensions do not match the inputs");
    }
    if (model.readout && static_cast<std::size_t>(model.readout->weight.cols()) != model.layer2.out_dim()) {
        throw std::invalid_argument("e2e_forward: readout dimension mismatch");
    }

    ForwardResult result;
    ForwardCache& c = result.cache;
    c.model_version = model.version;

    std::vector<std::vector<NodeId>> sets;
    sets.reserve(targets.size());
    for (const auto& t : targets) {
        sets.push_back(canonical_set(t));
        if (sets.back().back() >= n) throw std::out_of_range("e2e_forward: target node id out of range");
    }

    // Nodes touched by the targets, then the layer-1 edges they aggregate,
    // then the members of those edges.
    std::vector<std::size_t> local2(n, kAbsent);
    for (const auto& s : sets) {
        for (NodeId v : s) local2[v] = 0;
    }
    for (NodeId v = 0; v < n; ++v) {
        if (local2[v] != kAbsent) {
            local2[v] = c.nodes2.size();
            c.nodes2.push_back(v);
        }
    }
    std::vector<std::size_t> local_e1(m, kAbsent);
    for (NodeId v : c.nodes2) {
        for (EdgeId e : h.node_incidence(v)) {
            if (!is_excluded(inputs.excluded, e)) local_e1[e] = 0;
        }
    }
    for (EdgeId e = 0; e < m; ++e) {
        if (local_e1[e] != kAbsent) {
            local_e1[e] = c.edges1.size();
            c.edges1.push_back(e);
        }
    }
    std::vector<std::size_t> local1(n, kAbsent);
    for (EdgeId e : c.edges1) {
        for (NodeId v : h.edge_members(e)) local1[v] = 0;
    }
    for (NodeId v = 0; v < n; ++v) {
        if (local1[v] != kAbsent) {
            local1[v] = c.nodes1.size();
            c.nodes1.push_back(v);
        }
    }

    // Layer 1: E2N over h_e^0, then N2E over each needed edge.
    c.h1.resize(static_cast<Index>(c.nodes1.size()), d1);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < c.nodes1.size(); ++i) {
        const NodeId v = c.nodes1[i];
        rows.clear();
        for (EdgeId e : h.node_incidence(v)) {
            if (!is_excluded(inputs.excluded, e)) rows.push_back(e);
        }
        aggregate(model.conv.aggregation, edge_init, rows, c.h1.row(static_cast<Index>(i)).head(de));
        c.h1.row(static_cast<Index>(i)).tail(kx) = node_x.row(v);
    }
    c.sets1.resize(c.edges1.size());
    c.omega1.resize(c.edges1.size());
    c.f1.resize(static_cast<Index>(c.edges1.size()), static_cast<Index>(model.layer1.in_dim()));
    for (std::size_t j = 0; j < c.edges1.size(); ++j) {
        for (NodeId v : h.edge_members(c.edges1[j])) c.sets1[j].push_back(local1[v]);
        omega_into(model.conv.omega, c.h1, c.sets1[j], c.omega1[j], true);
        write_pooled(c.omega1[j].value, bilinear, c.f1.row(static_cast<Index>(j)));
    }
    c.z1.noalias() = c.f1 * model.layer1.weight.transpose();
    activate(model.layer1.activation, c.z1, c.a1);

    // Layer 2: E2N over layer-1 edge features, then N2E over the targets.
    c.h2.resize(static_cast<Index>(c.nodes2.size()), d2);
    c.agg2.resize(c.nodes2.size());
    for (std::size_t i = 0; i < c.nodes2.size(); ++i) {
        const NodeId v = c.nodes2[i];
        for (EdgeId e : h.node_incidence(v)) {
            if (!is_excluded(inputs.excluded, e)) c.agg2[i].push_back(local_e1[e]);
        }
        aggregate(model.conv.aggregation, c.a1, c.agg2[i], c.h2.row(static_cast<Index>(i)).head(hidden));
        c.h2.row(static_cast<Index>(i)).tail(kx) = node_x.row(v);
    }
    c.sets2.resize(sets.size());
    c.omega2.resize(sets.size());
    c.f2.resize(static_cast<Index>(sets.size()), static_cast<Index>(model.layer2.in_dim()));
    for (std::size_t t = 0; t < sets.size(); ++t) {
        for (NodeId v : sets[t]) c.sets2[t].push_back(local2[v]);
        omega_into(model.conv.omega, c.h2, c.sets2[t], c.omega2[t], true);
        write_pooled(c.omega2[t].value, bilinear, c.f2.row(static_cast<Index>(t)));
    }
    c.z2.noalias() = c.f2 * model.layer2.weight.transpose();
    activate(model.layer2.activation, c.z2, c.out2);

    if (model.readout) {
        c.logits = c.out2 * model.readout->weight.transpose();
        c.logits.rowwise() += model.readout->bias.transpose();
        result.output = c.logits;
    } else {
        result.output = c.out2;
    }
    return result;
}

E2EGradients e2e_backward(const E2EModel& model, const ForwardCache& c, const Matrix& upstream) {
    if (c.model_version != model.version) {
        throw StaleCacheError("forward cache was produced by model version " + std::to_string(c.model_version) +
                              ", current version is " + std::to_string(model.version));
    }
    if (upstream.rows() != static_cast<Index>(c.sets2.size()) ||
        upstream.cols() != static_cast<Index>(model.output_dim())) {
        throw std::invalid_argument("e2e_backward: upstream gradient shape mismatch");
    }
    const bool bilinear = model.conv.bilinear;
    E2EGradients g;

    Matrix d_out2;
    if (model.readout) {
        g.readout_weight = upstream.transpose() * c.out2;
        g.readout_bias = upstream.colwise().sum().transpose();
        d_out2 = upstream * model.readout->weight;
    } else {
        d_out2 = upstream;
    }
    Matrix d_z2 = d_out2;
    activation_backward(model.layer2.activation, c.z2, d_z2);
    g.layer2 = d_z2.transpose() * c.f2;
    Matrix d_f2 = d_z2 * model.layer2.weight;

    Matrix d_h2 = Matrix::Zero(c.h2.rows(), c.h2.cols());
    for (std::size_t t = 0; t < c.sets2.size(); ++t) {
        Vector d_omega = pooled_backward(c.omega2[t].value, bilinear, d_f2.row(static_cast<Index>(t)));
        omega_backward(model.conv.omega, c.h2, c.sets2[t], c.omega2[t], d_omega, d_h2);
    }

    const Index hidden = static_cast<Index>(model.layer1.out_dim());
    Matrix d_a1 = Matrix::Zero(c.a1.rows(), c.a1.cols());
    for (std::size_t i = 0; i < c.agg2.size(); ++i) {
        aggregate_backward(model.conv.aggregation, c.a1, c.agg2[i], c.h2.row(static_cast<Index>(i)).head(hidden),
                           d_h2.row(static_cast<Index>(i)).head(hidden), d_a1);
    }
    activation_backward(model.layer1.activation, c.z1, d_a1);
    g.layer1 = d_a1.transpose() * c.f1;
    return g;
}

}  // namespace hyperquery
