// message_passing.hpp - edge-to-node / node-to-edge hyperedge convolution
//
// One convolution step maps edge features to node features (E2N: aggregate
// the incident edges, then append the node's one-hot cluster x_v) and node
// features back to per-set features (N2E: summary statistic over the set,
// optional outer-product pooling, linear map, activation). Two steps form the
// E2E model. Any node set can be scored, not only existing edges.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperquery/features.hpp"
#include "hyperquery/hypergraph.hpp"

namespace hyperquery {

enum class OmegaKind { mean, var, minmax };
enum class Activation { relu, identity };
enum class Aggregation { mean, harmonic };

std::string to_string(OmegaKind kind);
OmegaKind parse_omega(const std::string& name);

inline constexpr double kHarmonicEpsilon = 1e-6;

struct LayerParams {
    Matrix weight;  // out_dim x (d*d with bilinear pooling, d without)
    Activation activation = Activation::relu;

    std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
    std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
};

// Dense layer after the second convolution (used by the pretext task).
struct Readout {
    Matrix weight;  // classes x in
    Vector bias;
};

struct ConvSettings {
    OmegaKind omega = OmegaKind::mean;
    bool bilinear = true;
    Aggregation aggregation = Aggregation::mean;
};

struct E2EModel {
    ConvSettings conv;
    LayerParams layer1;
    LayerParams layer2;
    std::optional<Readout> readout;
    // Bumped on every parameter update; caches remember the value they saw.
    std::uint64_t version = 0;

    std::size_t output_dim() const;
};

// Glorot-uniform weights; layer 2 uses identity when there is no readout.
// node_x_dim is the one-hot cluster width k, edge_dim the width of h_e^0.
E2EModel make_model(const ConvSettings& conv, std::size_t edge_dim, std::size_t node_x_dim, std::size_t hidden_dim,
                    std::size_t layer2_dim, std::optional<std::size_t> readout_classes, std::uint64_t seed);

// Summary statistic over the rows of `vectors` selected by `rows`.
Vector omega(OmegaKind kind, const Matrix& vectors, std::span<const std::size_t> rows);
Vector omega(OmegaKind kind, const std::vector<Vector>& vectors);

// Row-major flattening of v * v^T.
Vector bilinear_flat(const Vector& v);

// h_v = [AGG{h_e : e in N(v), e not excluded}, x_v]. Isolated nodes get a zero
// AGG block. `excluded` is empty or has one flag per edge.
Matrix e2n(const Hypergraph& h, const Matrix& edge_features, const Matrix& node_x,
           Aggregation aggregation = Aggregation::mean, std::span<const char> excluded = {});

// sigma(W * flat(Omega{h_v : v in S})) for each S.
Matrix n2e(const LayerParams& params, OmegaKind kind, bool bilinear, const Matrix& node_features,
           const std::vector<std::vector<NodeId>>& target_sets);

// Sorted, deduplicated copy; throws on an empty set.
std::vector<NodeId> canonical_set(std::span<const NodeId> members);

struct E2EInputs {
    const Hypergraph* structure = nullptr;
    const Matrix* edge_init = nullptr;  // num_edges x edge_dim
    const Matrix* node_x = nullptr;     // num_nodes x k
    std::span<const char> excluded;     // optional per-edge exclusion flags
};

struct OmegaCache {
    Vector value;
    std::vector<std::size_t> arg_max;  // minmax only: local row per component
    std::vector<std::size_t> arg_min;
};

struct ForwardCache {
    std::uint64_t model_version = 0;
    // Layer 1
    std::vector<EdgeId> edges1;                   // edges evaluated at layer 1
    std::vector<NodeId> nodes1;                   // their members
    std::vector<std::vector<std::size_t>> sets1;  // per edge, local rows into h1
    Matrix h1, f1, z1, a1;
    std::vector<OmegaCache> omega1;
    // Layer 2
    std::vector<NodeId> nodes2;
    std::vector<std::vector<std::size_t>> agg2;   // per node2, local rows into a1
    std::vector<std::vector<std::size_t>> sets2;  // per target, local rows into h2
    Matrix h2, f2, z2, out2;
    std::vector<OmegaCache> omega2;
    Matrix logits;  // readout output (empty without readout)
};

struct ForwardResult {
    Matrix output;  // targets x model.output_dim()
    ForwardCache cache;
};

// Representation = layer-2 output (pre-readout); output = readout logits when
// the model has a readout, otherwise the layer-2 output.
ForwardResult e2e_forward(const E2EModel& model, const E2EInputs& inputs,
                          const std::vector<std::vector<NodeId>>& targets);

struct E2EGradients {
    Matrix layer1;
    Matrix layer2;
    Matrix readout_weight;
    Vector readout_bias;
};

class StaleCacheError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Gradients of sum(upstream .* output) with respect to every weight.
E2EGradients e2e_backward(const E2EModel& model, const ForwardCache& cache, const Matrix& upstream);

}  // namespace hyperquery
