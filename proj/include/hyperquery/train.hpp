// train.hpp - training pipelines for relation completion, hyperedge
// prediction and hyperedge classification
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "hyperquery/features.hpp"
#include "hyperquery/hypergraph.hpp"
#include "hyperquery/message_passing.hpp"
#include "hyperquery/partitioner.hpp"

namespace hyperquery {

enum class Task { completion, prediction, classification };
enum class Split : std::uint8_t { train, valid, test };

std::string to_string(Task task);
Task parse_task(const std::string& name);

class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    Task task = Task::completion;
    std::uint32_t clusters = 16;
    OmegaKind omega = OmegaKind::mean;
    bool bilinear = true;
    Aggregation aggregation = Aggregation::mean;
    EdgePooling pooling = EdgePooling::majority;
    std::size_t dim = 64;
    std::size_t epochs = 300;
    std::size_t patience = 20;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    double partition_epsilon = 0.05;
    // Ratios used when the loader or the task splits edges itself.
    double train_ratio = 0.7;
    double valid_ratio = 0.1;
    double test_ratio = 0.2;

    // Task-specific defaults (minmax for prediction, mean otherwise).
    static TrainConfig defaults(Task task);
    void validate() const;
};

struct CrossEntropy {
    double loss = 0.0;
    Vector gradient;  // softmax(logits) - onehot(true_class)
};

CrossEntropy cross_entropy(const Vector& logits, std::size_t true_class);

// Hash set of canonical (sorted) member lists.
class EdgeSetIndex {
public:
    EdgeSetIndex() = default;
    explicit EdgeSetIndex(const Hypergraph& h);

    void insert(std::vector<NodeId> sorted_members);
    bool contains(const std::vector<NodeId>& sorted_members) const;

private:
    struct Hash {
        std::size_t operator()(const std::vector<NodeId>& v) const noexcept;
    };
    std::unordered_set<std::vector<NodeId>, Hash> sets_;
};

struct NegativeSample {
    std::vector<NodeId> members;  // sorted
    EdgeId source = 0;
};

class NegativeSamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kNegativeAttempts = 100;

// Keeps ceil(|e|/2) members of e and fills the rest from V \ e, both without
// replacement; rejects candidates equal to an existing edge.
NegativeSample sample_negative(const Hypergraph& h, EdgeId edge, const EdgeSetIndex& existing, std::mt19937_64& rng);
NegativeSample sample_negative(const Hypergraph& h, EdgeId edge, std::mt19937_64& rng);

// Adam with per-parameter first/second moments.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    // Starts a new step; call update() once per parameter afterwards.
    void begin_step() { ++t_; }
    void update(std::size_t slot, Eigen::Ref<Matrix> param, const Matrix& grad);
    void update(std::size_t slot, Eigen::Ref<Vector> param, const Vector& grad);
    std::uint64_t steps() const { return t_; }

private:
    void apply(std::size_t slot, double* param, const double* grad, Eigen::Index size);

    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<Eigen::ArrayXd> m_, v_;
};

// Frozen inputs of the forward pass: message-passing structure, clusters and
// the bootstrap features derived from them.
struct GraphContext {
    Hypergraph structure;
    std::vector<RelationId> structure_type;  // per structure edge; empty for prediction
    std::vector<char> type_visible;          // per structure edge; false zeroes the type block
    std::size_t num_relations = 0;
    ClusterAssignment clusters;
    EdgePooling pooling = EdgePooling::majority;

    Matrix edge_init;
    Matrix node_x;

    void rebuild_features();
    E2EInputs inputs(std::span<const char> excluded = {}) const;
};

struct ModelParams {
    E2EModel conv;                 // two convolution layers (+ pretext readout for prediction)
    std::optional<Readout> head;   // binary edge/non-edge head, prediction only
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double valid_metric = 0.0;
    std::string stage;  // "main", "pretext" or "head"
};

struct PartitionStats {
    std::uint32_t k = 0;
    std::uint64_t cut = 0;
    double balance = 0.0;  // largest cluster / (n / k)
};

struct TestMetrics {
    std::optional<double> mrr, hit1, hit3, auc, accuracy;
};

struct TrainReport {
    TrainConfig config;
    std::vector<EpochRecord> epochs;
    TestMetrics test;
    PartitionStats partition;
    std::size_t best_epoch = 0;
    std::size_t skipped_negatives = 0;
    double wall_time_seconds = 0.0;
};

struct TrainedModel {
    TrainConfig config;
    GraphContext context;
    ModelParams params;
    Vocabulary entities;
    Vocabulary relations;  // labels for classification; empty for prediction
};

// Knowledge hypergraph plus the split each edge belongs to.
struct KnowledgeDataset {
    KnowledgeHypergraph graph;
    std::vector<Split> split;
};

struct SimpleDataset {
    Hypergraph graph;
    std::vector<Split> split;
    Vocabulary nodes;
};

std::vector<EdgeId> edges_in(std::span<const Split> split, Split which);

// Seeded shuffle, then round(ratio * m) edges to train and valid; the
// remainder goes to test, so every split is within one edge of its ratio.
std::vector<Split> split_edges(std::size_t num_edges, double train_ratio, double valid_ratio, std::uint64_t seed);

PartitionStats partition_stats(const Hypergraph& h, const ClusterAssignment& c);

struct TrainResult {
    TrainedModel model;
    TrainReport report;
};

TrainResult train_completion(const KnowledgeDataset& data, const TrainConfig& cfg);
TrainResult train_prediction(const SimpleDataset& data, const TrainConfig& cfg);
// Every edge is part of the structure; only train labels are visible.
// Splits follow cfg ratios.
TrainResult train_classification(const KnowledgeHypergraph& kh, const TrainConfig& cfg);
TrainResult train_classification(const KnowledgeDataset& data, const TrainConfig& cfg);

// Relation/label scores for arbitrary query sets.
Matrix relation_scores(const TrainedModel& model, const std::vector<std::vector<NodeId>>& queries);

struct RankedRelation {
    RelationId relation = 0;
    double score = 0.0;
};

// Descending score, ascending relation id on ties.
std::vector<RankedRelation> predict_relation(const TrainedModel& model, std::span<const NodeId> candidate);

// Probability that each query set is a hyperedge (prediction models).
std::vector<double> edge_scores(const TrainedModel& model, const std::vector<std::vector<NodeId>>& queries);

// Test metrics recomputed from a trained model; these match the values in
// the training report for the same data.
TestMetrics evaluate_completion(const TrainedModel& model, const KnowledgeDataset& data);
TestMetrics evaluate_classification(const TrainedModel& model, const KnowledgeDataset& data);
TestMetrics evaluate_prediction(const TrainedModel& model, const SimpleDataset& data);

// Mean cross-entropy over a batch plus its weight gradients.
struct BatchLoss {
    double loss = 0.0;
    E2EGradients gradients;
};

BatchLoss batch_loss(const E2EModel& model, const E2EInputs& inputs, const std::vector<std::vector<NodeId>>& targets,
                     std::span<const std::size_t> labels);

// Negatives for every edge of `which`, drawn once per run in edge order.
struct NegativeSet {
    std::vector<std::vector<NodeId>> members;
    std::size_t skipped = 0;
};

std::vector<NegativeSet> draw_negatives(const SimpleDataset& data, std::uint64_t seed);

}  // namespace hyperquery
