#include "hyperquery/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "hyperquery/metrics.hpp"

namespace hyperquery {

namespace {

using Index = Eigen::Index;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kEvalChunk = 256;
// Stream offsets so negatives, shuffling and initialisation never share draws.
constexpr std::uint64_t kNegativeStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kShuffleStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kHeadStream = 0x94d049bb133111ebULL;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void apply_gradients(Adam& adam, E2EModel& model, const E2EGradients& g) {
    adam.begin_step();
    adam.update(0, model.layer1.weight, g.layer1);
    adam.update(1, model.layer2.weight, g.layer2);
    if (model.readout) {
        adam.update(2, model.readout->weight, g.readout_weight);
        adam.update(3, model.readout->bias, g.readout_bias);
    }
    ++model.version;
}

// Forward in fixed-size chunks; returns the model output or the layer-2
// representation.
Matrix forward_chunked(const E2EModel& model, const E2EInputs& inputs, const std::vector<std::vector<NodeId>>& sets,
                       bool representation) {
    const Index cols = static_cast<Index>(representation ? model.layer2.out_dim() : model.output_dim());
    Matrix out(static_cast<Index>(sets.size()), cols);
    for (std::size_t begin = 0; begin < sets.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(sets.size(), begin + kEvalChunk);
        std::vector<std::vector<NodeId>> chunk(sets.begin() + static_cast<std::ptrdiff_t>(begin),
                                               sets.begin() + static_cast<std::ptrdiff_t>(end));
        ForwardResult r = e2e_forward(model, inputs, chunk);
        out.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin)) =
            representation ? r.cache.out2 : r.output;
    }
    return out;
}

std::size_t argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    Index best = 0;
    for (Index j = 1; j < row.size(); ++j) {
        if (row(j) > row(best)) best = j;
    }
    return static_cast<std::size_t>(best);
}

TestMetrics ranking_metrics(const Matrix& scores, std::span<const std::size_t> labels) {
    std::vector<std::size_t> ranks(labels.size()), predicted(labels.size());
    std::vector<double> row;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        row.assign(scores.row(static_cast<Index>(i)).data(),
                   scores.row(static_cast<Index>(i)).data() + scores.cols());
        ranks[i] = rank_of_true(row, labels[i]);
        predicted[i] = argmax_lowest(scores.row(static_cast<Index>(i)));
    }
    TestMetrics m;
    m.mrr = mrr(ranks);
    m.hit1 = hit_at(ranks, 1);
    m.hit3 = hit_at(ranks, 3);
    m.accuracy = accuracy(predicted, labels);
    return m;
}

std::vector<std::vector<NodeId>> member_sets(const Hypergraph& h, std::span<const EdgeId> edges) {
    std::vector<std::vector<NodeId>> sets;
    sets.reserve(edges.size());
    for (EdgeId e : edges) {
        auto m = h.edge_members(e);
        sets.emplace_back(m.begin(), m.end());
    }
    return sets;
}

std::vector<std::size_t> labels_of(const KnowledgeHypergraph& kh, std::span<const EdgeId> edges) {
    std::vector<std::size_t> out;
    out.reserve(edges.size());
    for (EdgeId e : edges) out.push_back(kh.edge_type[e]);
    return out;
}

ClusterAssignment run_partition(const Hypergraph& structure, const TrainConfig& cfg) {
    if (cfg.clusters > structure.num_nodes()) {
        throw TrainError("cluster count " + std::to_string(cfg.clusters) + " exceeds node count " +
                         std::to_string(structure.num_nodes()));
    }
    PartitionOptions opts;
    opts.epsilon = cfg.partition_epsilon;
    return partition(structure, cfg.clusters, cfg.seed, opts).assignment;
}

struct RelationProblem {
    GraphContext context;
    std::vector<EdgeId> train_targets;  // structure edge ids
    std::vector<std::vector<NodeId>> valid_sets;
    std::vector<std::size_t> valid_labels;
    bool valid_by_accuracy = false;
};

// Shared loop for completion and classification: per-batch masking of the
// targets' own type block, Adam, early stopping on the validation metric.
void fit_relation_model(RelationProblem& problem, const TrainConfig& cfg, TrainedModel& out, TrainReport& report) {
    GraphContext& ctx = problem.context;
    const std::size_t r = ctx.num_relations;
    ConvSettings conv{cfg.omega, cfg.bilinear, cfg.aggregation};
    E2EModel model = make_model(conv, r + cfg.clusters, cfg.clusters, cfg.dim, r, std::nullopt, cfg.seed);
    Adam adam(cfg.learning_rate);
    std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleStream);

    Matrix working = ctx.edge_init;
    E2EInputs inputs{&ctx.structure, &working, &ctx.node_x, {}};
    const E2EInputs clean = ctx.inputs();

    E2EModel best = model;
    double best_metric = -1.0;
    std::size_t since_best = 0;
    std::vector<EdgeId> order = problem.train_targets;
    std::vector<std::vector<NodeId>> batch_sets;
    std::vector<std::size_t> batch_labels;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            batch_sets.clear();
            batch_labels.clear();
            for (std::size_t i = begin; i < end; ++i) {
                const EdgeId e = order[i];
                auto m = ctx.structure.edge_members(e);
                batch_sets.emplace_back(m.begin(), m.end());
                batch_labels.push_back(ctx.structure_type[e]);
                working.row(e).head(static_cast<Index>(r)).setZero();
            }
            BatchLoss bl = batch_loss(model, inputs, batch_sets, batch_labels);
            if (!std::isfinite(bl.loss)) throw TrainError("non-finite training loss");
            loss_sum += bl.loss * static_cast<double>(end - begin);
            apply_gradients(adam, model, bl.gradients);
            for (std::size_t i = begin; i < end; ++i) {
                working.row(order[i]).head(static_cast<Index>(r)) =
                    ctx.edge_init.row(order[i]).head(static_cast<Index>(r));
            }
        }

        TestMetrics vm = ranking_metrics(forward_chunked(model, clean, problem.valid_sets, false),
                                         problem.valid_labels);
        const double metric = problem.valid_by_accuracy ? *vm.accuracy : *vm.mrr;
        report.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), metric, "main"});
        if (metric > best_metric) {
            best_metric = metric;
            best = model;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    out.params.conv = std::move(best);
}

void check_ratios(const TrainConfig& cfg) {
    const double total = cfg.train_ratio + cfg.valid_ratio + cfg.test_ratio;
    if (std::abs(total - 1.0) > 1e-9 || cfg.train_ratio < 0 || cfg.valid_ratio < 0 || cfg.test_ratio < 0) {
        throw TrainError("split ratios must be nonnegative and sum to 1");
    }
}

}  // namespace

std::string to_string(Task task) {
    switch (task) {
        case Task::completion: return "completion";
        case Task::prediction: return "prediction";
        case Task::classification: return "classification";
    }
    return "?";
}

Task parse_task(const std::string& name) {
    if (name == "completion") return Task::completion;
    if (name == "prediction") return Task::prediction;
    if (name == "classification") return Task::classification;
    throw std::invalid_argument("unknown task '" + name + "'");
}

TrainConfig TrainConfig::defaults(Task task) {
    TrainConfig cfg;
    cfg.task = task;
    cfg.omega = task == Task::prediction ? OmegaKind::minmax : OmegaKind::mean;
    return cfg;
}

void TrainConfig::validate() const {
    if (clusters < 1) throw TrainError("cluster count must be at least 1");
    if (dim < 1) throw TrainError("dim must be at least 1");
    if (batch_size < 1) throw TrainError("batch size must be at least 1");
    if (!(learning_rate > 0)) throw TrainError("learning rate must be positive");
    check_ratios(*this);
}

CrossEntropy cross_entropy(const Vector& logits, std::size_t true_class) {
    if (true_class >= static_cast<std::size_t>(logits.size())) {
        throw std::out_of_range("true class " + std::to_string(true_class) + " outside " +
                                std::to_string(logits.size()) + " logits");
    }
    const double top = logits.maxCoeff();
    Vector p = (logits.array() - top).exp().matrix();
    const double z = p.sum();
    CrossEntropy ce;
    ce.loss = std::log(z) - (logits(static_cast<Index>(true_class)) - top);
    ce.gradient = p / z;
    ce.gradient(static_cast<Index>(true_class)) -= 1.0;
    return ce;
}

EdgeSetIndex::EdgeSetIndex(const Hypergraph& h) {
    for (EdgeId e = 0; e < h.num_edges(); ++e) {
        auto m = h.edge_members(e);
        sets_.emplace(m.begin(), m.end());
    }
}

void EdgeSetIndex::insert(std::vector<NodeId> sorted_members) { sets_.insert(std::move(sorted_members)); }

bool EdgeSetIndex::contains(const std::vector<NodeId>& sorted_members) const {
    return sets_.contains(sorted_members);
}

std::size_t EdgeSetIndex::Hash::operator()(const std::vector<NodeId>& v) const noexcept {
    std::size_t h = v.size();
    for (NodeId x : v) h ^= std::hash<NodeId>{}(x) + 0x9e3779b9 + (h << 6) + (h >> 2);
    return h;
}

NegativeSample sample_negative(const Hypergraph& h, EdgeId edge, std::mt19937_64& rng) {
    return sample_negative(h, edge, EdgeSetIndex(h), rng);
}

NegativeSample sample_negative(const Hypergraph& h, EdgeId edge, const EdgeSetIndex& existing, std::mt19937_64& rng) {
    const auto members = h.edge_members(edge);
    const std::size_t size = members.size();
    const std::size_t n = h.num_nodes();
    const std::size_t keep = (size + 1) / 2;
    const std::size_t fill = size - keep;
    if (n <= size || n - size < fill) {
        throw NegativeSamplingError("edge " + std::to_string(edge) + " has no room for outside nodes");
    }

    std::vector<NodeId> pool(members.begin(), members.end());
    std::vector<NodeId> outside;
    const bool enumerate_outside = n - size < 4 * fill + 16;
    if (enumerate_outside) {
        for (NodeId v = 0, i = 0; v < n; ++v) {
            if (i < size && members[i] == v) {
                ++i;
                continue;
            }
            outside.push_back(v);
        }
    }

    std::vector<NodeId> candidate;
    for (int attempt = 0; attempt < kNegativeAttempts; ++attempt) {
        candidate.clear();
        for (std::size_t i = 0; i < keep; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, size - 1);
            std::swap(pool[i], pool[pick(rng)]);
            candidate.push_back(pool[i]);
        }
        if (enumerate_outside) {
            for (std::size_t i = 0; i < fill; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, outside.size() - 1);
                std::swap(outside[i], outside[pick(rng)]);
                candidate.push_back(outside[i]);
            }
        } else {
            std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
            while (candidate.size() < size) {
                const NodeId v = pick(rng);
                if (std::binary_search(members.begin(), members.end(), v)) continue;
                if (std::find(candidate.begin() + static_cast<std::ptrdiff_t>(keep), candidate.end(), v) !=
                    candidate.end()) {
                    continue;
                }
                candidate.push_back(v);
            }
        }
        std::sort(candidate.begin(), candidate.end());
        if (!existing.contains(candidate)) return {candidate, edge};
    }
    throw NegativeSamplingError("no non-duplicate negative for edge " + std::to_string(edge) + " after " +
                                std::to_string(kNegativeAttempts) + " attempts");
}

void Adam::update(std::size_t slot, Eigen::Ref<Matrix> param, const Matrix& grad) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
        throw std::invalid_argument("adam: gradient shape mismatch");
    }
    apply(slot, param.data(), grad.data(), param.size());
}

void Adam::update(std::size_t slot, Eigen::Ref<Vector> param, const Vector& grad) {
    if (param.size() != grad.size()) throw std::invalid_argument("adam: gradient shape mismatch");
    apply(slot, param.data(), grad.data(), param.size());
}

void Adam::apply(std::size_t slot, double* param, const double* grad, Eigen::Index size) {
    if (t_ == 0) throw std::logic_error("adam: begin_step() not called");
    if (slot >= m_.size()) {
        m_.resize(slot + 1);
        v_.resize(slot + 1);
    }
    if (m_[slot].size() != size) {
        m_[slot] = Eigen::ArrayXd::Zero(size);
        v_[slot] = Eigen::ArrayXd::Zero(size);
    }
    Eigen::Map<Eigen::ArrayXd> p(param, size);
    Eigen::Map<const Eigen::ArrayXd> g(grad, size);
    m_[slot] = beta1_ * m_[slot] + (1.0 - beta1_) * g;
    v_[slot] = beta2_ * v_[slot] + (1.0 - beta2_) * g.square();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    p -= lr_ * (m_[slot] / c1) / ((v_[slot] / c2).sqrt() + eps_);
}

void GraphContext::rebuild_features() {
    node_x = node_onehot(clusters).rows;
    if (num_relations == 0) {
        edge_init = edge_onehot(structure, clusters, pooling).rows;
        return;
    }
    std::vector<EdgeId> hidden;
    for (EdgeId e = 0; e < structure.num_edges(); ++e) {
        if (!type_visible.empty() && !type_visible[e]) hidden.push_back(e);
    }
    edge_init = knowledge_edge_init(structure, structure_type, num_relations, clusters, hidden, pooling).rows;
}

E2EInputs GraphContext::inputs(std::span<const char> excluded) const {
    return E2EInputs{&structure, &edge_init, &node_x, excluded};
}

std::vector<EdgeId> edges_in(std::span<const Split> split, Split which) {
    std::vector<EdgeId> out;
    for (EdgeId e = 0; e < split.size(); ++e) {
        if (split[e] == which) out.push_back(e);
    }
    return out;
}

std::vector<Split> split_edges(std::size_t num_edges, double train_ratio, double valid_ratio, std::uint64_t seed) {
    std::vector<EdgeId> order(num_edges);
    std::iota(order.begin(), order.end(), EdgeId{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto m = static_cast<double>(num_edges);
    const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * m));
    const auto n_valid = std::min(num_edges - n_train, static_cast<std::size_t>(std::llround(valid_ratio * m)));
    std::vector<Split> split(num_edges, Split::test);
    for (std::size_t i = 0; i < n_train; ++i) split[order[i]] = Split::train;
    for (std::size_t i = n_train; i < n_train + n_valid; ++i) split[order[i]] = Split::valid;
    return split;
}

PartitionStats partition_stats(const Hypergraph& h, const ClusterAssignment& c) {
    PartitionStats s;
    s.k = c.k;
    s.cut = cut(h, c);
    auto sizes = c.cluster_sizes();
    const double ideal = static_cast<double>(c.num_nodes()) / static_cast<double>(c.k);
    s.balance = ideal > 0 ? static_cast<double>(*std::max_element(sizes.begin(), sizes.end())) / ideal : 0.0;
    return s;
}

BatchLoss batch_loss(const E2EModel& model, const E2EInputs& inputs, const std::vector<std::vector<NodeId>>& targets,
                     std::span<const std::size_t> labels) {
    if (targets.size() != labels.size() || targets.empty()) {
        throw std::invalid_argument("batch_loss: need one label per nonempty target");
    }
    ForwardResult fwd = e2e_forward(model, inputs, targets);
    Matrix upstream(fwd.output.rows(), fwd.output.cols());
    BatchLoss out;
    const double scale = 1.0 / static_cast<double>(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        CrossEntropy ce = cross_entropy(fwd.output.row(static_cast<Index>(i)).transpose(), labels[i]);
        out.loss += ce.loss * scale;
        upstream.row(static_cast<Index>(i)) = ce.gradient.transpose() * scale;
    }
    out.gradients = e2e_backward(model, fwd.cache, upstream);
    return out;
}

std::vector<NegativeSet> draw_negatives(const SimpleDataset& data, std::uint64_t seed) {
    std::vector<NegativeSet> out(3);
    EdgeSetIndex existing(data.graph);
    std::mt19937_64 rng(seed ^ kNegativeStream);
    for (EdgeId e = 0; e < data.graph.num_edges(); ++e) {
        NegativeSet& bucket = out[static_cast<std::size_t>(data.split[e])];
        try {
            bucket.members.push_back(sample_negative(data.graph, e, existing, rng).members);
        } catch (const NegativeSamplingError&) {
            ++bucket.skipped;
        }
    }
    return out;
}

TrainResult train_completion(const KnowledgeDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    const KnowledgeHypergraph& kh = data.graph;
    if (data.split.size() != kh.base.num_edges()) throw TrainError("split vector does not match edge count");
    const auto train = edges_in(data.split, Split::train);
    const auto valid = edges_in(data.split, Split::valid);
    const auto test = edges_in(data.split, Split::test);
    if (train.empty() || valid.empty() || test.empty()) throw TrainError("completion needs nonempty splits");
    if (kh.num_relations() < 2) throw TrainError("completion needs at least two relations");

    TrainResult result;
    result.report.config = cfg;
    RelationProblem problem;
    GraphContext& ctx = problem.context;
    ctx.structure = Hypergraph::build(member_sets(kh.base, train), kh.base.num_nodes());
    ctx.structure_type.reserve(train.size());
    for (EdgeId e : train) ctx.structure_type.push_back(kh.edge_type[e]);
    ctx.type_visible.assign(train.size(), 1);
    ctx.num_relations = kh.num_relations();
    ctx.pooling = cfg.pooling;
    ctx.clusters = run_partition(ctx.structure, cfg);
    ctx.rebuild_features();
    result.report.partition = partition_stats(ctx.structure, ctx.clusters);

    problem.train_targets.resize(train.size());
    std::iota(problem.train_targets.begin(), problem.train_targets.end(), EdgeId{0});
    problem.valid_sets = member_sets(kh.base, valid);
    problem.valid_labels = labels_of(kh, valid);

    TrainedModel& model = result.model;
    model.config = cfg;
    model.entities = kh.entities;
    model.relations = kh.relations;
    fit_relation_model(problem, cfg, model, result.report);
    model.context = std::move(problem.context);

    result.report.test = evaluate_completion(model, data);
    result.report.wall_time_seconds = seconds_since(start);
    return result;
}

TrainResult train_classification(const KnowledgeHypergraph& kh, const TrainConfig& cfg) {
    cfg.validate();
    KnowledgeDataset data{kh, split_edges(kh.base.num_edges(), cfg.train_ratio, cfg.valid_ratio, cfg.seed)};
    return train_classification(data, cfg);
}

TrainResult train_classification(const KnowledgeDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    const KnowledgeHypergraph& kh = data.graph;
    if (data.split.size() != kh.base.num_edges()) throw TrainError("split vector does not match edge count");
    if (kh.num_relations() < 2) throw TrainError("classification needs at least two classes");
    const auto train = edges_in(data.split, Split::train);
    const auto valid = edges_in(data.split, Split::valid);
    const auto test = edges_in(data.split, Split::test);
    if (train.empty() || valid.empty() || test.empty()) throw TrainError("classification needs nonempty splits");

    TrainResult result;
    result.report.config = cfg;
    RelationProblem problem;
    problem.valid_by_accuracy = true;
    GraphContext& ctx = problem.context;
    ctx.structure = kh.base;
    ctx.structure_type = kh.edge_type;
    ctx.type_visible.resize(kh.base.num_edges());
    for (EdgeId e = 0; e < kh.base.num_edges(); ++e) ctx.type_visible[e] = data.split[e] == Split::train;
    ctx.num_relations = kh.num_relations();
    ctx.pooling = cfg.pooling;
    ctx.clusters = run_partition(ctx.structure, cfg);
    ctx.rebuild_features();
    result.report.partition = partition_stats(ctx.structure, ctx.clusters);

    problem.train_targets = train;
    problem.valid_sets = member_sets(kh.base, valid);
    problem.valid_labels = labels_of(kh, valid);

    TrainedModel& model = result.model;
    model.config = cfg;
    model.entities = kh.entities;
    model.relations = kh.relations;
    fit_relation_model(problem, cfg, model, result.report);
    model.context = std::move(problem.context);

    result.report.test = evaluate_classification(model, data);
    result.report.wall_time_seconds = seconds_since(start);
    return result;
}

Matrix relation_scores(const TrainedModel& model, const std::vector<std::vector<NodeId>>& queries) {
    if (model.context.num_relations == 0) throw TrainError("model does not score relations");
    return forward_chunked(model.params.conv, model.context.inputs(), queries, false);
}

std::vector<RankedRelation> predict_relation(const TrainedModel& model, std::span<const NodeId> candidate) {
    if (candidate.empty()) throw std::invalid_argument("empty candidate set");
    Matrix s = relation_scores(model, {std::vector<NodeId>(candidate.begin(), candidate.end())});
    std::vector<RankedRelation> ranked(static_cast<std::size_t>(s.cols()));
    for (Index j = 0; j < s.cols(); ++j) ranked[static_cast<std::size_t>(j)] = {static_cast<RelationId>(j), s(0, j)};
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedRelation& a, const RankedRelation& b) { return a.score > b.score; });
    return ranked;
}

TestMetrics evaluate_completion(const TrainedModel& model, const KnowledgeDataset& data) {
    const auto test = edges_in(data.split, Split::test);
    if (test.empty()) throw TrainError("no test edges");
    Matrix scores = relation_scores(model, member_sets(data.graph.base, test));
    TestMetrics m = ranking_metrics(scores, labels_of(data.graph, test));
    m.accuracy.reset();
    return m;
}

TestMetrics evaluate_classification(const TrainedModel& model, const KnowledgeDataset& data) {
    const auto test = edges_in(data.split, Split::test);
    if (test.empty()) throw TrainError("no test edges");
    Matrix scores = relation_scores(model, member_sets(data.graph.base, test));
    TestMetrics full = ranking_metrics(scores, labels_of(data.graph, test));
    TestMetrics m;
    m.accuracy = full.accuracy;
    return m;
}

namespace {

Matrix head_logits(const Readout& head, const Matrix& reps) {
    Matrix logits = reps * head.weight.transpose();
    logits.rowwise() += head.bias.transpose();
    return logits;
}

std::vector<double> head_margin(const Readout& head, const Matrix& reps) {
    Matrix logits = head_logits(head, reps);
    std::vector<double> out(static_cast<std::size_t>(logits.rows()));
    for (Index i = 0; i < logits.rows(); ++i) out[static_cast<std::size_t>(i)] = logits(i, 1) - logits(i, 0);
    return out;
}

struct PretextSample {
    std::vector<NodeId> members;
    std::size_t label = 0;
    std::optional<EdgeId> structure_edge;  // positives that are part of the structure
};

// Layer-2 representations, computed chunk by chunk with each chunk's
// structure edges excluded from aggregation (same view as during training).
Matrix representations(const E2EModel& model, const GraphContext& ctx, const std::vector<PretextSample>& samples,
                       std::size_t chunk) {
    Matrix out(static_cast<Index>(samples.size()), static_cast<Index>(model.layer2.out_dim()));
    std::vector<char> excluded(ctx.structure.num_edges(), 0);
    std::vector<std::vector<NodeId>> sets;
    for (std::size_t begin = 0; begin < samples.size(); begin += chunk) {
        const std::size_t end = std::min(samples.size(), begin + chunk);
        sets.clear();
        for (std::size_t i = begin; i < end; ++i) {
            sets.push_back(samples[i].members);
            if (samples[i].structure_edge) excluded[*samples[i].structure_edge] = 1;
        }
        ForwardResult r = e2e_forward(model, ctx.inputs(excluded), sets);
        out.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin)) = r.cache.out2;
        for (std::size_t i = begin; i < end; ++i) {
            if (samples[i].structure_edge) excluded[*samples[i].structure_edge] = 0;
        }
    }
    return out;
}

// Mean pretext cross-entropy; accuracy plateaus for many epochs on small
// data, so this is what early stopping watches.
double pretext_loss(const E2EModel& model, const GraphContext& ctx, const std::vector<PretextSample>& samples) {
    std::vector<std::vector<NodeId>> sets;
    for (const auto& s : samples) sets.push_back(s.members);
    Matrix logits = forward_chunked(model, ctx.inputs(), sets, false);
    double total = 0.0;
    for (Index i = 0; i < logits.rows(); ++i) {
        total += cross_entropy(logits.row(i).transpose(), samples[static_cast<std::size_t>(i)].label).loss;
    }
    return total / static_cast<double>(samples.size());
}

}  // namespace

std::vector<double> edge_scores(const TrainedModel& model, const std::vector<std::vector<NodeId>>& queries) {
    if (!model.params.head) throw TrainError("model has no edge-existence head");
    Matrix reps = forward_chunked(model.params.conv, model.context.inputs(), queries, true);
    Matrix logits = head_logits(*model.params.head, reps);
    std::vector<double> out(static_cast<std::size_t>(logits.rows()));
    for (Index i = 0; i < logits.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(logits(i, 0) - logits(i, 1)));
    }
    return out;
}

TestMetrics evaluate_prediction(const TrainedModel& model, const SimpleDataset& data) {
    if (!model.params.head) throw TrainError("model has no edge-existence head");
    const auto test = edges_in(data.split, Split::test);
    auto negatives = draw_negatives(data, model.config.seed);
    const auto& test_neg = negatives[static_cast<std::size_t>(Split::test)].members;
    if (test.empty() || test_neg.empty()) throw TrainError("prediction test split needs positives and negatives");
    const E2EInputs in = model.context.inputs();
    auto pos = head_margin(*model.params.head,
                           forward_chunked(model.params.conv, in, member_sets(data.graph, test), true));
    auto neg = head_margin(*model.params.head, forward_chunked(model.params.conv, in, test_neg, true));
    TestMetrics m;
    m.auc = auc(pos, neg);
    return m;
}

TrainResult train_prediction(const SimpleDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    if (data.split.size() != data.graph.num_edges()) throw TrainError("split vector does not match edge count");
    const auto train = edges_in(data.split, Split::train);
    const auto valid = edges_in(data.split, Split::valid);
    const auto test = edges_in(data.split, Split::test);
    if (train.empty() || valid.empty() || test.empty()) throw TrainError("prediction needs nonempty splits");

    TrainResult result;
    result.report.config = cfg;
    GraphContext ctx;
    ctx.structure = Hypergraph::build(member_sets(data.graph, train), data.graph.num_nodes());
    ctx.pooling = cfg.pooling;
    ctx.clusters = run_partition(ctx.structure, cfg);
    ctx.rebuild_features();
    result.report.partition = partition_stats(ctx.structure, ctx.clusters);

    auto negatives = draw_negatives(data, cfg.seed);
    for (const auto& n : negatives) result.report.skipped_negatives += n.skipped;

    const std::uint32_t k = cfg.clusters;
    auto make_samples = [&](std::span<const EdgeId> positives, const NegativeSet& negs, bool in_structure) {
        std::vector<PretextSample> samples;
        for (std::size_t i = 0; i < positives.size(); ++i) {
            auto m = data.graph.edge_members(positives[i]);
            PretextSample s;
            s.members.assign(m.begin(), m.end());
            s.label = majority_cluster(m, ctx.clusters);
            if (in_structure) s.structure_edge = static_cast<EdgeId>(i);
            samples.push_back(std::move(s));
        }
        for (const auto& members : negs.members) samples.push_back({members, k, std::nullopt});
        return samples;
    };
    auto train_samples = make_samples(train, negatives[0], true);
    auto valid_samples = make_samples(valid, negatives[1], false);
    if (negatives[0].members.empty() || negatives[1].members.empty()) {
        throw TrainError("could not draw negatives for the train/valid splits");
    }

    // Stage 1: (k+1)-way pretext classification, cluster id or "negative".
    ConvSettings conv{cfg.omega, cfg.bilinear, cfg.aggregation};
    E2EModel model = make_model(conv, k, k, cfg.dim, cfg.dim, k + 1, cfg.seed);
    Adam adam(cfg.learning_rate);
    std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleStream);
    std::vector<char> excluded(ctx.structure.num_edges(), 0);
    std::vector<std::size_t> order(train_samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    E2EModel best = model;
    double best_metric = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<std::vector<NodeId>> batch_sets;
    std::vector<std::size_t> batch_labels;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            batch_sets.clear();
            batch_labels.clear();
            for (std::size_t i = begin; i < end; ++i) {
                const auto& s = train_samples[order[i]];
                batch_sets.push_back(s.members);
                batch_labels.push_back(s.label);
                if (s.structure_edge) excluded[*s.structure_edge] = 1;
            }
            BatchLoss bl = batch_loss(model, ctx.inputs(excluded), batch_sets, batch_labels);
            if (!std::isfinite(bl.loss)) throw TrainError("non-finite pretext loss");
            loss_sum += bl.loss * static_cast<double>(end - begin);
            apply_gradients(adam, model, bl.gradients);
            for (std::size_t i = begin; i < end; ++i) {
                const auto& s = train_samples[order[i]];
                if (s.structure_edge) excluded[*s.structure_edge] = 0;
            }
        }
        const double metric = -pretext_loss(model, ctx, valid_samples);
        result.report.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), metric, "pretext"});
        if (metric > best_metric) {
            best_metric = metric;
            best = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    model = std::move(best);

    // Stage 2: frozen representations, binary edge / non-edge head.
    const Matrix train_reps = representations(model, ctx, train_samples, cfg.batch_size);
    const Matrix valid_reps = representations(model, ctx, valid_samples, cfg.batch_size);
    std::vector<std::size_t> train_y(train_samples.size());
    for (std::size_t i = 0; i < train_samples.size(); ++i) train_y[i] = train_samples[i].label == k ? 0 : 1;
    std::vector<double> valid_pos_scores, valid_neg_scores;

    std::mt19937_64 head_rng(cfg.seed ^ kHeadStream);
    Readout head;
    {
        const double a = std::sqrt(6.0 / static_cast<double>(cfg.dim + 2));
        std::uniform_real_distribution<double> dist(-a, a);
        head.weight.resize(2, static_cast<Index>(cfg.dim));
        for (Index i = 0; i < 2; ++i) {
            for (Index j = 0; j < head.weight.cols(); ++j) head.weight(i, j) = dist(head_rng);
        }
        head.bias = Vector::Zero(2);
    }
    Adam head_adam(cfg.learning_rate);
    Readout best_head = head;
    best_metric = -1.0;
    since_best = 0;
    const std::size_t valid_pos_count = valid.size();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), head_rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(end - begin);
            Matrix gw = Matrix::Zero(2, head.weight.cols());
            Vector gb = Vector::Zero(2);
            for (std::size_t i = begin; i < end; ++i) {
                const Vector rep = train_reps.row(static_cast<Index>(order[i])).transpose();
                CrossEntropy ce = cross_entropy(head.weight * rep + head.bias, train_y[order[i]]);
                loss_sum += ce.loss;
                gw += scale * ce.gradient * rep.transpose();
                gb += scale * ce.gradient;
            }
            head_adam.begin_step();
            head_adam.update(0, head.weight, gw);
            head_adam.update(1, head.bias, gb);
        }
        auto margins = head_margin(head, valid_reps);
        valid_pos_scores.assign(margins.begin(), margins.begin() + static_cast<std::ptrdiff_t>(valid_pos_count));
        valid_neg_scores.assign(margins.begin() + static_cast<std::ptrdiff_t>(valid_pos_count), margins.end());
        const double metric = auc(valid_pos_scores, valid_neg_scores);
        result.report.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), metric, "head"});
        if (metric > best_metric) {
            best_metric = metric;
            best_head = head;
            result.report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    TrainedModel& out = result.model;
    out.config = cfg;
    out.context = std::move(ctx);
    out.entities = data.nodes;
    out.params.conv = std::move(model);
    out.params.head = std::move(best_head);
    result.report.test = evaluate_prediction(out, data);
    result.report.wall_time_seconds = seconds_since(start);
    return result;
}

}  // namespace hyperquery
