#include "hyperquery/io.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hyperquery {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    return in;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(const std::string& line) { return line.find_first_not_of(" \t") == std::string::npos; }

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return fields;
}

struct FactReader {
    KnowledgeHypergraph kh;
    std::vector<std::vector<NodeId>> edges;

    std::size_t read(const fs::path& path) {
        std::ifstream in = open_input(path);
        std::string line;
        std::size_t line_no = 0, count = 0;
        while (std::getline(in, line)) {
            ++line_no;
            strip_cr(line);
            if (is_blank(line)) continue;
            auto fields = split_tabs(line);
            const std::string where = path.string() + ":" + std::to_string(line_no);
            if (fields.size() < 2) throw LoadError(where + ": expected relation and at least one entity");
            if (fields[0].empty()) throw LoadError(where + ": empty relation token");
            std::vector<NodeId> members;
            for (std::size_t i = 1; i < fields.size(); ++i) {
                if (fields[i].empty()) continue;
                members.push_back(kh.entities.intern(fields[i]));
            }
            if (members.empty()) throw LoadError(where + ": no entities");
            kh.edge_type.push_back(kh.relations.intern(fields[0]));
            edges.push_back(std::move(members));
            ++count;
        }
        return count;
    }

    KnowledgeHypergraph finish() {
        kh.base = Hypergraph::build(edges, kh.entities.size());
        kh.validate();
        return std::move(kh);
    }
};

ordered_json matrix_to_json(const Matrix& m) {
    ordered_json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw LoadError("checkpoint matrix size mismatch");
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

ordered_json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

ordered_json readout_to_json(const std::optional<Readout>& r) {
    if (!r) return nullptr;
    ordered_json j;
    j["weight"] = matrix_to_json(r->weight);
    j["bias"] = vector_to_json(r->bias);
    return j;
}

std::optional<Readout> readout_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return Readout{matrix_from_json(j.at("weight")), vector_from_json(j.at("bias"))};
}

std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw LoadError("unknown activation '" + s + "'");
}

}  // namespace

KnowledgeDataset load_knowledge(const fs::path& dir) {
    FactReader reader;
    std::vector<Split> split;
    const std::pair<const char*, Split> files[] = {
        {"train.txt", Split::train}, {"valid.txt", Split::valid}, {"test.txt", Split::test}};
    for (const auto& [name, which] : files) {
        const fs::path path = dir / name;
        if (!fs::exists(path)) throw LoadError("missing file " + path.string());
        const std::size_t count = reader.read(path);
        split.insert(split.end(), count, which);
    }
    KnowledgeDataset data;
    data.graph = reader.finish();
    data.split = std::move(split);
    return data;
}

KnowledgeHypergraph load_labeled(const fs::path& path) {
    FactReader reader;
    if (reader.read(path) == 0) throw LoadError(path.string() + ": no hyperedges");
    return reader.finish();
}

SimpleDataset load_simple(const fs::path& path, double train_ratio, double valid_ratio, std::uint64_t seed,
                          SimpleLoadStats* stats) {
    std::ifstream in = open_input(path);
    SimpleDataset data;
    std::vector<std::vector<NodeId>> edges;
    std::string line, token;
    std::size_t blank = 0;
    while (std::getline(in, line)) {
        strip_cr(line);
        if (is_blank(line)) {
            ++blank;
            continue;
        }
        std::istringstream tokens(line);
        std::vector<NodeId> members;
        while (tokens >> token) members.push_back(data.nodes.intern(token));
        edges.push_back(std::move(members));
    }
    if (edges.empty()) throw LoadError(path.string() + ": no hyperedges");
    if (blank > 0) std::cerr << "warning: skipped " << blank << " blank line(s) in " << path.string() << "\n";
    data.graph = Hypergraph::build(edges, data.nodes.size());
    data.split = split_edges(edges.size(), train_ratio, valid_ratio, seed);
    if (stats) {
        stats->blank_lines = blank;
        stats->duplicate_members = data.graph.duplicate_count();
    }
    return data;
}

void write_partition(std::ostream& out, const ClusterAssignment& c) {
    for (std::size_t v = 0; v < c.num_nodes(); ++v) out << v << ' ' << c.cluster_of[v] << '\n';
}

ordered_json config_to_json(const TrainConfig& cfg) {
    ordered_json j;
    j["task"] = to_string(cfg.task);
    j["clusters"] = cfg.clusters;
    j["omega"] = to_string(cfg.omega);
    j["bilinear"] = cfg.bilinear;
    j["aggregation"] = cfg.aggregation == Aggregation::mean ? "mean" : "harmonic";
    j["edge_pooling"] = cfg.pooling == EdgePooling::majority ? "majority" : "multi_hot";
    j["dim"] = cfg.dim;
    j["epochs"] = cfg.epochs;
    j["patience"] = cfg.patience;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["seed"] = cfg.seed;
    j["partition_epsilon"] = cfg.partition_epsilon;
    j["split_ratios"] = {cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio};
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.task = parse_task(j.at("task").get<std::string>());
    cfg.clusters = j.at("clusters").get<std::uint32_t>();
    cfg.omega = parse_omega(j.at("omega").get<std::string>());
    cfg.bilinear = j.at("bilinear").get<bool>();
    cfg.aggregation = j.at("aggregation").get<std::string>() == "harmonic" ? Aggregation::harmonic : Aggregation::mean;
    cfg.pooling = j.at("edge_pooling").get<std::string>() == "multi_hot" ? EdgePooling::multi_hot : EdgePooling::majority;
    cfg.dim = j.at("dim").get<std::size_t>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.patience = j.at("patience").get<std::size_t>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.partition_epsilon = j.at("partition_epsilon").get<double>();
    const auto ratios = j.at("split_ratios").get<std::vector<double>>();
    if (ratios.size() != 3) throw LoadError("split_ratios must have three entries");
    cfg.train_ratio = ratios[0];
    cfg.valid_ratio = ratios[1];
    cfg.test_ratio = ratios[2];
    return cfg;
}

ordered_json metrics_to_json(const TestMetrics& m) {
    ordered_json j = ordered_json::object();
    if (m.mrr) j["mrr"] = *m.mrr;
    if (m.hit1) j["hit1"] = *m.hit1;
    if (m.hit3) j["hit3"] = *m.hit3;
    if (m.auc) j["auc"] = *m.auc;
    if (m.accuracy) j["accuracy"] = *m.accuracy;
    return j;
}

const std::vector<std::string>& report_fields() {
    static const std::vector<std::string> fields = {"format",     "version", "config",           "seed",
                                                    "partition",  "epochs",  "best_epoch",       "test",
                                                    "skipped_negatives", "wall_time_seconds"};
    return fields;
}

ordered_json report_to_json(const TrainReport& report) {
    ordered_json j;
    j["format"] = "hyperquery-report";
    j["version"] = 1;
    j["config"] = config_to_json(report.config);
    j["seed"] = report.config.seed;
    j["partition"] = {{"k", report.partition.k}, {"cut", report.partition.cut}, {"balance", report.partition.balance}};
    ordered_json epochs = ordered_json::array();
    for (const auto& e : report.epochs) {
        epochs.push_back(
            {{"epoch", e.epoch}, {"stage", e.stage}, {"train_loss", e.train_loss}, {"valid_metric", e.valid_metric}});
    }
    j["epochs"] = std::move(epochs);
    j["best_epoch"] = report.best_epoch;
    j["test"] = metrics_to_json(report.test);
    j["skipped_negatives"] = report.skipped_negatives;
    j["wall_time_seconds"] = report.wall_time_seconds;
    return j;
}

ordered_json checkpoint_to_json(const TrainedModel& model) {
    const GraphContext& ctx = model.context;
    const E2EModel& conv = model.params.conv;
    ordered_json j;
    j["format"] = "hyperquery-checkpoint";
    j["version"] = kCheckpointVersion;
    j["config"] = config_to_json(model.config);
    j["entities"] = model.entities.names();
    j["relations"] = model.relations.names();

    ordered_json s;
    s["num_nodes"] = ctx.structure.num_nodes();
    s["edges"] = ctx.structure.edge_lists();
    s["edge_type"] = ctx.structure_type;
    s["type_visible"] = std::vector<int>(ctx.type_visible.begin(), ctx.type_visible.end());
    s["num_relations"] = ctx.num_relations;
    j["structure"] = std::move(s);
    j["clusters"] = {{"k", ctx.clusters.k},
                     {"epsilon", ctx.clusters.balance_epsilon},
                     {"cluster_of", ctx.clusters.cluster_of}};

    ordered_json m;
    m["omega"] = to_string(conv.conv.omega);
    m["bilinear"] = conv.conv.bilinear;
    m["aggregation"] = conv.conv.aggregation == Aggregation::mean ? "mean" : "harmonic";
    m["layer1"] = matrix_to_json(conv.layer1.weight);
    m["layer1"]["activation"] = activation_name(conv.layer1.activation);
    m["layer2"] = matrix_to_json(conv.layer2.weight);
    m["layer2"]["activation"] = activation_name(conv.layer2.activation);
    m["readout"] = readout_to_json(conv.readout);
    m["head"] = readout_to_json(model.params.head);
    j["model"] = std::move(m);
    return j;
}

TrainedModel checkpoint_from_json(const json& j) {
    if (j.value("format", "") != "hyperquery-checkpoint") throw LoadError("not a hyperquery checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
        throw LoadError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    }
    TrainedModel model;
    model.config = config_from_json(j.at("config"));
    for (const auto& name : j.at("entities").get<std::vector<std::string>>()) model.entities.intern(name);
    for (const auto& name : j.at("relations").get<std::vector<std::string>>()) model.relations.intern(name);

    GraphContext& ctx = model.context;
    const json& s = j.at("structure");
    ctx.structure = Hypergraph::build(s.at("edges").get<std::vector<std::vector<NodeId>>>(),
                                      s.at("num_nodes").get<std::size_t>());
    ctx.structure_type = s.at("edge_type").get<std::vector<RelationId>>();
    for (int v : s.at("type_visible").get<std::vector<int>>()) ctx.type_visible.push_back(static_cast<char>(v));
    ctx.num_relations = s.at("num_relations").get<std::size_t>();
    const json& c = j.at("clusters");
    ctx.clusters.k = c.at("k").get<std::uint32_t>();
    ctx.clusters.balance_epsilon = c.at("epsilon").get<double>();
    ctx.clusters.cluster_of = c.at("cluster_of").get<std::vector<ClusterId>>();
    if (ctx.clusters.num_nodes() != ctx.structure.num_nodes()) throw LoadError("checkpoint cluster count mismatch");
    ctx.pooling = model.config.pooling;
    ctx.rebuild_features();

    const json& m = j.at("model");
    E2EModel& conv = model.params.conv;
    conv.conv.omega = parse_omega(m.at("omega").get<std::string>());
    conv.conv.bilinear = m.at("bilinear").get<bool>();
    conv.conv.aggregation = m.at("aggregation").get<std::string>() == "harmonic" ? Aggregation::harmonic
                                                                                 : Aggregation::mean;
    conv.layer1.weight = matrix_from_json(m.at("layer1"));
    conv.layer1.activation = parse_activation(m.at("layer1").at("activation").get<std::string>());
    conv.layer2.weight = matrix_from_json(m.at("layer2"));
    conv.layer2.activation = parse_activation(m.at("layer2").at("activation").get<std::string>());
    conv.readout = readout_from_json(m.at("readout"));
    model.params.head = readout_from_json(m.at("head"));
    return model;
}

void save_checkpoint(const fs::path& path, const TrainedModel& model) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << checkpoint_to_json(model).dump() << '\n';
}

TrainedModel load_checkpoint(const fs::path& path) {
    std::ifstream in = open_input(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

std::string format_percent(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * value);
    return buf;
}

}  // namespace hyperquery
