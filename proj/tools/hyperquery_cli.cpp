// hyperquery - command line front end: partition, train, eval, query, sweep
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hyperquery/io.hpp"
#include "hyperquery/train.hpp"

namespace fs = std::filesystem;
using namespace hyperquery;

namespace {

struct TrainArgs {
    std::string task = "completion";
    std::string data;
    std::uint32_t k = 16;
    std::string omega;  // empty = task default
    std::string bilinear = "on";
    std::string aggregation = "mean";
    std::string pooling = "majority";
    std::size_t dim = 64;
    std::size_t epochs = 300;
    std::size_t patience = 20;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double epsilon = 0.05;
    std::vector<double> split{0.7, 0.1, 0.2};
};

void add_train_options(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--task", a.task, "completion | prediction | classification")
        ->check(CLI::IsMember({"completion", "prediction", "classification"}));
    cmd->add_option("--data", a.data, "knowledge directory or hyperedge file")->required();
    cmd->add_option("--k", a.k, "number of clusters")->check(CLI::PositiveNumber);
    cmd->add_option("--omega", a.omega, "mean | var | minmax")->check(CLI::IsMember({"mean", "var", "minmax"}));
    cmd->add_option("--bilinear", a.bilinear, "on | off")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--aggregation", a.aggregation, "edge-to-node aggregation: mean | harmonic")
        ->check(CLI::IsMember({"mean", "harmonic"}));
    cmd->add_option("--edge-pooling", a.pooling, "majority | multi_hot")
        ->check(CLI::IsMember({"majority", "multi_hot"}));
    cmd->add_option("--dim", a.dim, "hidden / representation dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", a.epochs, "maximum epochs per stage");
    cmd->add_option("--patience", a.patience, "early-stopping patience");
    cmd->add_option("--batch-size", a.batch_size)->check(CLI::PositiveNumber);
    cmd->add_option("--lr", a.lr, "learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed);
    cmd->add_option("--epsilon", a.epsilon, "partition balance slack");
    cmd->add_option("--split", a.split, "train,valid,test ratios")->delimiter(',')->expected(3);
}

TrainConfig to_config(const TrainArgs& a) {
    TrainConfig cfg = TrainConfig::defaults(parse_task(a.task));
    cfg.clusters = a.k;
    if (!a.omega.empty()) cfg.omega = parse_omega(a.omega);
    cfg.bilinear = a.bilinear == "on";
    cfg.aggregation = a.aggregation == "harmonic" ? Aggregation::harmonic : Aggregation::mean;
    cfg.pooling = a.pooling == "multi_hot" ? EdgePooling::multi_hot : EdgePooling::majority;
    cfg.dim = a.dim;
    cfg.epochs = a.epochs;
    cfg.patience = a.patience;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;
    cfg.partition_epsilon = a.epsilon;
    cfg.train_ratio = a.split[0];
    cfg.valid_ratio = a.split[1];
    cfg.test_ratio = a.split[2];
    cfg.validate();
    return cfg;
}

KnowledgeDataset knowledge_for(const TrainConfig& cfg, const fs::path& data) {
    if (fs::is_directory(data)) return load_knowledge(data);
    if (cfg.task != Task::classification) throw LoadError("completion expects a directory with train/valid/test");
    KnowledgeDataset d;
    d.graph = load_labeled(data);
    d.split = split_edges(d.graph.base.num_edges(), cfg.train_ratio, cfg.valid_ratio, cfg.seed);
    return d;
}

TrainResult run_training(const TrainConfig& cfg, const fs::path& data) {
    switch (cfg.task) {
        case Task::completion: return train_completion(knowledge_for(cfg, data), cfg);
        case Task::classification: return train_classification(knowledge_for(cfg, data), cfg);
        case Task::prediction:
            return train_prediction(load_simple(data, cfg.train_ratio, cfg.valid_ratio, cfg.seed), cfg);
    }
    throw std::logic_error("unreachable");
}

double primary_metric(const TrainConfig& cfg, const TestMetrics& m) {
    switch (cfg.task) {
        case Task::completion: return *m.mrr;
        case Task::prediction: return *m.auc;
        case Task::classification: return *m.accuracy;
    }
    return 0.0;
}

const char* primary_metric_name(Task task) {
    switch (task) {
        case Task::completion: return "mrr";
        case Task::prediction: return "auc";
        case Task::classification: return "accuracy";
    }
    return "metric";
}

void print_summary(std::ostream& out, const TestMetrics& m) {
    if (m.mrr) out << "MRR " << format_percent(*m.mrr) << "  ";
    if (m.hit1) out << "Hit@1 " << format_percent(*m.hit1) << "  ";
    if (m.hit3) out << "Hit@3 " << format_percent(*m.hit3) << "  ";
    if (m.auc) out << "AUC " << format_percent(*m.auc) << "  ";
    if (m.accuracy) out << "accuracy " << format_percent(*m.accuracy) << "  ";
    out << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << text;
}

void require_same(const Vocabulary& a, const Vocabulary& b, const char* what) {
    if (a.names() != b.names()) {
        throw LoadError(std::string("checkpoint and data disagree on ") + what + " (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
    }
}

TestMetrics evaluate(const TrainedModel& model, const fs::path& data) {
    const TrainConfig& cfg = model.config;
    if (cfg.task == Task::prediction) {
        SimpleDataset d = load_simple(data, cfg.train_ratio, cfg.valid_ratio, cfg.seed);
        require_same(model.entities, d.nodes, "node vocabulary");
        return evaluate_prediction(model, d);
    }
    KnowledgeDataset d = knowledge_for(cfg, data);
    require_same(model.entities, d.graph.entities, "entity vocabulary");
    require_same(model.relations, d.graph.relations, "relation vocabulary");
    return cfg.task == Task::completion ? evaluate_completion(model, d) : evaluate_classification(model, d);
}

std::vector<std::string> split_names(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperquery: clustering-bootstrapped hyperedge convolution"};
    app.require_subcommand(1);

    // partition
    std::string part_data, part_out;
    std::uint32_t part_k = 16;
    double part_eps = 0.05;
    std::uint64_t part_seed = 0;
    auto* part = app.add_subcommand("partition", "k-way partition of a hypergraph");
    part->add_option("data", part_data, "hyperedge file or knowledge directory")->required();
    part->add_option("--k", part_k)->check(CLI::PositiveNumber);
    part->add_option("--epsilon", part_eps);
    part->add_option("--seed", part_seed);
    part->add_option("-o,--output", part_out, "output file for `node cluster` lines")->required();

    // train
    TrainArgs train_args;
    std::string report_path, checkpoint_path;
    auto* train = app.add_subcommand("train", "train a model and write a JSON report");
    add_train_options(train, train_args);
    train->add_option("-o,--output", report_path, "report JSON path")->required();
    train->add_option("--checkpoint", checkpoint_path, "model checkpoint path");

    // eval
    std::string eval_ckpt, eval_data;
    auto* eval = app.add_subcommand("eval", "recompute test metrics from a checkpoint");
    eval->add_option("--checkpoint", eval_ckpt)->required();
    eval->add_option("--data", eval_data)->required();

    // query
    std::string query_ckpt, query_nodes;
    auto* query = app.add_subcommand("query", "score a node set");
    query->add_option("--checkpoint", query_ckpt)->required();
    query->add_option("--nodes", query_nodes, "comma-separated node names")->required();

    // sweep
    TrainArgs sweep_args;
    std::string sweep_param = "k", sweep_out;
    std::vector<std::string> sweep_values;
    auto* sweep = app.add_subcommand("sweep", "train once per parameter value and emit CSV");
    add_train_options(sweep, sweep_args);
    sweep->add_option("--param", sweep_param)->check(CLI::IsMember({"k", "dim", "lr", "epochs"}));
    sweep->add_option("--values", sweep_values)->delimiter(',')->required();
    sweep->add_option("-o,--output", sweep_out, "CSV path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*part) {
            Hypergraph h = fs::is_directory(part_data) ? load_knowledge(part_data).graph.base
                                                       : load_simple(part_data, 1.0, 0.0, 0).graph;
            PartitionOptions opts;
            opts.epsilon = part_eps;
            PartitionResult r = partition(h, part_k, part_seed, opts);
            std::ofstream out(part_out);
            if (!out) throw LoadError("cannot write " + part_out);
            write_partition(out, r.assignment);
            std::cout << "cut " << r.cut << "\n";
        } else if (*train) {
            const TrainConfig cfg = to_config(train_args);
            TrainResult result = run_training(cfg, train_args.data);
            write_text(report_path, report_to_json(result.report).dump(2) + "\n");
            if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, result.model);
            std::cerr << to_string(cfg.task) << " test: ";
            print_summary(std::cerr, result.report.test);
        } else if (*eval) {
            TrainedModel model = load_checkpoint(eval_ckpt);
            std::cout << metrics_to_json(evaluate(model, eval_data)).dump(2) << "\n";
        } else if (*query) {
            TrainedModel model = load_checkpoint(query_ckpt);
            std::vector<NodeId> ids;
            for (const auto& name : split_names(query_nodes)) {
                if (!model.entities.contains(name)) throw LoadError("unknown node '" + name + "'");
                ids.push_back(model.entities.id(name));
            }
            if (ids.empty()) throw LoadError("--nodes is empty");
            nlohmann::ordered_json out;
            if (model.config.task == Task::prediction) {
                out["edge_probability"] = edge_scores(model, {ids}).front();
            } else {
                nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
                for (const auto& r : predict_relation(model, ids)) {
                    ranked.push_back({{"relation", model.relations.name(r.relation)}, {"score", r.score}});
                }
                out["relations"] = std::move(ranked);
            }
            std::cout << out.dump(2) << "\n";
        } else if (*sweep) {
            std::ostringstream csv;
            const TrainConfig base = to_config(sweep_args);
            csv << sweep_param << "," << primary_metric_name(base.task) << "\n";
            for (const auto& value : sweep_values) {
                TrainArgs a = sweep_args;
                if (sweep_param == "k") a.k = static_cast<std::uint32_t>(std::stoul(value));
                if (sweep_param == "dim") a.dim = std::stoul(value);
                if (sweep_param == "lr") a.lr = std::stod(value);
                if (sweep_param == "epochs") a.epochs = std::stoul(value);
                const TrainConfig cfg = to_config(a);
                TrainResult r = run_training(cfg, a.data);
                csv << value << "," << primary_metric(cfg, r.report.test) << "\n";
                std::cerr << sweep_param << "=" << value << ": ";
                print_summary(std::cerr, r.report.test);
            }
            if (sweep_out.empty()) {
                std::cout << csv.str();
            } else {
                write_text(sweep_out, csv.str());
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
