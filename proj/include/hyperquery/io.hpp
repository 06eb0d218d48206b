// io.hpp - dataset loaders, run reports and model checkpoints
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hyperquery/partitioner.hpp"
#include "hyperquery/train.hpp"

namespace hyperquery {

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Directory with train.txt / valid.txt / test.txt. Each line is
// relation<TAB>entity1<TAB>...<TAB>entityN. Vocabularies cover all splits in
// file order (train, valid, test).
KnowledgeDataset load_knowledge(const std::filesystem::path& dir);

// One tab-separated labeled hyperedge per line, same layout as above; the
// returned splits are all `train` (callers re-split).
KnowledgeHypergraph load_labeled(const std::filesystem::path& path);

struct SimpleLoadStats {
    std::size_t blank_lines = 0;
    std::size_t duplicate_members = 0;
};

// Whitespace-separated node tokens, one hyperedge per line; seeded shuffle
// then contiguous split by ratios.
SimpleDataset load_simple(const std::filesystem::path& path, double train_ratio, double valid_ratio,
                          std::uint64_t seed, SimpleLoadStats* stats = nullptr);

// `node cluster` lines.
void write_partition(std::ostream& out, const ClusterAssignment& c);

nlohmann::ordered_json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

nlohmann::ordered_json metrics_to_json(const TestMetrics& m);
nlohmann::ordered_json report_to_json(const TrainReport& report);

// Fixed top-level keys of a report; used by schema checks.
const std::vector<std::string>& report_fields();

inline constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json checkpoint_to_json(const TrainedModel& model);
TrainedModel checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_checkpoint(const std::filesystem::path& path);

// Percent with one decimal, as printed in human-readable summaries.
std::string format_percent(double value);

}  // namespace hyperquery
