#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pep/metrics.hpp"
#include "pep/model.hpp"
#include "pep/train.hpp"

namespace pep {

struct DatasetConfig {
  std::string format = "movielens1m";  // movielens1m | criteo | delimited
  std::filesystem::path path;
  std::string delimiter = "\t";
  std::size_t label_column = 0;
  std::vector<std::size_t> numeric_columns;
  bool has_header = false;
  std::uint64_t min_frequency = 0;
  std::uint64_t split_seed = 2021;
};

struct RunConfig {
  DatasetConfig dataset;
  ModelSpec model;
  AdamConfig adam;
  PruneConfig prune;
  std::vector<double> budget_fractions{0.5, 0.2, 0.05, 0.01, 0.001};
  RetrainConfig retrain;
  std::uint64_t seed = 2021;
  std::filesystem::path output_dir = "runs/default";
  bool wall_clock = true;
  std::size_t frequency_groups = 10;
  std::size_t threads = 1;

  // Config after `extends` resolution and command-line overrides.
  nlohmann::json resolved;

  TrainOptions train_options() const;
  // Absolute budgets for a table of `table_size` entries.
  std::vector<std::size_t> budgets(std::size_t table_size) const;
};

// Reads a flat JSON config. An "extends" key names a parent file (relative
// to the child) whose keys the child overrides; objects merge recursively.
nlohmann::json load_config_json(const std::filesystem::path& path);

RunConfig parse_config(nlohmann::json resolved, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {},
                      std::optional<std::filesystem::path> out_override = {});

// FNV-1a 64 of a canonical JSON dump, as 16 hex digits.
std::string hash_json(const nlohmann::json& j);

// Hash chain: dataset -> prune (model, optimizer, prune, seed) -> retrain.
std::string data_hash(const RunConfig& config);
std::string prune_hash(const RunConfig& config);
std::string retrain_hash(const RunConfig& config);

class Manifest {
 public:
  static Manifest load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  nlohmann::ordered_json& section(const std::string& name) { return doc_[name]; }
  const nlohmann::ordered_json* find(const std::string& name) const;
  const nlohmann::ordered_json& doc() const { return doc_; }

  // Throws a contract error unless section `name` exists with hash `expected`.
  void require_hash(const std::string& name, const std::string& expected) const;

 private:
  nlohmann::ordered_json doc_ = nlohmann::ordered_json::object();
};

struct CommandOptions {
  bool force = false;
};

struct IngestSummary {
  std::size_t samples = 0;
  std::size_t fields = 0;
  std::size_t features = 0;
  std::size_t train = 0, validation = 0, test = 0;
};

struct LoadedData {
  FieldSchema schema;
  DatasetSplit split;
};

IngestSummary cmd_ingest(const RunConfig& config, const CommandOptions& options);
LoadedData load_ingested(const RunConfig& config);

struct PruneSummary {
  std::size_t table_size = 0;
  std::vector<std::size_t> budgets;
  std::vector<std::size_t> captured_nonzeros;
  std::vector<std::size_t> captured_epochs;
  std::vector<std::size_t> unmet;
  std::size_t epochs_run = 0;
};

PruneSummary cmd_prune(const RunConfig& config, const CommandOptions& options);

// Retrain selector: "lth", "random", or "none" (snapshot at capture, no
// further training).
struct RetrainSummary {
  std::size_t budget_index = 0;
  std::string init;
  std::size_t nonzero_params = 0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double best_val_logloss = 0.0;
};

std::vector<RetrainSummary> cmd_retrain(const RunConfig& config, const CommandOptions& options,
                                        std::optional<std::size_t> budget_index, const std::string& init);

// Dense baseline of the given kind (LR, or uniform-embedding FM/DeepFM).
RetrainSummary cmd_baseline(const RunConfig& config, const CommandOptions& options, ModelKind kind);

// Evaluates a checkpoint on the test split. `target` is a manifest key
// such as "budget_0_lth" or "baseline_lr", or a path to a .pepv file.
EvalReport cmd_eval(const RunConfig& config, const CommandOptions& options, const std::string& target);

struct AnalyzeSummary {
  double spearman = 0.0;
  std::vector<std::filesystem::path> files;
};

// Interaction matrices (dense baseline vs pruned model), their difference,
// and the frequency/sparsity scatter for one budget.
AnalyzeSummary cmd_analyze(const RunConfig& config, const CommandOptions& options, std::size_t budget_index,
                           const std::string& init);

struct RunArtifacts {
  IngestSummary ingest;
  PruneSummary prune;
  std::vector<RetrainSummary> retrains;
};

RunArtifacts run_pipeline(const RunConfig& config, const CommandOptions& options);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRow>& rows);
void write_sparsity_csv(const std::filesystem::path& path, const std::vector<SparsityRow>& rows);
void write_matrix_csv(const std::filesystem::path& path, const InteractionMatrix& matrix,
                      const std::vector<std::string>& names);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace pep
