#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pep/adam.hpp"
#include "pep/model.hpp"
#include "pep/prune_mask.hpp"
#include "pep/schema.hpp"

namespace pep {

// -(1/|D|) sum [y log p + (1 - y) log(1 - p)].
double logloss(std::span<const double> probs, std::span<const std::uint8_t> labels);

struct TrainOptions {
  AdamConfig adam;
  std::size_t threads = 1;
  // When false, wall_ms is recorded as 0 so histories are byte-reproducible.
  bool wall_clock = true;
  std::size_t frequency_groups = 10;
  bool verbose = false;
};

struct EpochRow {
  std::string stage;
  std::size_t epoch = 0;
  double train_logloss = 0.0;
  double val_logloss = 0.0;
  double val_auc = 0.5;
  std::size_t nonzero_count = 0;
  std::int64_t wall_ms = 0;
};

struct SparsityRow {
  std::size_t epoch = 0;
  std::size_t group_id = 0;
  double mean_sparsity = 0.0;
  double var_sparsity = 0.0;
};

struct PruneConfig {
  Granularity granularity = Granularity::FeatureDimensionWise;
  double s_init = -15.0;
  // Target nonzero counts, strictly descending.
  std::vector<std::size_t> budgets;
  std::size_t max_epochs = 50;
  std::size_t batch_size = 1024;
  std::uint64_t seed = 0;
  // L2 coefficient on s, added to its gradient before the Adam step. 0 keeps
  // the thresholds purely loss-driven.
  double threshold_decay = 0.0;

  void validate(std::size_t table_size) const;
};

// Fractions of the dense table size, largest first after conversion.
std::vector<std::size_t> budgets_from_fractions(std::span<const double> fractions,
                                                std::size_t table_size);

struct BudgetCheckpoint {
  std::size_t budget = 0;
  std::size_t epoch_reached = 0;
  PruneMask mask;
  Thresholds thresholds;
  // Full model state at capture, for evaluation without retraining.
  Model snapshot;
  double train_logloss = 0.0;
  double val_logloss = 0.0;
  double val_auc = 0.5;
};

struct PruneResult {
  std::vector<BudgetCheckpoint> checkpoints;
  std::vector<std::size_t> unmet_budgets;
  std::vector<EpochRow> history;
  std::vector<SparsityRow> sparsity;
  Matrix initial;  // V0, snapshot before the first step
  std::size_t epochs_run = 0;
};

// Joint training of V, s and the predictor through S(V, s). After every
// epoch (and once before training) the nonzero count of S(V, s) is compared
// with each pending budget; the first epoch at or under a budget captures
// its mask. Stops once every budget is captured or max_epochs is reached.
PruneResult prune_stage(Model& model, const DatasetSplit& data, const PruneConfig& config,
                        const TrainOptions& options = {});

enum class InitMode { Original, Random };

std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view name);

struct RetrainConfig {
  InitMode init_mode = InitMode::Original;
  std::size_t patience = 2;
  std::size_t max_epochs = 30;
  std::size_t batch_size = 1024;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RetrainResult {
  Model model;  // parameters from the best validation epoch
  PruneMask mask;
  std::vector<EpochRow> history;
  std::size_t best_epoch = 0;
  double best_val_logloss = 0.0;
  std::size_t epochs_run = 0;
};

// Retrains `architecture` with a fixed mask. The embedding restarts from
// m * V0 (Original) or m * fresh uniform weights (Random); the linear part
// and deep tower are re-drawn from the retrain seed. Early stopping on
// validation logloss with `patience` epochs.
RetrainResult retrain_stage(const Model& architecture, const PruneMask& mask,
                            const DatasetSplit& data, const RetrainConfig& config,
                            const TrainOptions& options = {}, const char* stage = "retrain");

// Ordinary dense training (full mask) for baselines. The LR model has no
// embedding so its mask is empty.
RetrainResult train_dense(const Model& model, const DatasetSplit& data, const RetrainConfig& config,
                          const TrainOptions& options = {}, const char* stage = "dense");

struct Evaluation {
  double logloss = 0.0;
  double auc = 0.5;
  std::vector<double> probs;
};

Evaluation evaluate(const Model& model, const Matrix& active, const SampleSet& samples,
                    std::size_t threads = 1);

}  // namespace pep
