#include "pep/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "pep/error.hpp"
#include "pep/metrics.hpp"
#include "pep/rng.hpp"

namespace pep {

namespace {

// Fixed shard count per batch keeps the gradient reduction order independent
// of how many threads execute the shards.
constexpr std::size_t kShards = 8;

enum class EmbeddingMode { Thresholded, Masked };

template <typename Fn>
void for_shards(std::size_t shards, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || shards <= 1) {
    for (std::size_t s = 0; s < shards; ++s) fn(s);
    return;
  }
  const std::size_t workers = std::min(threads, shards);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t s = w; s < shards; s += workers) fn(s);
    });
  }
}

std::vector<std::size_t> hidden_sizes(const MLPParams& mlp) {
  std::vector<std::size_t> hidden;
  for (std::size_t l = 0; l + 1 < mlp.layers.size(); ++l) hidden.push_back(mlp.layers[l].weight.rows);
  return hidden;
}

ModelSpec spec_of(const Model& model) {
  ModelSpec spec;
  spec.kind = model.kind;
  spec.feature_count = model.feature_count();
  spec.field_count = model.field_count;
  spec.dim = model.dim();
  spec.hidden = hidden_sizes(model.mlp);
  spec.granularity = model.embedding.thresholds.granularity;
  spec.s_init = model.embedding.s_init;
  return spec;
}

// Minibatch Adam training of one model in one embedding mode.
class Trainer {
 public:
  Trainer(Model& model, EmbeddingMode mode, const PruneMask* mask, const TrainOptions& options)
      : model_(model), mode_(mode), mask_(mask), options_(options), adam_(options.adam) {
    const std::size_t n = model.feature_count();
    const std::size_t d = model.dim();
    m_ = model.field_count;
    if (mode_ == EmbeddingMode::Masked) {
      require(mask_ != nullptr && mask_->rows == n && mask_->cols == d, ErrorKind::Contract,
              "mask shape does not match the embedding table");
    }
    slot_w_ = adam_.add_tensor("linear.weights", n);
    slot_b_ = adam_.add_tensor("linear.bias", 1);
    if (model.has_embedding()) {
      slot_v_ = adam_.add_tensor("embedding.weights", n * d);
      if (mode_ == EmbeddingMode::Thresholded) {
        slot_s_ = adam_.add_tensor("embedding.thresholds", model.embedding.thresholds.values.size());
        grad_s_.assign(model.embedding.thresholds.values.size(), 0.0);
        grad_v_ = Matrix(n, d);
      }
    }
    for (std::size_t l = 0; l < model.mlp.layers.size(); ++l) {
      const auto& layer = model.mlp.layers[l];
      slot_mlp_.push_back({adam_.add_tensor("mlp." + std::to_string(l) + ".weight", layer.weight.size()),
                           adam_.add_tensor("mlp." + std::to_string(l) + ".bias", layer.bias.size())});
    }
    grad_w_.assign(n, 0.0);
    grad_active_ = Matrix(n, d);
    row_touched_.assign(n, 0);
    shard_ws_.resize(kShards);
    if (!model.mlp.empty()) {
      shard_mlp_.assign(kShards, model.mlp.zeros_like());
      mlp_total_ = model.mlp.zeros_like();
    }
    refresh_active();
  }

  // While retraining the masked weights are used directly.
  void set_threshold_decay(double decay) { threshold_decay_ = decay; }

  const Matrix& active() const {
    return mode_ == EmbeddingMode::Thresholded ? active_ : model_.embedding.weights;
  }

  void refresh_active() {
    if (mode_ == EmbeddingMode::Thresholded) active_ = model_.embedding.reparameterized();
  }

  // One pass over `samples` in a seeded order; returns mean training logloss.
  double run_epoch(const SampleSet& samples, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      loss_sum += run_batch(samples, std::span<const std::size_t>(order.data() + start, end - start));
    }
    return loss_sum / static_cast<double>(samples.size());
  }

 private:
  double run_batch(const SampleSet& samples, std::span<const std::size_t> batch) {
    const std::size_t b = batch.size();
    const std::size_t d = model_.dim();
    const std::size_t stride = m_ * d;
    row_grads_.assign(b * stride, 0.0);
    dlogits_.assign(b, 0.0);
    losses_.assign(b, 0.0);
    const double scale = 1.0 / static_cast<double>(b);

    for_shards(kShards, options_.threads, [&](std::size_t s) {
      const std::size_t lo = s * b / kShards, hi = (s + 1) * b / kShards;
      SampleWorkspace& ws = shard_ws_[s];
      MLPParams* mlp_grads = shard_mlp_.empty() ? nullptr : &shard_mlp_[s];
      for (std::size_t k = lo; k < hi; ++k) {
        const auto features = samples.features(batch[k]);
        const double y = samples.label(batch[k]);
        const double logit = model_logit(model_, active(), features, ws);
        const double p = predict_proba(logit);
        losses_[k] = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        dlogits_[k] = (p - y) * scale;
        model_backward(model_, ws, dlogits_[k], std::span<double>(row_grads_.data() + k * stride, stride),
                       mlp_grads);
      }
    });

    // Reduction in sample order.
    double grad_b = 0.0;
    touched_.clear();
    for (std::size_t k = 0; k < b; ++k) {
      grad_b += dlogits_[k];
      const auto features = samples.features(batch[k]);
      for (std::size_t f = 0; f < m_; ++f) {
        const std::uint32_t row = features[f];
        grad_w_[row] += dlogits_[k];
        if (!row_touched_[row]) {
          row_touched_[row] = 1;
          touched_.push_back(row);
        }
        if (d > 0) {
          auto dst = grad_active_.row(row);
          const double* src = row_grads_.data() + k * stride + f * d;
          for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
      }
    }
    if (!shard_mlp_.empty()) {
      for (std::size_t l = 0; l < mlp_total_.layers.size(); ++l) {
        auto& tw = mlp_total_.layers[l].weight.data;
        auto& tb = mlp_total_.layers[l].bias;
        std::fill(tw.begin(), tw.end(), 0.0);
        std::fill(tb.begin(), tb.end(), 0.0);
        for (auto& shard : shard_mlp_) {
          auto& sw = shard.layers[l].weight.data;
          auto& sb = shard.layers[l].bias;
          for (std::size_t k = 0; k < tw.size(); ++k) tw[k] += sw[k];
          for (std::size_t k = 0; k < tb.size(); ++k) tb[k] += sb[k];
          std::fill(sw.begin(), sw.end(), 0.0);
          std::fill(sb.begin(), sb.end(), 0.0);
        }
      }
    }

    adam_.step();
    adam_.update(slot_w_, model_.linear.weights, grad_w_);
    adam_.update(slot_b_, std::span<double>(&model_.linear.bias, 1), std::span<const double>(&grad_b, 1));
    if (model_.has_embedding()) {
      auto& table = model_.embedding;
      if (mode_ == EmbeddingMode::Thresholded) {
        for (std::uint32_t row : touched_) {
          backward_threshold_row(grad_active_.row(row), table.weights.row(row), table.thresholds, row,
                                 table.g_kind, grad_v_.row(row), grad_s_);
        }
        adam_.update(slot_v_, table.weights.data, grad_v_.data);
        if (threshold_decay_ != 0.0) {
          for (std::size_t k = 0; k < grad_s_.size(); ++k) grad_s_[k] += threshold_decay_ * table.thresholds.values[k];
        }
        adam_.update(slot_s_, table.thresholds.values, grad_s_);
        for (std::uint32_t row : touched_) {
          auto g = grad_v_.row(row);
          std::fill(g.begin(), g.end(), 0.0);
        }
        std::fill(grad_s_.begin(), grad_s_.end(), 0.0);
      } else {
        adam_.update_masked(slot_v_, table.weights.data, grad_active_.data, mask_->keep);
      }
    }
    for (std::size_t l = 0; l < slot_mlp_.size(); ++l) {
      adam_.update(slot_mlp_[l].first, model_.mlp.layers[l].weight.data, mlp_total_.layers[l].weight.data);
      adam_.update(slot_mlp_[l].second, model_.mlp.layers[l].bias, mlp_total_.layers[l].bias);
    }

    for (std::uint32_t row : touched_) {
      grad_w_[row] = 0.0;
      row_touched_[row] = 0;
      if (d > 0) {
        auto g = grad_active_.row(row);
        std::fill(g.begin(), g.end(), 0.0);
      }
    }
    refresh_active();

    double loss = 0.0;
    for (double l : losses_) loss += l;
    return loss;
  }

  Model& model_;
  EmbeddingMode mode_;
  const PruneMask* mask_;
  TrainOptions options_;
  Adam adam_;
  std::size_t m_ = 0;
  double threshold_decay_ = 0.0;
  std::size_t slot_w_ = 0, slot_b_ = 0, slot_v_ = 0, slot_s_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> slot_mlp_;

  Matrix active_;
  std::vector<double> grad_w_;
  Matrix grad_active_;
  Matrix grad_v_;
  std::vector<double> grad_s_;
  std::vector<std::uint8_t> row_touched_;
  std::vector<std::uint32_t> touched_;
  std::vector<double> row_grads_, dlogits_, losses_;
  std::vector<SampleWorkspace> shard_ws_;
  std::vector<MLPParams> shard_mlp_;
  MLPParams mlp_total_;
};

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  std::int64_t ms() const {
    if (!enabled_) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

void log_row(const TrainOptions& options, const EpochRow& row) {
  if (!options.verbose) return;
  std::fprintf(stderr, "[%s] epoch %zu train %.5f val %.5f auc %.5f nnz %zu\n", row.stage.c_str(),
               row.epoch, row.train_logloss, row.val_logloss, row.val_auc, row.nonzero_count);
}

double safe_auc(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  try {
    return auc(probs, labels);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UndefinedMetric) throw;
    return 0.5;
  }
}

void require_finite(double v, const char* what, std::size_t epoch) {
  require(std::isfinite(v), ErrorKind::Numeric,
          std::string(what) + " is not finite at epoch " + std::to_string(epoch));
}

}  // namespace

double logloss(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  require(probs.size() == labels.size(), ErrorKind::Shape, "logloss: length mismatch");
  require(!probs.empty(), ErrorKind::Size, "logloss of an empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    sum += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -sum / static_cast<double>(probs.size());
}

void PruneConfig::validate(std::size_t table_size) const {
  require(!budgets.empty(), ErrorKind::Input, "prune config needs at least one budget");
  require(std::isfinite(threshold_decay) && threshold_decay >= 0.0, ErrorKind::Input,
          "threshold_decay must be finite and >= 0");
  for (std::size_t k = 0; k < budgets.size(); ++k) {
    require(budgets[k] <= table_size, ErrorKind::Input,
            "budget " + std::to_string(budgets[k]) + " exceeds table size " + std::to_string(table_size));
    require(k == 0 || budgets[k] < budgets[k - 1], ErrorKind::Input, "budgets must be strictly descending");
  }
  require(batch_size > 0, ErrorKind::Input, "batch size must be positive");
}

std::vector<std::size_t> budgets_from_fractions(std::span<const double> fractions, std::size_t table_size) {
  std::vector<std::size_t> out;
  for (double f : fractions) {
    require(f > 0.0 && f <= 1.0, ErrorKind::Input, "budget fraction outside (0, 1]");
    out.push_back(static_cast<std::size_t>(std::floor(f * static_cast<double>(table_size))));
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string_view to_string(InitMode mode) { return mode == InitMode::Original ? "lth" : "random"; }

InitMode parse_init_mode(std::string_view name) {
  if (name == "lth" || name == "original") return InitMode::Original;
  if (name == "random") return InitMode::Random;
  fail(ErrorKind::Input, "unknown init mode '" + std::string(name) + "'");
}

void RetrainConfig::validate() const {
  require(patience >= 1, ErrorKind::Input, "patience must be at least 1");
  require(batch_size > 0, ErrorKind::Input, "batch size must be positive");
}

Evaluation evaluate(const Model& model, const Matrix& active, const SampleSet& samples, std::size_t threads) {
  Evaluation ev;
  ev.probs.assign(samples.size(), 0.0);
  const std::size_t n = samples.size();
  std::vector<SampleWorkspace> ws(kShards);
  for_shards(kShards, threads, [&](std::size_t s) {
    for (std::size_t i = s * n / kShards; i < (s + 1) * n / kShards; ++i) {
      ev.probs[i] = predict_proba(model_logit(model, active, samples.features(i), ws[s]));
    }
  });
  ev.logloss = logloss(ev.probs, samples.labels());
  ev.auc = safe_auc(ev.probs, samples.labels());
  return ev;
}

PruneResult prune_stage(Model& model, const DatasetSplit& data, const PruneConfig& config,
                        const TrainOptions& options) {
  require(model.has_embedding(), ErrorKind::Contract, "pruning needs a model with an embedding table");
  require(!data.train.empty() && !data.validation.empty(), ErrorKind::Size, "pruning needs train and validation data");
  const std::size_t n = model.feature_count();
  const std::size_t d = model.dim();
  config.validate(n * d);

  model.embedding.thresholds = Thresholds(config.granularity, n, d, config.s_init);
  model.embedding.s_init = config.s_init;

  PruneResult result;
  result.initial = model.embedding.weights;

  const auto freq = [&] {
    std::vector<std::uint64_t> f(n, 0);
    for (std::uint32_t idx : data.train.flat_features()) ++f[idx];
    return f;
  }();
  const std::size_t group_count = std::max<std::size_t>(1, std::min(options.frequency_groups, n));
  const auto group_of = frequency_groups(freq, group_count);

  Trainer trainer(model, EmbeddingMode::Thresholded, nullptr, options);
  trainer.set_threshold_decay(config.threshold_decay);
  Rng rng = Rng::stream(config.seed, "prune-shuffle");
  Stopwatch clock(options.wall_clock);
  std::size_t next_budget = 0;

  auto end_of_epoch = [&](std::size_t epoch, double train_loss) {
    const Matrix& active = trainer.active();
    const Evaluation val = evaluate(model, active, data.validation, options.threads);
    EpochRow row{"prune", epoch, train_loss, val.logloss, val.auc, count_parameters(active), clock.ms()};
    require_finite(row.train_logloss, "training logloss", epoch);
    require_finite(row.val_logloss, "validation logloss", epoch);
    result.history.push_back(row);
    log_row(options, row);

    const PruneMask current = extract_mask(active, result.initial);
    const auto groups = sparsity_by_group(current, group_of, group_count);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      result.sparsity.push_back({epoch, g, groups[g].mean, groups[g].variance});
    }
    while (next_budget < config.budgets.size() && current.nonzero_count <= config.budgets[next_budget]) {
      BudgetCheckpoint cp;
      cp.budget = config.budgets[next_budget];
      cp.epoch_reached = epoch;
      cp.mask = current;
      cp.thresholds = model.embedding.thresholds;
      cp.snapshot = model;
      cp.train_logloss = train_loss;
      cp.val_logloss = val.logloss;
      cp.val_auc = val.auc;
      result.checkpoints.push_back(std::move(cp));
      ++next_budget;
    }
  };

  end_of_epoch(0, evaluate(model, trainer.active(), data.train, options.threads).logloss);
  std::size_t epoch = 0;
  while (next_budget < config.budgets.size() && epoch < config.max_epochs) {
    ++epoch;
    const double train_loss = trainer.run_epoch(data.train, config.batch_size, rng);
    end_of_epoch(epoch, train_loss);
  }
  result.epochs_run = epoch;
  for (std::size_t k = next_budget; k < config.budgets.size(); ++k) {
    result.unmet_budgets.push_back(config.budgets[k]);
  }
  return result;
}

RetrainResult retrain_stage(const Model& architecture, const PruneMask& mask, const DatasetSplit& data,
                            const RetrainConfig& config, const TrainOptions& options, const char* stage) {
  config.validate();
  require(!data.train.empty() && !data.validation.empty(), ErrorKind::Size, "retraining needs train and validation data");
  const std::size_t n = architecture.feature_count();
  const std::size_t d = architecture.dim();
  require(mask.rows == n && mask.cols == d, ErrorKind::Contract,
          "mask shape " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
              " does not match table " + std::to_string(n) + "x" + std::to_string(d));
  require(mask.initial.rows == n && mask.initial.cols == d, ErrorKind::Contract,
          "mask carries initial weights of the wrong shape");

  Model model = architecture;
  const ModelSpec spec = spec_of(architecture);
  reinit_predictor(model, spec, config.seed, "retrain-predictor");
  if (config.init_mode == InitMode::Original) {
    model.embedding.weights = apply_mask(mask.initial, mask);
  } else {
    Rng rng = Rng::stream(config.seed, "retrain-embedding");
    EmbeddingTable fresh = make_embedding(n, d, Granularity::Global, 0.0, rng);
    model.embedding.weights = apply_mask(fresh.weights, mask);
  }

  RetrainResult result;
  result.mask = mask;
  Trainer trainer(model, EmbeddingMode::Masked, &result.mask, options);
  Rng rng = Rng::stream(config.seed, "retrain-shuffle");
  Stopwatch clock(options.wall_clock);

  auto record = [&](std::size_t epoch, double train_loss) {
    const Evaluation val = evaluate(model, trainer.active(), data.validation, options.threads);
    EpochRow row{stage, epoch, train_loss, val.logloss, val.auc, count_parameters(trainer.active()), clock.ms()};
    require_finite(row.train_logloss, "training logloss", epoch);
    require_finite(row.val_logloss, "validation logloss", epoch);
    result.history.push_back(row);
    log_row(options, row);
    return val.logloss;
  };

  result.best_val_logloss = record(0, evaluate(model, trainer.active(), data.train, options.threads).logloss);
  result.model = model;
  std::size_t since_best = 0;
  std::size_t epoch = 0;
  while (epoch < config.max_epochs && since_best < config.patience) {
    ++epoch;
    const double train_loss = trainer.run_epoch(data.train, config.batch_size, rng);
    const double val_loss = record(epoch, train_loss);
    if (val_loss < result.best_val_logloss) {
      result.best_val_logloss = val_loss;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  result.epochs_run = epoch;
  return result;
}

RetrainResult train_dense(const Model& model, const DatasetSplit& data, const RetrainConfig& config,
                          const TrainOptions& options, const char* stage) {
  RetrainConfig cfg = config;
  cfg.init_mode = InitMode::Original;
  return retrain_stage(model, PruneMask::full(model.embedding.weights), data, cfg, options, stage);
}

}  // namespace pep
