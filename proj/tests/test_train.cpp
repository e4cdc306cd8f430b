#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "pep/metrics.hpp"
#include "pep/rng.hpp"
#include "pep/synthetic.hpp"
#include "pep/train.hpp"
#include "test_util.hpp"

using namespace pep;

namespace {

struct Toy {
  FieldSchema schema;
  DatasetSplit split;
};

const Toy& toy() {
  static const Toy t = [] {
    PlantedConfig pc;
    pc.fields = 4;
    pc.features_per_field = 24;
    pc.signal_per_field = 4;
    pc.signal_probability = 0.5;
    pc.embedding_scale = 0.8;
    pc.samples = 6000;
    pc.seed = 5;
    const PlantedData data = make_planted(pc);
    Toy out;
    out.schema = build_schema(data.table, 0);
    out.split = split_dataset(encode_samples(out.schema, data.table), 3);
    return out;
  }();
  return t;
}

Model toy_model(ModelKind kind, std::size_t d, double s_init = -15.0) {
  ModelSpec spec;
  spec.kind = kind;
  spec.feature_count = toy().schema.feature_count();
  spec.field_count = toy().schema.field_count();
  spec.dim = d;
  spec.hidden = {8};
  spec.s_init = s_init;
  return make_model(spec, 17);
}

TrainOptions quiet(std::size_t threads = 1) {
  TrainOptions o;
  o.adam.lr = 0.01;
  o.threads = threads;
  o.wall_clock = false;
  o.frequency_groups = 4;
  return o;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) && std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Logloss, Values) {
  const std::vector<double> half{0.5, 0.5};
  const std::vector<std::uint8_t> y01{0, 1};
  EXPECT_NEAR(logloss(half, y01), std::log(2.0), 1e-15);
  const std::vector<double> good{0.9, 0.1};
  const std::vector<std::uint8_t> y10{1, 0};
  EXPECT_NEAR(logloss(good, y10), 0.10536051565782628, 1e-12);
  EXPECT_ERROR_KIND(logloss(std::vector<double>{}, std::vector<std::uint8_t>{}), ErrorKind::Size);
}

TEST(Budgets, FromFractions) {
  const std::vector<double> f{0.5, 0.1, 0.5, 0.01};
  EXPECT_EQ(budgets_from_fractions(f, 1000), (std::vector<std::size_t>{500, 100, 10}));
  const std::vector<double> bad{1.5};
  EXPECT_ERROR_KIND(budgets_from_fractions(bad, 10), ErrorKind::Input);
}

TEST(PruneConfig, Validation) {
  PruneConfig c;
  EXPECT_ERROR_KIND(c.validate(100), ErrorKind::Input);
  c.budgets = {50, 50};
  EXPECT_ERROR_KIND(c.validate(100), ErrorKind::Input);
  c.budgets = {101};
  EXPECT_ERROR_KIND(c.validate(100), ErrorKind::Input);
  c.budgets = {100, 3};
  EXPECT_NO_THROW(c.validate(100));
  c.threshold_decay = -1.0;
  EXPECT_ERROR_KIND(c.validate(100), ErrorKind::Input);
}

TEST(PruneStage, FullBudgetCapturedBeforeTraining) {
  Model model = toy_model(ModelKind::FM, 4);
  const Model before = model;
  PruneConfig c;
  c.budgets = {model.feature_count() * 4};
  c.max_epochs = 5;
  c.batch_size = 256;
  const PruneResult r = prune_stage(model, toy().split, c, quiet());
  ASSERT_EQ(r.checkpoints.size(), 1u);
  EXPECT_EQ(r.checkpoints[0].epoch_reached, 0u);
  EXPECT_EQ(r.epochs_run, 0u);
  EXPECT_TRUE(r.unmet_budgets.empty());
  EXPECT_EQ(model.embedding.weights, before.embedding.weights);
  EXPECT_TRUE(bit_equal(r.initial, before.embedding.weights));
}

TEST(PruneStage, LRModelRejected) {
  Model model = toy_model(ModelKind::LR, 4);
  PruneConfig c;
  c.budgets = {1};
  EXPECT_ERROR_KIND(prune_stage(model, toy().split, c, quiet()), ErrorKind::Contract);
}

TEST(PruneStage, DescendingBudgetsEachCapturedOnce) {
  Model model = toy_model(ModelKind::FM, 8);
  const std::size_t table = model.feature_count() * 8;
  PruneConfig c;
  c.s_init = -3.0;
  // The toy plateaus near a quarter of the table.
  c.budgets = {table / 2, table * 3 / 8, table * 11 / 40};
  c.max_epochs = 40;
  c.batch_size = 128;
  c.threshold_decay = 1e-3;
  const PruneResult r = prune_stage(model, toy().split, c, quiet());
  ASSERT_EQ(r.checkpoints.size() + r.unmet_budgets.size(), 3u);
  EXPECT_EQ(r.checkpoints.size(), 3u) << "unmet budgets: " << r.unmet_budgets.size();
  for (std::size_t k = 0; k < r.checkpoints.size(); ++k) {
    const auto& cp = r.checkpoints[k];
    EXPECT_EQ(cp.budget, c.budgets[k]);
    EXPECT_LE(cp.mask.nonzero_count, cp.budget);
    EXPECT_EQ(cp.mask.nonzero_count, r.history[cp.epoch_reached].nonzero_count);
    // First epoch at or under the budget.
    if (cp.epoch_reached > 0) EXPECT_GT(r.history[cp.epoch_reached - 1].nonzero_count, cp.budget);
    if (k > 0) EXPECT_GE(cp.epoch_reached, r.checkpoints[k - 1].epoch_reached);
    EXPECT_EQ(count_parameters(apply_mask(cp.snapshot.embedding.reparameterized(), cp.mask)),
              cp.mask.nonzero_count);
    EXPECT_TRUE(bit_equal(cp.mask.initial, r.initial));
  }
  EXPECT_EQ(r.history.size(), r.epochs_run + 1);
  EXPECT_EQ(r.sparsity.size(), r.history.size() * 4);
  for (const auto& row : r.history) {
    EXPECT_TRUE(std::isfinite(row.train_logloss));
    EXPECT_TRUE(std::isfinite(row.val_logloss));
    EXPECT_EQ(row.wall_ms, 0);
  }
}

TEST(PruneStage, UnreachableBudgetReportedUnmet) {
  Model model = toy_model(ModelKind::FM, 4);
  PruneConfig c;
  c.budgets = {model.feature_count() * 4, 0};
  c.max_epochs = 2;
  c.batch_size = 512;
  const PruneResult r = prune_stage(model, toy().split, c, quiet());
  EXPECT_EQ(r.checkpoints.size(), 1u);
  EXPECT_EQ(r.unmet_budgets, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.epochs_run, 2u);
}

TEST(PruneStage, DeterministicAcrossThreadCounts) {
  auto run = [](std::size_t threads) {
    Model model = toy_model(ModelKind::DeepFM, 4, -4.0);
    PruneConfig c;
    c.s_init = -4.0;
    c.budgets = {1};
    c.max_epochs = 2;
    c.batch_size = 300;
    c.seed = 9;
    c.threshold_decay = 1e-3;
    const PruneResult r = prune_stage(model, toy().split, c, quiet(threads));
    return std::make_pair(model, r.history);
  };
  const auto a = run(1);
  const auto b = run(4);
  EXPECT_EQ(a.first, b.first);
  ASSERT_EQ(a.second.size(), b.second.size());
  for (std::size_t i = 0; i < a.second.size(); ++i) {
    EXPECT_EQ(a.second[i].train_logloss, b.second[i].train_logloss);
    EXPECT_EQ(a.second[i].val_auc, b.second[i].val_auc);
  }
}

TEST(RetrainStage, LotteryTicketInitAndFrozenEntries) {
  Model model = toy_model(ModelKind::FM, 4);
  Rng rng(12);
  PruneMask mask = PruneMask::full(model.embedding.weights);
  mask.nonzero_count = 0;
  for (auto& k : mask.keep) {
    k = rng.uniform() < 0.3;
    mask.nonzero_count += k;
  }
  RetrainConfig rc;
  rc.max_epochs = 0;
  const RetrainResult zero = retrain_stage(model, mask, toy().split, rc, quiet());
  EXPECT_TRUE(bit_equal(zero.model.embedding.weights, apply_mask(mask.initial, mask)));

  rc.max_epochs = 4;
  rc.patience = 10;
  const RetrainResult r = retrain_stage(model, mask, toy().split, rc, quiet());
  const Matrix& w = r.model.embedding.weights;
  for (std::size_t k = 0; k < w.data.size(); ++k) {
    if (!mask.keep[k]) {
      EXPECT_EQ(w.data[k], 0.0);
    }
  }
  EXPECT_LE(count_parameters(w), mask.nonzero_count);
  EXPECT_EQ(r.history.size(), r.epochs_run + 1);
  double best = r.history[0].val_logloss;
  std::size_t best_epoch = 0;
  for (const auto& row : r.history)
    if (row.val_logloss < best) {
      best = row.val_logloss;
      best_epoch = row.epoch;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val_logloss, best);
  const Evaluation ev = evaluate(r.model, r.model.embedding.weights, toy().split.validation);
  EXPECT_NEAR(ev.logloss, best, 1e-12);
}

TEST(RetrainStage, RandomInitDiffersButKeepsMask) {
  Model model = toy_model(ModelKind::FM, 4);
  PruneMask mask = PruneMask::full(model.embedding.weights);
  for (std::size_t k = 0; k < mask.keep.size(); k += 2) mask.keep[k] = 0;
  mask.nonzero_count = mask.keep.size() / 2;
  RetrainConfig rc;
  rc.max_epochs = 0;
  rc.init_mode = InitMode::Random;
  rc.seed = 4;
  const RetrainResult r = retrain_stage(model, mask, toy().split, rc, quiet());
  EXPECT_FALSE(bit_equal(r.model.embedding.weights, apply_mask(mask.initial, mask)));
  for (std::size_t k = 0; k < mask.keep.size(); ++k)
    if (!mask.keep[k]) EXPECT_EQ(r.model.embedding.weights.data[k], 0.0);
}

TEST(RetrainStage, ShapeMismatchIsContractError) {
  Model model = toy_model(ModelKind::FM, 4);
  const PruneMask wrong = PruneMask::full(Matrix(3, 4));
  EXPECT_ERROR_KIND(retrain_stage(model, wrong, toy().split, RetrainConfig{}, quiet()), ErrorKind::Contract);
}

TEST(TrainDense, LearnsPlantedSignal) {
  Model model = toy_model(ModelKind::FM, 4);
  RetrainConfig rc;
  rc.max_epochs = 8;
  rc.batch_size = 128;
  const RetrainResult r = train_dense(model, toy().split, rc, quiet());
  EXPECT_GT(r.history[r.best_epoch].val_auc, 0.7);
  EXPECT_LT(r.best_val_logloss, r.history[0].val_logloss);
  Model lr = toy_model(ModelKind::LR, 4);
  const RetrainResult l = train_dense(lr, toy().split, rc, quiet());
  EXPECT_EQ(l.mask.nonzero_count, 0u);
  EXPECT_GT(l.history[l.best_epoch].val_auc, 0.6);
}
