#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pep/error.hpp"
#include "pep/prune_mask.hpp"
#include "pep/rng.hpp"
#include "pep/threshold.hpp"
#include "test_util.hpp"

using namespace pep;

namespace {

constexpr Granularity kAll[] = {Granularity::Global, Granularity::DimensionWise, Granularity::FeatureWise,
                                Granularity::FeatureDimensionWise};

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& x : m.data) x = rng.uniform(-scale, scale);
  return m;
}

Thresholds random_thresholds(Granularity g, std::size_t r, std::size_t c, Rng& rng, double lo, double hi) {
  Thresholds s(g, r, c, 0.0);
  for (auto& x : s.values) x = rng.uniform(lo, hi);
  return s;
}

// Sum of upstream * S(V, s): a scalar whose gradient is the backward pass.
double dot_loss(const Matrix& up, const Matrix& v, const Thresholds& s) {
  const Matrix out = soft_threshold(v, s);
  double total = 0.0;
  for (std::size_t k = 0; k < out.data.size(); ++k) total += up.data[k] * out.data[k];
  return total;
}

}  // namespace

TEST(SoftThreshold, Examples) {
  EXPECT_DOUBLE_EQ(soft_threshold_value(0.5, 0.2), 0.3);
  EXPECT_EQ(soft_threshold_value(-0.1, 0.2), 0.0);
  EXPECT_EQ(soft_threshold_value(0.0, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(soft_threshold_value(-0.5, 0.2), -0.3);
  // Exactly at the threshold the entry counts as pruned.
  EXPECT_EQ(soft_threshold_value(0.2, 0.2), 0.0);
}

TEST(SoftThreshold, MatrixAppliesPerGranularity) {
  Matrix v(2, 2);
  v.data = {0.9, -0.9, 0.3, 0.6};
  Thresholds fd(Granularity::FeatureDimensionWise, 2, 2, 0.0);
  fd.values = {0.0, 0.0, 2.0, -2.0};  // row 1 thresholds g = 0.881, 0.119
  const Matrix out = soft_threshold(v, fd);
  EXPECT_NEAR(out(0, 0), 0.9 - 0.5, 1e-15);
  EXPECT_NEAR(out(0, 1), -0.4, 1e-15);
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_NEAR(out(1, 1), 0.6 - oracle::sigmoid(-2.0), 1e-15);
  Thresholds wrong(Granularity::FeatureDimensionWise, 3, 2, 0.0);
  EXPECT_ERROR_KIND(soft_threshold(v, wrong), ErrorKind::Shape);
}

TEST(GSigmoid, Values) {
  EXPECT_EQ(g_sigmoid(0.0), 0.5);
  EXPECT_NEAR(g_sigmoid(-15.0) / 3.0590227e-7, 1.0, 1e-6);
  EXPECT_NEAR(g_sigmoid(-150.0) / std::exp(-150.0), 1.0, 1e-12);
  EXPECT_NEAR(g_sigmoid(-150.0), 7.1751e-66, 1e-69);
  EXPECT_GT(g_sigmoid(-700.0), 0.0);
  EXPECT_EQ(g_sigmoid(800.0), 1.0);
  EXPECT_NEAR(g_sigmoid_grad(-15.0), 3.0590e-7, 1e-10);
  EXPECT_EQ(g_sigmoid_grad(0.0), 0.25);
  for (double s : {-30.0, -3.0, -0.5, 0.0, 1.0, 7.0}) {
    EXPECT_NEAR(g_sigmoid_grad(s), g_sigmoid(s) * (1.0 - g_sigmoid(s)), 1e-16);
    EXPECT_NEAR(g_sigmoid_grad(s), oracle::central_difference(g_sigmoid, s, 1e-5), 1e-9);
  }
}

TEST(GProperties, SigmoidPassesAtNegativeInits) {
  const std::vector<double> probes{-200, -150, -50, -15, -5, -1, 0, 1, 5, 15, 50};
  for (double s_init : {-15.0, -150.0, 0.0}) {
    const auto r = check_g_properties(GKind::Sigmoid, s_init, probes);
    EXPECT_TRUE(r.ok()) << s_init;
    EXPECT_TRUE(r.positive && r.monotone && r.derivative_bounded && r.slow_start);
    EXPECT_LT(r.derivative_at_init, 1.0);
  }
  EXPECT_NEAR(check_g_properties(GKind::Sigmoid, -15.0, probes).derivative_at_init, 3.06e-7, 1e-9);
  const std::vector<double> three{-5, 0, 5};
  const auto r = check_g_properties(GKind::Sigmoid, -15.0, three);
  EXPECT_EQ(r.max_derivative, 0.25);
}

TEST(Granularity, ShapeLaw) {
  EXPECT_EQ(threshold_count(Granularity::Global, 7, 3), 1u);
  EXPECT_EQ(threshold_count(Granularity::DimensionWise, 7, 3), 3u);
  EXPECT_EQ(threshold_count(Granularity::FeatureWise, 7, 3), 7u);
  EXPECT_EQ(threshold_count(Granularity::FeatureDimensionWise, 7, 3), 21u);
  for (Granularity g : kAll) EXPECT_EQ(parse_granularity(to_string(g)), g);
  EXPECT_ERROR_KIND(parse_granularity("row"), ErrorKind::Input);
}

TEST(Backward, GlobalExample) {
  Matrix v(1, 1);
  v.data = {0.5};
  const double s0 = -std::log(4.0);  // g = 0.2
  Thresholds s(Granularity::Global, 1, 1, s0);
  Matrix up(1, 1);
  up.data = {1.0};
  const auto g = backward_through_threshold(up, v, s);
  EXPECT_EQ(g.weights(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.thresholds[0], -g_sigmoid_grad(s0));
  EXPECT_NEAR(g.thresholds[0], -0.16, 1e-15);
}

TEST(Backward, PrunedEntriesGetNoGradient) {
  Matrix v(1, 3);
  v.data = {0.3, -0.01, 0.0};
  Thresholds s(Granularity::Global, 1, 3, -std::log(4.0));
  Matrix up(1, 3);
  up.data = {2.0, 5.0, 7.0};
  const auto g = backward_through_threshold(up, v, s);
  EXPECT_EQ(g.weights(0, 1), 0.0);
  EXPECT_EQ(g.weights(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(g.thresholds[0], -2.0 * g_sigmoid_grad(s.values[0]));
}

TEST(Backward, CoarseGranularitySums) {
  Rng rng(5);
  const Matrix v = random_matrix(4, 3, rng);
  const Matrix up = random_matrix(4, 3, rng);
  Thresholds fd(Granularity::FeatureDimensionWise, 4, 3, -1.5);
  const auto fine = backward_through_threshold(up, v, fd);
  for (Granularity g : kAll) {
    Thresholds s(g, 4, 3, -1.5);
    const auto coarse = backward_through_threshold(up, v, s);
    EXPECT_EQ(coarse.weights, fine.weights);
    std::vector<double> expect(s.values.size(), 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) expect[s.index(i, j)] += fine.thresholds[fd.index(i, j)];
    for (std::size_t k = 0; k < expect.size(); ++k) EXPECT_NEAR(coarse.thresholds[k], expect[k], 1e-15);
  }
}

TEST(Backward, FiniteDifferenceAwayFromKinks) {
  Rng rng(11);
  for (Granularity gran : kAll) {
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix v = random_matrix(5, 4, rng);
      const Matrix up = random_matrix(5, 4, rng);
      const Thresholds s = random_thresholds(gran, 5, 4, rng, -3.0, -0.5);
      const auto g = backward_through_threshold(up, v, s);
      for (std::size_t k = 0; k < v.data.size(); ++k) {
        const double margin = std::fabs(std::fabs(v.data[k]) - g_sigmoid(s.values[s.index(k / 4, k % 4)]));
        if (margin < 1e-3 || std::fabs(v.data[k]) < 1e-3) continue;
        auto f = [&](double x) {
          Matrix w = v;
          w.data[k] = x;
          return dot_loss(up, w, s);
        };
        EXPECT_LT(oracle::relative_error(g.weights.data[k], oracle::central_difference(f, v.data[k])), 1e-6);
      }
      for (std::size_t t = 0; t < s.values.size(); ++t) {
        bool near_kink = false;
        for (std::size_t k = 0; k < v.data.size(); ++k) {
          if (s.index(k / 4, k % 4) != t) continue;
          near_kink |= std::fabs(std::fabs(v.data[k]) - g_sigmoid(s.values[t])) < 1e-3;
        }
        if (near_kink) continue;
        auto f = [&](double x) {
          Thresholds w = s;
          w.values[t] = x;
          return dot_loss(up, v, w);
        };
        EXPECT_LT(oracle::relative_error(g.thresholds[t], oracle::central_difference(f, s.values[t])), 1e-6)
            << to_string(gran);
      }
    }
  }
}

TEST(Backward, RowFormMatchesMatrixForm) {
  Rng rng(3);
  const Matrix v = random_matrix(3, 4, rng);
  const Matrix up = random_matrix(3, 4, rng);
  const Thresholds s = random_thresholds(Granularity::DimensionWise, 3, 4, rng, -2.0, 0.0);
  const auto full = backward_through_threshold(up, v, s);
  Matrix gw(3, 4);
  std::vector<double> gs(s.values.size(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) backward_threshold_row(up.row(i), v.row(i), s, i, GKind::Sigmoid, gw.row(i), gs);
  EXPECT_EQ(gw, full.weights);
  for (std::size_t k = 0; k < gs.size(); ++k) EXPECT_NEAR(gs[k], full.thresholds[k], 1e-15);
}

TEST(Properties, SymmetryContractionMonotonicity) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const double v = rng.uniform(-2.0, 2.0);
    const double s = rng.uniform(-20.0, 5.0);
    const double s_up = s + rng.uniform(0.0, 3.0);
    const double g = g_sigmoid(s);
    const double out = soft_threshold_value(v, g);
    EXPECT_EQ(soft_threshold_value(-v, g), -out);
    EXPECT_LE(std::fabs(out), std::fabs(v));
    if (v != 0.0) EXPECT_LT(std::fabs(out), std::fabs(v));
    EXPECT_TRUE(out == 0.0 || sign(out) == sign(v));
    EXPECT_LE(std::fabs(soft_threshold_value(v, g_sigmoid(s_up))), std::fabs(out));
  }
}

TEST(Properties, MaskMatchesThresholdRule) {
  Rng rng(8);
  const Matrix v = random_matrix(20, 6, rng, 0.8);
  const Thresholds s = random_thresholds(Granularity::FeatureDimensionWise, 20, 6, rng, -3.0, 1.0);
  const PruneMask m = extract_mask(soft_threshold(v, s), v);
  std::size_t count = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(m.at(i, j), std::fabs(v(i, j)) > g_sigmoid(s.at(i, j)));
      count += m.at(i, j);
    }
  }
  EXPECT_EQ(m.nonzero_count, count);
  Thresholds higher = s;
  for (auto& x : higher.values) x += 0.5;
  EXPECT_LE(extract_mask(soft_threshold(v, higher), v).nonzero_count, m.nonzero_count);
}

TEST(MakeEmbedding, UniformInitAndThresholds) {
  Rng rng(1);
  const EmbeddingTable t = make_embedding(50, 16, Granularity::DimensionWise, -15.0, rng);
  EXPECT_EQ(t.thresholds.values.size(), 16u);
  for (double s : t.thresholds.values) EXPECT_EQ(s, -15.0);
  const double bound = 1.0 / std::sqrt(16.0);
  for (double x : t.weights.data) {
    EXPECT_LE(std::fabs(x), bound);
  }
  // At s_init = -15 essentially nothing is pruned.
  EXPECT_EQ(extract_mask(t.reparameterized(), t.weights).nonzero_count, 50u * 16u);
}
