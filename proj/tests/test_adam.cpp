#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "pep/adam.hpp"
#include "pep/rng.hpp"
#include "test_util.hpp"

using namespace pep;

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam;
  const auto slot = adam.add_tensor("w", 2);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.3, -5.0};
  adam.step();
  adam.update(slot, p, g);
  // Bias correction makes the first move lr * sign(g) up to eps.
  EXPECT_NEAR(p[0], 1.0 - 0.001, 1e-10);
  EXPECT_NEAR(p[1], -2.0 + 0.001, 1e-10);
}

TEST(Adam, ZeroGradientLeavesParameter) {
  Adam adam;
  const auto slot = adam.add_tensor("w", 3);
  std::vector<double> p{0.5, 0.0, -7.25};
  const auto before = p;
  const std::vector<double> g(3, 0.0);
  for (int i = 0; i < 10; ++i) {
    adam.step();
    adam.update(slot, p, g);
  }
  EXPECT_EQ(p, before);
}

TEST(Adam, MatchesScalarOracle) {
  Rng rng(3);
  AdamConfig cfg{0.01, 0.8, 0.99, 1e-7};
  Adam adam(cfg);
  const auto slot = adam.add_tensor("w", 5);
  std::vector<double> p(5);
  for (auto& x : p) x = rng.uniform(-1, 1);
  std::vector<oracle::ScalarAdam> ref(5, oracle::ScalarAdam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});
  std::vector<double> expect = p;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> g(5);
    for (auto& x : g) x = rng.uniform(-2, 2);
    adam.step();
    adam.update(slot, p, g);
    for (std::size_t k = 0; k < 5; ++k) expect[k] = ref[k].step(expect[k], g[k]);
  }
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(p[k], expect[k], 1e-12);
}

TEST(Adam, MaskedEntriesFrozenAndMomentsZero) {
  Rng rng(8);
  Adam adam;
  const auto slot = adam.add_tensor("emb", 6);
  std::vector<double> p{1, 2, 3, 4, 5, 6};
  const std::vector<std::uint8_t> keep{1, 0, 1, 0, 0, 1};
  std::vector<oracle::ScalarAdam> ref(6);
  std::vector<double> expect = p;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> g(6);
    for (auto& x : g) x = rng.uniform(-1, 1);
    adam.step();
    adam.update_masked(slot, p, g, keep);
    for (std::size_t k = 0; k < 6; ++k)
      if (keep[k]) expect[k] = ref[k].step(expect[k], g[k]);
  }
  for (std::size_t k = 0; k < 6; ++k) {
    if (keep[k]) {
      EXPECT_NEAR(p[k], expect[k], 1e-12);
    } else {
      EXPECT_EQ(p[k], static_cast<double>(k + 1));
      EXPECT_EQ(adam.first_moment(slot)[k], 0.0);
      EXPECT_EQ(adam.second_moment(slot)[k], 0.0);
    }
  }
}

TEST(Adam, AllZeroMaskChangesNothing) {
  Rng rng(9);
  Adam adam;
  const auto slot = adam.add_tensor("emb", 4);
  std::vector<double> p{0.1, -0.2, 0.3, -0.4};
  const auto before = p;
  const std::vector<std::uint8_t> keep(4, 0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> g(4);
    for (auto& x : g) x = rng.uniform(-1, 1);
    adam.step();
    adam.update_masked(slot, p, g, keep);
  }
  EXPECT_EQ(p, before);
}

TEST(Adam, Errors) {
  Adam adam;
  const auto slot = adam.add_tensor("tower", 2);
  std::vector<double> p(2, 0.0);
  const std::vector<double> g{1.0, 1.0};
  EXPECT_ERROR_KIND(adam.update(slot, p, g), ErrorKind::Contract);
  adam.step();
  const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
  try {
    adam.update(slot, p, bad);
    ADD_FAILURE() << "expected numeric error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    EXPECT_NE(std::string(e.what()).find("tower"), std::string::npos);
  }
  const std::vector<double> inf{std::numeric_limits<double>::infinity(), 0.0};
  EXPECT_ERROR_KIND(adam.update(slot, p, inf), ErrorKind::Numeric);
  const std::vector<double> shortg{1.0};
  EXPECT_ERROR_KIND(adam.update(slot, p, shortg), ErrorKind::Shape);
  const std::vector<std::uint8_t> keep{1};
  EXPECT_ERROR_KIND(adam.update_masked(slot, p, g, keep), ErrorKind::Shape);
}

TEST(Adam, SharedStepCounter) {
  Adam adam;
  const auto a = adam.add_tensor("a", 1);
  const auto b = adam.add_tensor("b", 1);
  std::vector<double> pa{0.0}, pb{0.0};
  const std::vector<double> g{1.0};
  adam.step();
  adam.update(a, pa, g);
  adam.step();
  adam.update(b, pb, g);
  // b's first moment update runs at t=2, so its bias correction differs.
  EXPECT_EQ(adam.steps(), 2u);
  EXPECT_NE(pa[0], pb[0]);
}
