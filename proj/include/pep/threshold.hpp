#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pep/matrix.hpp"

namespace pep {

// Sharing pattern of the learnable thresholds over an N x d table.
enum class Granularity : std::uint8_t {
  Global = 0,                // one scalar
  DimensionWise = 1,         // one per embedding dimension
  FeatureWise = 2,           // one per feature row
  FeatureDimensionWise = 3,  // one per entry
};

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view name);

// Number of threshold parameters for a rows x cols table.
std::size_t threshold_count(Granularity g, std::size_t rows, std::size_t cols);

// Threshold parameters s with the shape implied by their granularity.
struct Thresholds {
  Granularity granularity = Granularity::Global;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Thresholds() = default;
  Thresholds(Granularity g, std::size_t r, std::size_t c, double init)
      : granularity(g), rows(r), cols(c), values(threshold_count(g, r, c), init) {}

  // Index of the parameter governing entry (i, j).
  std::size_t index(std::size_t i, std::size_t j) const {
    switch (granularity) {
      case Granularity::Global: return 0;
      case Granularity::DimensionWise: return j;
      case Granularity::FeatureWise: return i;
      case Granularity::FeatureDimensionWise: return i * cols + j;
    }
    return 0;
  }

  double at(std::size_t i, std::size_t j) const { return values[index(i, j)]; }

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

enum class GKind : std::uint8_t { Sigmoid = 0 };

// Threshold function g(s) = 1 / (1 + exp(-s)), evaluated without overflow for
// large |s|.
inline double g_sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// g'(s) = g(s)(1 - g(s)), written so it stays positive far into both tails.
inline double g_sigmoid_grad(double s) {
  const double e = std::exp(-std::fabs(s));
  const double denom = 1.0 + e;
  return e / (denom * denom);
}

inline double g_value(GKind, double s) { return g_sigmoid(s); }
inline double g_grad(GKind, double s) { return g_sigmoid_grad(s); }

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// One entry of S(V, s) = sign(V) * max(0, |V| - g(s)).
inline double soft_threshold_value(double v, double threshold) {
  const double shrunk = std::fabs(v) - threshold;
  return shrunk > 0.0 ? sign(v) * shrunk : 0.0;
}

Matrix soft_threshold(const Matrix& weights, const Thresholds& s, GKind g = GKind::Sigmoid);

// Writes S(V, s) for a single row into `out`.
void soft_threshold_row(std::span<const double> weights, const Thresholds& s, std::size_t row,
                        GKind g, std::span<double> out);

struct ThresholdGrads {
  Matrix weights;
  std::vector<double> thresholds;
};

// Sub-gradient through the reparameterization: the indicator 1{S(V,s) != 0}
// gates both the weight gradient and the threshold gradient. Coarse
// thresholds receive the sum of their entries' contributions.
ThresholdGrads backward_through_threshold(const Matrix& upstream, const Matrix& weights,
                                          const Thresholds& s, GKind g = GKind::Sigmoid);

// Row-restricted form used by the trainer; accumulates into the outputs.
void backward_threshold_row(std::span<const double> upstream, std::span<const double> weights,
                            const Thresholds& s, std::size_t row, GKind g,
                            std::span<double> grad_weights, std::span<double> grad_thresholds);

struct GPropertyReport {
  bool positive = true;
  bool monotone = true;
  bool derivative_bounded = true;  // 0 < g'(s) <= bound at every probe
  bool slow_start = true;          // g'(s_init) < 1
  double derivative_bound = 0.25;
  double max_derivative = 0.0;
  double derivative_at_init = 0.0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

GPropertyReport check_g_properties(GKind g, double s_init, std::span<const double> probe_points);

// Dense embedding matrix with its learnable thresholds.
struct EmbeddingTable {
  Matrix weights;
  Thresholds thresholds;
  double s_init = -15.0;
  GKind g_kind = GKind::Sigmoid;

  std::size_t rows() const { return weights.rows; }
  std::size_t dim() const { return weights.cols; }

  Matrix reparameterized() const { return soft_threshold(weights, thresholds, g_kind); }

  // s_init is construction metadata and is not persisted.
  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.weights == b.weights && a.thresholds == b.thresholds && a.g_kind == b.g_kind;
  }
};

class Rng;

// Weights uniform in [-1/sqrt(d), 1/sqrt(d)], thresholds at s_init.
EmbeddingTable make_embedding(std::size_t rows, std::size_t dim, Granularity g, double s_init,
                              Rng& rng);

}  // namespace pep
