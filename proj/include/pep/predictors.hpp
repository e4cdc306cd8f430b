#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pep/matrix.hpp"
#include "pep/prune_mask.hpp"

namespace pep {

class Rng;

struct LinearParams {
  std::vector<double> weights;  // one per global feature
  double bias = 0.0;

  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// ReLU tower ending in a single linear output unit.
struct MLPParams {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const { return layers.empty() ? 0 : layers.front().weight.cols; }
  bool empty() const { return layers.empty(); }
  std::size_t parameter_count() const;

  // Same architecture, all parameters zero.
  MLPParams zeros_like() const;

  friend bool operator==(const MLPParams&, const MLPParams&) = default;
};

// Weights uniform in +-1/sqrt(fan_in), biases zero.
MLPParams make_mlp(std::size_t input_width, std::span<const std::size_t> hidden, Rng& rng);

// Rows of `table` addressed by the sample's active features.
std::vector<std::span<const double>> lookup(const Matrix& table,
                                            std::span<const std::uint32_t> features);
// Reuses `rows` to avoid a per-sample allocation.
void lookup_into(const Matrix& table, std::span<const std::uint32_t> features,
                 std::vector<std::span<const double>>& rows);
std::vector<std::vector<double>> lookup(const SparseTable& table,
                                        std::span<const std::uint32_t> features);

struct FMCache {
  std::vector<std::span<const double>> rows;
  std::vector<double> sum;  // sum_i v_i
  bool valid = false;
};

// Pairwise term sum_{i<j} <v_i, v_j> through the O(M d) identity
// 0.5 * sum_k [(sum_i v_ik)^2 - sum_i v_ik^2].
double fm_interaction(std::span<const std::span<const double>> rows, FMCache& cache);

// b + sum_i w[f_i] + pairwise term.
double fm_forward(const LinearParams& linear, const Matrix& embedding,
                  std::span<const std::uint32_t> features, FMCache& cache);

// d(logit)/d(v_i) = sum_j v_j - v_i, scaled by dlogit. `row_grads` is M x d
// row-major and is overwritten.
void fm_backward(const FMCache& cache, double dlogit, std::span<double> row_grads);

struct MLPCache {
  // activations[0] is the input; activations[l + 1] the output of layer l.
  std::vector<std::vector<double>> activations;
  bool valid = false;
};

double mlp_forward(const MLPParams& params, std::span<const double> input, MLPCache& cache);

// Accumulates parameter gradients into `grads` (same architecture) and
// overwrites `grad_input`.
void mlp_backward(const MLPParams& params, const MLPCache& cache, double dlogit, MLPParams& grads,
                  std::span<double> grad_input);

inline constexpr double kLogitClamp = 35.0;

double predict_proba(double logit);

}  // namespace pep
