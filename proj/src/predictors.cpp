#include "pep/predictors.hpp"

#include <algorithm>
#include <cmath>

#include "pep/error.hpp"
#include "pep/rng.hpp"

namespace pep {

std::size_t MLPParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

MLPParams MLPParams::zeros_like() const {
  MLPParams z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) {
    z.layers.push_back({Matrix(l.weight.rows, l.weight.cols), std::vector<double>(l.bias.size(), 0.0)});
  }
  return z;
}

MLPParams make_mlp(std::size_t input_width, std::span<const std::size_t> hidden, Rng& rng) {
  MLPParams p;
  std::size_t fan_in = input_width;
  auto add_layer = [&](std::size_t out) {
    DenseLayer layer{Matrix(out, fan_in), std::vector<double>(out, 0.0)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
    fan_in = out;
  };
  for (std::size_t h : hidden) {
    require(h > 0, ErrorKind::Input, "hidden layer width must be positive");
    add_layer(h);
  }
  add_layer(1);
  return p;
}

void lookup_into(const Matrix& table, std::span<const std::uint32_t> features,
                 std::vector<std::span<const double>>& rows) {
  rows.clear();
  for (std::uint32_t f : features) {
    if (f >= table.rows) {
      fail(ErrorKind::Index, "feature index " + std::to_string(f) + " out of range for table with " +
                                 std::to_string(table.rows) + " rows");
    }
    rows.push_back(table.row(f));
  }
}

std::vector<std::span<const double>> lookup(const Matrix& table,
                                            std::span<const std::uint32_t> features) {
  std::vector<std::span<const double>> rows;
  rows.reserve(features.size());
  lookup_into(table, features, rows);
  return rows;
}

std::vector<std::vector<double>> lookup(const SparseTable& table,
                                        std::span<const std::uint32_t> features) {
  std::vector<std::vector<double>> rows;
  rows.reserve(features.size());
  for (std::uint32_t f : features) {
    if (f >= table.rows()) fail(ErrorKind::Index, "feature index " + std::to_string(f) + " out of range for sparse table");
    rows.push_back(table.dense_row(f));
  }
  return rows;
}

namespace {

double interaction_of_cached_rows(FMCache& cache) {
  const std::size_t d = cache.rows.empty() ? 0 : cache.rows.front().size();
  cache.sum.assign(d, 0.0);
  double sum_sq = 0.0;
  for (const auto& v : cache.rows) {
    for (std::size_t k = 0; k < d; ++k) {
      cache.sum[k] += v[k];
      sum_sq += v[k] * v[k];
    }
  }
  double square_of_sum = 0.0;
  for (double s : cache.sum) square_of_sum += s * s;
  cache.valid = true;
  return 0.5 * (square_of_sum - sum_sq);
}

}  // namespace

double fm_interaction(std::span<const std::span<const double>> rows, FMCache& cache) {
  cache.rows.assign(rows.begin(), rows.end());
  return interaction_of_cached_rows(cache);
}

double fm_forward(const LinearParams& linear, const Matrix& embedding,
                  std::span<const std::uint32_t> features, FMCache& cache) {
  double logit = linear.bias;
  for (std::uint32_t f : features) {
    require(f < linear.weights.size(), ErrorKind::Index, "feature index out of linear range");
    logit += linear.weights[f];
  }
  lookup_into(embedding, features, cache.rows);
  return logit + interaction_of_cached_rows(cache);
}

void fm_backward(const FMCache& cache, double dlogit, std::span<double> row_grads) {
  require(cache.valid, ErrorKind::Contract, "fm_backward called without a matching forward pass");
  const std::size_t d = cache.sum.size();
  require(row_grads.size() == cache.rows.size() * d, ErrorKind::Shape,
          "row gradient buffer has wrong size");
  for (std::size_t i = 0; i < cache.rows.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      row_grads[i * d + k] = dlogit * (cache.sum[k] - cache.rows[i][k]);
    }
  }
}

double mlp_forward(const MLPParams& params, std::span<const double> input, MLPCache& cache) {
  require(!params.empty(), ErrorKind::Contract, "mlp has no layers");
  if (input.size() != params.input_width()) {
    fail(ErrorKind::Shape, "mlp input width " + std::to_string(input.size()) + ", expected " +
                               std::to_string(params.input_width()));
  }
  cache.activations.resize(params.layers.size() + 1);
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const auto& in = cache.activations[l];
    auto& out = cache.activations[l + 1];
    out.assign(layer.weight.rows, 0.0);
    const bool last = l + 1 == params.layers.size();
    for (std::size_t o = 0; o < layer.weight.rows; ++o) {
      double z = layer.bias[o];
      const auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) z += w[i] * in[i];
      out[o] = last ? z : std::max(0.0, z);
    }
  }
  cache.valid = true;
  return cache.activations.back()[0];
}

void mlp_backward(const MLPParams& params, const MLPCache& cache, double dlogit, MLPParams& grads,
                  std::span<double> grad_input) {
  require(cache.valid && cache.activations.size() == params.layers.size() + 1, ErrorKind::Contract,
          "mlp_backward called without a matching forward pass");
  require(grads.layers.size() == params.layers.size(), ErrorKind::Shape,
          "gradient accumulator architecture mismatch");
  require(grad_input.size() == params.input_width(), ErrorKind::Shape, "grad_input width mismatch");

  std::vector<double> delta{dlogit};
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& g = grads.layers[l];
    const auto& in = cache.activations[l];
    std::vector<double> prev(in.size(), 0.0);
    for (std::size_t o = 0; o < layer.weight.rows; ++o) {
      const double dz = delta[o];
      if (dz == 0.0) continue;
      g.bias[o] += dz;
      const auto w = layer.weight.row(o);
      auto gw = g.weight.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) {
        gw[i] += dz * in[i];
        prev[i] += dz * w[i];
      }
    }
    if (l > 0) {
      // ReLU gate of the layer below; inactive units pass no gradient.
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (in[i] <= 0.0) prev[i] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  std::copy(delta.begin(), delta.end(), grad_input.begin());
}

double predict_proba(double logit) {
  const double z = std::clamp(logit, -kLogitClamp, kLogitClamp);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace pep
