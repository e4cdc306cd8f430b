#include "pep/threshold.hpp"

#include <algorithm>
#include <sstream>

#include "pep/error.hpp"
#include "pep/rng.hpp"

namespace pep {

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::Global: return "global";
    case Granularity::DimensionWise: return "dimension";
    case Granularity::FeatureWise: return "feature";
    case Granularity::FeatureDimensionWise: return "feature_dimension";
  }
  return "global";
}

Granularity parse_granularity(std::string_view name) {
  for (auto g : {Granularity::Global, Granularity::DimensionWise, Granularity::FeatureWise,
                 Granularity::FeatureDimensionWise}) {
    if (name == to_string(g)) return g;
  }
  fail(ErrorKind::Input, "unknown granularity '" + std::string(name) + "'");
}

std::size_t threshold_count(Granularity g, std::size_t rows, std::size_t cols) {
  switch (g) {
    case Granularity::Global: return 1;
    case Granularity::DimensionWise: return cols;
    case Granularity::FeatureWise: return rows;
    case Granularity::FeatureDimensionWise: return rows * cols;
  }
  return 1;
}

namespace {

void check_shapes(const Matrix& weights, const Thresholds& s) {
  require(s.rows == weights.rows && s.cols == weights.cols, ErrorKind::Shape,
          "threshold shape does not match embedding shape");
  require(s.values.size() == threshold_count(s.granularity, s.rows, s.cols), ErrorKind::Shape,
          "threshold parameter count does not match granularity");
}

}  // namespace

void soft_threshold_row(std::span<const double> weights, const Thresholds& s, std::size_t row,
                        GKind g, std::span<double> out) {
  for (std::size_t j = 0; j < weights.size(); ++j) {
    out[j] = soft_threshold_value(weights[j], g_value(g, s.at(row, j)));
  }
}

Matrix soft_threshold(const Matrix& weights, const Thresholds& s, GKind g) {
  check_shapes(weights, s);
  Matrix out(weights.rows, weights.cols);
  if (s.granularity == Granularity::Global && !s.values.empty()) {
    const double t = g_value(g, s.values[0]);
    for (std::size_t k = 0; k < weights.size(); ++k) {
      out.data[k] = soft_threshold_value(weights.data[k], t);
    }
    return out;
  }
  for (std::size_t i = 0; i < weights.rows; ++i) {
    soft_threshold_row(weights.row(i), s, i, g, out.row(i));
  }
  return out;
}

void backward_threshold_row(std::span<const double> upstream, std::span<const double> weights,
                            const Thresholds& s, std::size_t row, GKind g,
                            std::span<double> grad_weights, std::span<double> grad_thresholds) {
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const std::size_t k = s.index(row, j);
    const double sv = s.values[k];
    const double v = weights[j];
    // At |v| == g(s) the entry counts as pruned.
    if (std::fabs(v) - g_value(g, sv) <= 0.0) continue;
    grad_weights[j] += upstream[j];
    grad_thresholds[k] += upstream[j] * (-sign(v)) * g_grad(g, sv);
  }
}

ThresholdGrads backward_through_threshold(const Matrix& upstream, const Matrix& weights,
                                          const Thresholds& s, GKind g) {
  check_shapes(weights, s);
  require(upstream.same_shape(weights), ErrorKind::Shape,
          "upstream gradient shape does not match embedding shape");
  ThresholdGrads grads{Matrix(weights.rows, weights.cols),
                       std::vector<double>(s.values.size(), 0.0)};
  for (std::size_t i = 0; i < weights.rows; ++i) {
    backward_threshold_row(upstream.row(i), weights.row(i), s, i, g, grads.weights.row(i),
                           grads.thresholds);
  }
  return grads;
}

GPropertyReport check_g_properties(GKind g, double s_init, std::span<const double> probe_points) {
  GPropertyReport report;
  std::vector<double> probes(probe_points.begin(), probe_points.end());
  std::sort(probes.begin(), probes.end());
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());

  auto note = [&](bool& flag, const std::string& msg) {
    flag = false;
    report.failures.push_back(msg);
  };
  auto fmt = [](double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  };

  for (std::size_t k = 0; k < probes.size(); ++k) {
    const double s = probes[k];
    const double value = g_value(g, s);
    const double deriv = g_grad(g, s);
    report.max_derivative = std::max(report.max_derivative, deriv);
    if (!(value > 0.0)) note(report.positive, "g(" + fmt(s) + ") = " + fmt(value) + " is not > 0");
    if (!(deriv > 0.0 && deriv <= report.derivative_bound)) {
      note(report.derivative_bounded, "g'(" + fmt(s) + ") = " + fmt(deriv) + " outside (0, " +
                                          fmt(report.derivative_bound) + "]");
    }
    if (k > 0 && !(value > g_value(g, probes[k - 1]))) {
      note(report.monotone, "g not increasing between " + fmt(probes[k - 1]) + " and " + fmt(s));
    }
  }
  report.derivative_at_init = g_grad(g, s_init);
  if (!(report.derivative_at_init < 1.0)) {
    note(report.slow_start, "g'(s_init) = " + fmt(report.derivative_at_init) + " is not < 1");
  }
  if (!(report.derivative_at_init > 0.0)) {
    note(report.derivative_bounded, "g'(s_init) = " + fmt(report.derivative_at_init) + " is not > 0");
  }
  return report;
}

EmbeddingTable make_embedding(std::size_t rows, std::size_t dim, Granularity g, double s_init,
                              Rng& rng) {
  EmbeddingTable table;
  table.weights = Matrix(rows, dim);
  const double bound = dim == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : table.weights.data) v = rng.uniform(-bound, bound);
  table.thresholds = Thresholds(g, rows, dim, s_init);
  table.s_init = s_init;
  return table;
}

}  // namespace pep
