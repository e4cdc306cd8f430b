#include "pep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pep/error.hpp"
#include "pep/rng.hpp"

namespace pep {

namespace {

// Average 1-based ranks with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), ErrorKind::Shape, "auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (auto y : labels) pos += y ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  require(pos > 0 && neg > 0, ErrorKind::UndefinedMetric, "auc needs both positive and negative labels");
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) rank_sum += ranks[i];
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

std::size_t count_parameters(const Matrix& embedding) {
  return static_cast<std::size_t>(
      std::count_if(embedding.data.begin(), embedding.data.end(), [](double v) { return v != 0.0; }));
}

std::size_t count_parameters(const PruneMask& mask) { return mask.nonzero_count; }

std::size_t count_parameters(const SparseTable& table) {
  return static_cast<std::size_t>(
      std::count_if(table.values.begin(), table.values.end(), [](double v) { return v != 0.0; }));
}

InteractionMatrix interaction_matrix(const Matrix& embedding, const SampleSet& samples,
                                     const InteractionOptions& options) {
  require(!samples.empty(), ErrorKind::Size, "interaction matrix needs samples");
  const std::size_t m = samples.field_count();
  InteractionMatrix out{m, Matrix(m, m)};

  // One seeded subsample shared by every field pair.
  std::vector<std::uint64_t> pick(samples.size());
  std::iota(pick.begin(), pick.end(), 0);
  if (pick.size() > options.max_pairs) {
    Rng rng = Rng::stream(options.seed, "interaction");
    rng.shuffle(pick);
    pick.resize(options.max_pairs);
  }
  const std::size_t n = pick.size();

  auto dot_abs = [&](std::uint32_t a, std::uint32_t b) {
    require(a < embedding.rows && b < embedding.rows, ErrorKind::Index, "feature out of table range");
    const auto ra = embedding.row(a);
    const auto rb = embedding.row(b);
    double s = 0.0;
    for (std::size_t k = 0; k < ra.size(); ++k) s += ra[k] * rb[k];
    return std::fabs(s);
  };

  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = p; q < m; ++q) {
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const auto fa = samples.features(pick[k]);
        if (p == q) {
          // Within a field, pair each sample with the next one in the subsample.
          const auto fb = samples.features(pick[(k + 1) % n]);
          sum += dot_abs(fa[p], fb[p]);
        } else {
          sum += dot_abs(fa[p], fa[q]);
        }
      }
      out.values(p, q) = out.values(q, p) = sum / static_cast<double>(n);
    }
  }
  const double peak = *std::max_element(out.values.data.begin(), out.values.data.end());
  if (peak > 0.0) {
    for (double& v : out.values.data) v /= peak;
  }
  return out;
}

InteractionMatrix interaction_difference(const InteractionMatrix& a, const InteractionMatrix& b) {
  require(a.values.same_shape(b.values), ErrorKind::Shape, "interaction matrices differ in shape");
  InteractionMatrix out{a.fields, Matrix(a.fields, a.fields)};
  for (std::size_t k = 0; k < a.values.size(); ++k) out.values.data[k] = a.values.data[k] - b.values.data[k];
  return out;
}

std::vector<ScatterRow> frequency_sparsity_scatter(const PruneMask& mask,
                                                   std::span<const std::uint64_t> frequencies) {
  require(frequencies.size() == mask.rows, ErrorKind::Shape, "frequency count differs from feature count");
  const auto dims = effective_dims(mask);
  const double d = mask.cols == 0 ? 1.0 : static_cast<double>(mask.cols);
  std::vector<ScatterRow> rows;
  rows.reserve(mask.rows);
  for (std::size_t i = 0; i < mask.rows; ++i) {
    rows.push_back({i, frequencies[i], static_cast<double>(dims[i]) / d});
  }
  return rows;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::Shape, "spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<FieldDims> field_dims(const Matrix& embedding, const FieldSchema& schema) {
  require(embedding.rows == schema.feature_count(), ErrorKind::Shape,
          "embedding rows differ from schema feature count");
  std::vector<FieldDims> out;
  for (std::size_t f = 0; f < schema.field_count(); ++f) {
    FieldDims fd;
    fd.name = schema.field_names()[f];
    double total = 0.0;
    for (std::uint64_t i = schema.field_offsets()[f]; i < schema.field_offsets()[f + 1]; ++i) {
      std::size_t nz = 0;
      for (double v : embedding.row(i)) nz += v != 0.0 ? 1 : 0;
      total += static_cast<double>(nz);
      if (nz == 0) ++fd.dropped_features;
      ++fd.features;
    }
    fd.mean_effective_dim = fd.features ? total / static_cast<double>(fd.features) : 0.0;
    out.push_back(std::move(fd));
  }
  return out;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["auc"] = report.auc;
  j["logloss"] = report.logloss;
  j["nonzero_params"] = report.nonzero_params;
  j["samples"] = report.samples;
  auto fields = nlohmann::ordered_json::array();
  for (const auto& f : report.fields) {
    fields.push_back({{"name", f.name},
                      {"features", f.features},
                      {"mean_effective_dim", f.mean_effective_dim},
                      {"dropped_features", f.dropped_features}});
  }
  j["fields"] = std::move(fields);
  return j;
}

}  // namespace pep
