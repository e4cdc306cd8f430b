#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pep/matrix.hpp"
#include "pep/prune_mask.hpp"
#include "pep/schema.hpp"

namespace pep {

// Rank-sum (Mann-Whitney) AUC with average ranks for tied scores. Throws an
// undefined-metric error unless both classes are present.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Nonzero embedding entries. Predictor weights are not counted, so a model
// without an embedding table has zero parameters.
std::size_t count_parameters(const Matrix& embedding);
std::size_t count_parameters(const PruneMask& mask);
std::size_t count_parameters(const SparseTable& table);

// Field-by-field mean |<v_i, v_j>| over active feature pairs, divided by its
// largest entry.
struct InteractionMatrix {
  std::size_t fields = 0;
  Matrix values;
};

struct InteractionOptions {
  std::size_t max_pairs = 100000;
  std::uint64_t seed = 0;
};

InteractionMatrix interaction_matrix(const Matrix& embedding, const SampleSet& samples,
                                     const InteractionOptions& options = {});

// a - b entrywise; used for the pruned-minus-original view.
InteractionMatrix interaction_difference(const InteractionMatrix& a, const InteractionMatrix& b);

struct ScatterRow {
  std::size_t feature_id;
  std::uint64_t frequency;
  double sparsity;  // nonzeros / d
};

std::vector<ScatterRow> frequency_sparsity_scatter(const PruneMask& mask,
                                                   std::span<const std::uint64_t> frequencies);

// Spearman rank correlation with average ranks for ties; 0 when either side
// is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct FieldDims {
  std::string name;
  std::size_t features = 0;
  double mean_effective_dim = 0.0;
  std::size_t dropped_features = 0;
};

struct EvalReport {
  double auc = 0.5;
  double logloss = 0.0;
  std::size_t nonzero_params = 0;
  std::size_t samples = 0;
  std::vector<FieldDims> fields;
};

// Effective-dimension summary per field of `embedding`.
std::vector<FieldDims> field_dims(const Matrix& embedding, const FieldSchema& schema);

nlohmann::ordered_json to_json(const EvalReport& report);

}  // namespace pep
