#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pep/predictors.hpp"
#include "pep/threshold.hpp"

namespace pep {

enum class ModelKind : std::uint8_t { LR = 0, FM = 1, DeepFM = 2 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::FM;
  std::size_t feature_count = 0;
  std::size_t field_count = 0;
  std::size_t dim = 64;
  std::vector<std::size_t> hidden{64, 64};
  Granularity granularity = Granularity::FeatureDimensionWise;
  double s_init = -15.0;
};

// Prediction model over one-hot fields: linear part, optional embedding
// table (FM and DeepFM) and optional deep tower sharing that table (DeepFM).
struct Model {
  ModelKind kind = ModelKind::FM;
  std::size_t field_count = 0;
  LinearParams linear;
  EmbeddingTable embedding;  // zero columns for LR
  MLPParams mlp;             // empty unless DeepFM

  bool has_embedding() const { return kind != ModelKind::LR; }
  std::size_t feature_count() const { return linear.weights.size(); }
  std::size_t dim() const { return embedding.dim(); }

  friend bool operator==(const Model&, const Model&) = default;
};

// Embedding drawn from the "embedding" stream of `seed`; predictor weights
// from the "predictor" stream.
Model make_model(const ModelSpec& spec, std::uint64_t seed);

// Fresh linear part and deep tower for `model`'s architecture, drawn from
// the given stream tag.
void reinit_predictor(Model& model, const ModelSpec& spec, std::uint64_t seed, std::string_view tag);

struct SampleWorkspace {
  FMCache fm;
  MLPCache mlp;
  std::vector<double> concat;
  std::vector<double> concat_grads;
};

// Logit for one sample given the embedding matrix actually in use (the
// thresholded table while pruning, the masked table while retraining).
double model_logit(const Model& model, const Matrix& active, std::span<const std::uint32_t> features,
                   SampleWorkspace& ws);

// Backward pass for the sample last seen by `ws`. Writes dlogit/dv_i into
// `row_grads` (M x d) and accumulates deep-tower gradients into `mlp_grads`.
void model_backward(const Model& model, SampleWorkspace& ws, double dlogit,
                    std::span<double> row_grads, MLPParams* mlp_grads);

// Model file container. Layout: "PEPV", u32 version, u64 N, u64 d,
// u8 granularity, u8 flags (bit0 V0, bit1 mask, bit2 thresholded), then f64
// arrays V (row-major), s, optional V0, optional mask bit-packed LSB-first,
// then the predictor section: u8 kind, u64 field count, u64-length-prefixed
// f64 linear weights, f64 bias, u64 layer count and per layer u64 out, u64
// in, f64 weights, f64 biases.
struct Checkpoint {
  Model model;
  // Evaluate through S(V, s) rather than V directly.
  bool thresholded = false;
  std::optional<Matrix> initial;
  std::optional<std::vector<std::uint8_t>> mask;

  // Embedding matrix the model predicts with.
  Matrix active_embedding() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace pep
