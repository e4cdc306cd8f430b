#include "pep/model.hpp"

#include <fstream>

#include "pep/binary_io.hpp"
#include "pep/error.hpp"
#include "pep/rng.hpp"

namespace pep {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint8_t kHasInitial = 1;
constexpr std::uint8_t kHasMask = 2;
constexpr std::uint8_t kThresholded = 4;
}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LR: return "lr";
    case ModelKind::FM: return "fm";
    case ModelKind::DeepFM: return "deepfm";
  }
  return "fm";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::LR, ModelKind::FM, ModelKind::DeepFM}) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::Input, "unknown model kind '" + std::string(name) + "'");
}

void reinit_predictor(Model& model, const ModelSpec& spec, std::uint64_t seed, std::string_view tag) {
  model.linear.weights.assign(spec.feature_count, 0.0);
  model.linear.bias = 0.0;
  model.mlp = {};
  if (spec.kind == ModelKind::DeepFM) {
    Rng rng = Rng::stream(seed, tag);
    model.mlp = make_mlp(spec.field_count * spec.dim, spec.hidden, rng);
  }
}

Model make_model(const ModelSpec& spec, std::uint64_t seed) {
  require(spec.feature_count > 0 && spec.field_count > 0, ErrorKind::Input,
          "model needs at least one field and one feature");
  require(spec.kind == ModelKind::LR || spec.dim >= 1, ErrorKind::Input, "embedding dim must be >= 1");
  Model m;
  m.kind = spec.kind;
  m.field_count = spec.field_count;
  const std::size_t dim = spec.kind == ModelKind::LR ? 0 : spec.dim;
  Rng rng = Rng::stream(seed, "embedding");
  m.embedding = make_embedding(spec.feature_count, dim, spec.granularity, spec.s_init, rng);
  reinit_predictor(m, spec, seed, "predictor");
  return m;
}

double model_logit(const Model& model, const Matrix& active, std::span<const std::uint32_t> features,
                   SampleWorkspace& ws) {
  require(features.size() == model.field_count, ErrorKind::Shape, "sample field count mismatch");
  if (model.kind == ModelKind::LR) {
    double logit = model.linear.bias;
    for (std::uint32_t f : features) {
      require(f < model.linear.weights.size(), ErrorKind::Index, "feature index out of range");
      logit += model.linear.weights[f];
    }
    return logit;
  }
  double logit = fm_forward(model.linear, active, features, ws.fm);
  if (model.kind == ModelKind::DeepFM) {
    const std::size_t d = active.cols;
    ws.concat.resize(features.size() * d);
    for (std::size_t i = 0; i < ws.fm.rows.size(); ++i) {
      std::copy(ws.fm.rows[i].begin(), ws.fm.rows[i].end(), ws.concat.begin() + i * d);
    }
    logit += mlp_forward(model.mlp, ws.concat, ws.mlp);
  }
  return logit;
}

void model_backward(const Model& model, SampleWorkspace& ws, double dlogit,
                    std::span<double> row_grads, MLPParams* mlp_grads) {
  if (model.kind == ModelKind::LR) return;
  fm_backward(ws.fm, dlogit, row_grads);
  if (model.kind == ModelKind::DeepFM) {
    require(mlp_grads != nullptr, ErrorKind::Contract, "deep tower gradients need an accumulator");
    ws.concat_grads.resize(ws.concat.size());
    mlp_backward(model.mlp, ws.mlp, dlogit, *mlp_grads, ws.concat_grads);
    for (std::size_t k = 0; k < row_grads.size(); ++k) row_grads[k] += ws.concat_grads[k];
  }
}

Matrix Checkpoint::active_embedding() const {
  if (thresholded) return model.embedding.reparameterized();
  return model.embedding.weights;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Input, "cannot write " + path.string());
  const Model& m = c.model;
  const auto& table = m.embedding;
  const std::size_t n = m.feature_count();
  require(table.rows() == n, ErrorKind::Contract, "embedding rows differ from linear width");

  std::uint8_t flags = 0;
  if (c.initial) flags |= kHasInitial;
  if (c.mask) flags |= kHasMask;
  if (c.thresholded) flags |= kThresholded;

  binio::put_magic(out, "PEPV");
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u64(out, n);
  binio::put_u64(out, table.dim());
  binio::put_u8(out, static_cast<std::uint8_t>(table.thresholds.granularity));
  binio::put_u8(out, flags);
  binio::put_f64s(out, table.weights.data);
  binio::put_f64s(out, table.thresholds.values);
  if (c.initial) {
    require(c.initial->same_shape(table.weights), ErrorKind::Contract, "V0 shape mismatch");
    binio::put_f64s(out, c.initial->data);
  }
  if (c.mask) {
    require(c.mask->size() == table.weights.size(), ErrorKind::Contract, "mask size mismatch");
    std::uint8_t byte = 0;
    for (std::size_t k = 0; k < c.mask->size(); ++k) {
      if ((*c.mask)[k]) byte |= static_cast<std::uint8_t>(1u << (k % 8));
      if (k % 8 == 7) {
        binio::put_u8(out, byte);
        byte = 0;
      }
    }
    if (c.mask->size() % 8 != 0) binio::put_u8(out, byte);
  }

  binio::put_u8(out, static_cast<std::uint8_t>(m.kind));
  binio::put_u64(out, m.field_count);
  binio::put_u64(out, m.linear.weights.size());
  binio::put_f64s(out, m.linear.weights);
  binio::put_f64(out, m.linear.bias);
  binio::put_u64(out, m.mlp.layers.size());
  for (const auto& layer : m.mlp.layers) {
    binio::put_u64(out, layer.weight.rows);
    binio::put_u64(out, layer.weight.cols);
    binio::put_f64s(out, layer.weight.data);
    binio::put_f64s(out, layer.bias);
  }
  require(static_cast<bool>(out), ErrorKind::Input, "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Input, "cannot open " + path.string());
  binio::Reader r(in, path.string());
  r.expect_magic("PEPV");
  require(r.u32() == kCheckpointVersion, ErrorKind::Format, path.string() + ": unsupported version");
  const std::size_t n = r.length(1ULL << 32);
  const std::size_t d = r.length(1ULL << 16);
  const std::uint8_t gran = r.u8();
  require(gran <= 3, ErrorKind::Format, path.string() + ": bad granularity tag");
  const std::uint8_t flags = r.u8();

  Checkpoint c;
  c.thresholded = (flags & kThresholded) != 0;
  auto& table = c.model.embedding;
  table.weights = Matrix(n, d);
  r.f64s(table.weights.data);
  table.thresholds = Thresholds(static_cast<Granularity>(gran), n, d, 0.0);
  r.f64s(table.thresholds.values);
  if (flags & kHasInitial) {
    c.initial = Matrix(n, d);
    r.f64s(c.initial->data);
  }
  if (flags & kHasMask) {
    std::vector<std::uint8_t> mask(n * d, 0);
    std::uint8_t byte = 0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (k % 8 == 0) byte = r.u8();
      mask[k] = (byte >> (k % 8)) & 1u;
    }
    c.mask = std::move(mask);
  }

  const std::uint8_t kind = r.u8();
  require(kind <= 2, ErrorKind::Format, path.string() + ": bad predictor tag");
  c.model.kind = static_cast<ModelKind>(kind);
  c.model.field_count = r.length(1 << 16);
  const std::size_t w = r.length(1ULL << 32);
  require(w == n, ErrorKind::Format, path.string() + ": linear width differs from N");
  c.model.linear.weights.resize(w);
  r.f64s(c.model.linear.weights);
  c.model.linear.bias = r.f64();
  const std::size_t layers = r.length(64);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t rows = r.length(1 << 20);
    const std::size_t cols = r.length(1 << 24);
    DenseLayer layer{Matrix(rows, cols), std::vector<double>(rows)};
    r.f64s(layer.weight.data);
    r.f64s(layer.bias);
    c.model.mlp.layers.push_back(std::move(layer));
  }
  return c;
}

}  // namespace pep
