#include "pep/pipeline.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include "pep/dataset_io.hpp"
#include "pep/error.hpp"

namespace pep {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Input, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Input, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Input, "cannot write " + path.string());
  out << text;
}

void refuse_overwrite(const fs::path& path, const CommandOptions& options) {
  require(options.force || !fs::exists(path), ErrorKind::Overwrite,
          path.string() + " exists; pass --force to overwrite");
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::Input, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    require(allowed.count(key) > 0, ErrorKind::Input, "unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Input, std::string("config key '") + key + "': " + e.what());
  }
}

json dataset_json(const DatasetConfig& d) {
  return {{"format", d.format},
          {"path", d.path.string()},
          {"delimiter", d.delimiter},
          {"label_column", d.label_column},
          {"numeric_columns", d.numeric_columns},
          {"has_header", d.has_header},
          {"min_frequency", d.min_frequency},
          {"split_seed", d.split_seed}};
}

json model_json(const ModelSpec& m) {
  return {{"kind", std::string(to_string(m.kind))}, {"embedding_dim", m.dim}, {"hidden", m.hidden}};
}

json optimizer_json(const AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

json prune_json(const RunConfig& c) {
  return {{"granularity", std::string(to_string(c.prune.granularity))},
          {"s_init", c.prune.s_init},
          {"budgets", c.prune.budgets},
          {"budget_fractions", c.budget_fractions},
          {"max_epochs", c.prune.max_epochs},
          {"batch_size", c.prune.batch_size},
          {"threshold_decay", c.prune.threshold_decay},
          {"frequency_groups", c.frequency_groups}};
}

json retrain_json(const RetrainConfig& r) {
  return {{"patience", r.patience}, {"max_epochs", r.max_epochs}, {"batch_size", r.batch_size}};
}

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PruneMask mask_from_checkpoint(const Checkpoint& cp) {
  require(cp.mask.has_value() && cp.initial.has_value(), ErrorKind::Contract,
          "checkpoint lacks the mask or initial weights needed for retraining");
  PruneMask m;
  m.rows = cp.model.embedding.rows();
  m.cols = cp.model.embedding.dim();
  m.keep = *cp.mask;
  m.initial = *cp.initial;
  for (auto b : m.keep) m.nonzero_count += b;
  return m;
}

ModelSpec spec_for(const RunConfig& config, const FieldSchema& schema, ModelKind kind) {
  ModelSpec spec = config.model;
  spec.kind = kind;
  spec.feature_count = schema.feature_count();
  spec.field_count = schema.field_count();
  spec.granularity = config.prune.granularity;
  spec.s_init = config.prune.s_init;
  return spec;
}

std::string retrain_key(std::size_t index, const std::string& init) {
  return "budget_" + std::to_string(index) + "_" + init;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  require(ec == std::errc(), ErrorKind::Numeric, "cannot format number");
  return std::string(buf, end);
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.adam = adam;
  o.threads = threads;
  o.wall_clock = wall_clock;
  o.frequency_groups = frequency_groups;
  return o;
}

std::vector<std::size_t> RunConfig::budgets(std::size_t table_size) const {
  if (!prune.budgets.empty()) return prune.budgets;
  return budgets_from_fractions(budget_fractions, table_size);
}

json load_config_json(const fs::path& path) {
  json merged = json::object();
  std::vector<json> chain;
  fs::path current = path;
  for (int depth = 0;; ++depth) {
    require(depth < 16, ErrorKind::Input, "config 'extends' chain too deep (cycle?) at " + current.string());
    json j = read_json_file(current);
    require(j.is_object(), ErrorKind::Input, current.string() + ": config must be a JSON object");
    std::optional<fs::path> parent;
    if (j.contains("extends")) {
      parent = current.parent_path() / j.at("extends").get<std::string>();
      j.erase("extends");
    }
    chain.push_back(std::move(j));
    if (!parent) break;
    current = *parent;
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) merged.merge_patch(*it);
  return merged;
}

RunConfig parse_config(json resolved, const fs::path& base_dir) {
  RunConfig c;
  check_keys(resolved,
             {"dataset", "model", "optimizer", "prune", "retrain", "seed", "output_dir", "wall_clock",
              "frequency_groups", "threads"},
             "config");
  read_opt(resolved, "seed", c.seed);
  read_opt(resolved, "wall_clock", c.wall_clock);
  read_opt(resolved, "frequency_groups", c.frequency_groups);
  read_opt(resolved, "threads", c.threads);
  if (resolved.contains("output_dir")) {
    fs::path out = resolved.at("output_dir").get<std::string>();
    c.output_dir = out.is_absolute() || base_dir.empty() ? out : base_dir / out;
  }

  if (resolved.contains("dataset")) {
    const json& d = resolved.at("dataset");
    check_keys(d, {"format", "path", "delimiter", "label_column", "numeric_columns", "has_header",
                   "min_frequency", "split_seed"},
               "dataset");
    read_opt(d, "format", c.dataset.format);
    read_opt(d, "delimiter", c.dataset.delimiter);
    read_opt(d, "label_column", c.dataset.label_column);
    read_opt(d, "numeric_columns", c.dataset.numeric_columns);
    read_opt(d, "has_header", c.dataset.has_header);
    read_opt(d, "min_frequency", c.dataset.min_frequency);
    read_opt(d, "split_seed", c.dataset.split_seed);
    if (d.contains("path")) {
      fs::path p = d.at("path").get<std::string>();
      c.dataset.path = (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal();
    }
  }
  require(c.dataset.format == "movielens1m" || c.dataset.format == "criteo" ||
              c.dataset.format == "delimited",
          ErrorKind::Input, "unknown dataset format '" + c.dataset.format + "'");

  if (resolved.contains("model")) {
    const json& m = resolved.at("model");
    check_keys(m, {"kind", "embedding_dim", "hidden"}, "model");
    if (m.contains("kind")) c.model.kind = parse_model_kind(m.at("kind").get<std::string>());
    read_opt(m, "embedding_dim", c.model.dim);
    read_opt(m, "hidden", c.model.hidden);
  }
  require(c.model.dim >= 1, ErrorKind::Input, "model.embedding_dim must be >= 1");

  if (resolved.contains("optimizer")) {
    const json& a = resolved.at("optimizer");
    check_keys(a, {"lr", "beta1", "beta2", "eps"}, "optimizer");
    read_opt(a, "lr", c.adam.lr);
    read_opt(a, "beta1", c.adam.beta1);
    read_opt(a, "beta2", c.adam.beta2);
    read_opt(a, "eps", c.adam.eps);
  }

  if (resolved.contains("prune")) {
    const json& p = resolved.at("prune");
    check_keys(p, {"granularity", "s_init", "budgets", "budget_fractions", "max_epochs", "batch_size", "threshold_decay"},
               "prune");
    if (p.contains("granularity")) c.prune.granularity = parse_granularity(p.at("granularity").get<std::string>());
    read_opt(p, "s_init", c.prune.s_init);
    read_opt(p, "budgets", c.prune.budgets);
    read_opt(p, "budget_fractions", c.budget_fractions);
    read_opt(p, "max_epochs", c.prune.max_epochs);
    read_opt(p, "batch_size", c.prune.batch_size);
    read_opt(p, "threshold_decay", c.prune.threshold_decay);
  }
  c.prune.seed = c.seed;

  if (resolved.contains("retrain")) {
    const json& r = resolved.at("retrain");
    check_keys(r, {"init", "patience", "max_epochs", "batch_size"}, "retrain");
    if (r.contains("init")) c.retrain.init_mode = parse_init_mode(r.at("init").get<std::string>());
    read_opt(r, "patience", c.retrain.patience);
    read_opt(r, "max_epochs", c.retrain.max_epochs);
    read_opt(r, "batch_size", c.retrain.batch_size);
  }
  c.retrain.seed = c.seed;
  c.retrain.validate();

  c.resolved = std::move(resolved);
  return c;
}

RunConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override,
                      std::optional<fs::path> out_override) {
  require(fs::exists(path), ErrorKind::Input, "config file not found: " + path.string());
  json j = load_config_json(path);
  if (seed_override) j["seed"] = *seed_override;
  RunConfig c = parse_config(std::move(j), fs::absolute(path).parent_path());
  if (out_override) c.output_dir = *out_override;
  require(!c.dataset.path.empty(), ErrorKind::Input, "config has no dataset.path");
  require(fs::exists(c.dataset.path), ErrorKind::Input, "dataset path not found: " + c.dataset.path.string());
  return c;
}

std::string hash_json(const json& j) { return fnv_hex(j.dump()); }

std::string data_hash(const RunConfig& c) { return hash_json(dataset_json(c.dataset)); }

std::string prune_hash(const RunConfig& c) {
  return hash_json({{"data", data_hash(c)},
                    {"model", model_json(c.model)},
                    {"optimizer", optimizer_json(c.adam)},
                    {"prune", prune_json(c)},
                    {"seed", c.seed}});
}

std::string retrain_hash(const RunConfig& c) {
  return hash_json({{"prune", prune_hash(c)}, {"retrain", retrain_json(c.retrain)}});
}

Manifest Manifest::load(const fs::path& dir) {
  Manifest m;
  const fs::path p = dir / "manifest.json";
  if (fs::exists(p)) {
    std::ifstream in(p);
    try {
      m.doc_ = ordered_json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorKind::Format, p.string() + ": " + e.what());
    }
  }
  return m;
}

void Manifest::save(const fs::path& dir) const {
  fs::create_directories(dir);
  write_text(dir / "manifest.json", doc_.dump(2) + "\n");
}

const ordered_json* Manifest::find(const std::string& name) const {
  const auto it = doc_.find(name);
  return it == doc_.end() ? nullptr : &*it;
}

void Manifest::require_hash(const std::string& name, const std::string& expected) const {
  const ordered_json* s = find(name);
  require(s != nullptr && s->contains("hash"), ErrorKind::Contract,
          "manifest has no '" + name + "' record; run that stage first");
  const std::string got = s->at("hash").get<std::string>();
  require(got == expected, ErrorKind::Contract,
          "config hash " + expected + " does not match manifest '" + name + "' hash " + got +
              " (artifacts come from a different configuration)");
}

IngestSummary cmd_ingest(const RunConfig& config, const CommandOptions& options) {
  const fs::path out = config.output_dir;
  fs::create_directories(out);
  refuse_overwrite(out / "schema.json", options);

  RawTable raw;
  if (config.dataset.format == "movielens1m") {
    raw = read_movielens_1m(config.dataset.path);
  } else if (config.dataset.format == "criteo") {
    raw = read_delimited(config.dataset.path, criteo_format());
  } else {
    DelimitedFormat fmt;
    fmt.delimiter = config.dataset.delimiter;
    fmt.label_column = config.dataset.label_column;
    fmt.numeric_columns = config.dataset.numeric_columns;
    fmt.has_header = config.dataset.has_header;
    raw = read_delimited(config.dataset.path, fmt);
  }

  FieldSchema schema = build_schema(raw, config.dataset.min_frequency);
  const SampleSet samples = encode_samples(schema, raw);
  const DatasetSplit split = split_dataset(samples, config.dataset.split_seed);
  schema.set_feature_frequencies(count_frequencies(schema, split.train));

  write_schema_json(out / "schema.json", schema);
  write_splits(out / "splits.bin", split.indices);
  write_samples(out / "samples.bin", samples);

  IngestSummary s{samples.size(), schema.field_count(), schema.feature_count(),
                  split.train.size(), split.validation.size(), split.test.size()};
  Manifest manifest = Manifest::load(out);
  manifest.section("ingest") = {{"hash", data_hash(config)},
                                {"schema", "schema.json"},
                                {"splits", "splits.bin"},
                                {"samples", "samples.bin"},
                                {"num_samples", s.samples},
                                {"fields", s.fields},
                                {"features", s.features},
                                {"train", s.train},
                                {"validation", s.validation},
                                {"test", s.test}};
  manifest.save(out);
  return s;
}

LoadedData load_ingested(const RunConfig& config) {
  const fs::path out = config.output_dir;
  Manifest::load(out).require_hash("ingest", data_hash(config));
  LoadedData d;
  d.schema = read_schema_json(out / "schema.json");
  const SampleSet samples = read_samples(out / "samples.bin");
  require(samples.field_count() == d.schema.field_count(), ErrorKind::Contract,
          "samples and schema disagree on field count");
  d.split = apply_split(samples, read_splits(out / "splits.bin"), config.dataset.split_seed);
  return d;
}

void write_history_csv(const fs::path& path, const std::vector<EpochRow>& rows) {
  std::string s = "stage,epoch,train_logloss,val_logloss,val_auc,nonzero_count,wall_ms\n";
  for (const auto& r : rows) {
    s += r.stage + "," + std::to_string(r.epoch) + "," + format_double(r.train_logloss) + "," +
         format_double(r.val_logloss) + "," + format_double(r.val_auc) + "," + std::to_string(r.nonzero_count) +
         "," + std::to_string(r.wall_ms) + "\n";
  }
  write_text(path, s);
}

void write_sparsity_csv(const fs::path& path, const std::vector<SparsityRow>& rows) {
  std::string s = "epoch,group_id,mean_sparsity,var_sparsity\n";
  for (const auto& r : rows) {
    s += std::to_string(r.epoch) + "," + std::to_string(r.group_id) + "," + format_double(r.mean_sparsity) + "," +
         format_double(r.var_sparsity) + "\n";
  }
  write_text(path, s);
}

void write_matrix_csv(const fs::path& path, const InteractionMatrix& matrix, const std::vector<std::string>& names) {
  std::string s = "field";
  for (std::size_t q = 0; q < matrix.fields; ++q) s += "," + (q < names.size() ? names[q] : std::to_string(q));
  s += "\n";
  for (std::size_t p = 0; p < matrix.fields; ++p) {
    s += p < names.size() ? names[p] : std::to_string(p);
    for (std::size_t q = 0; q < matrix.fields; ++q) s += "," + format_double(matrix.values(p, q));
    s += "\n";
  }
  write_text(path, s);
}

PruneSummary cmd_prune(const RunConfig& config, const CommandOptions& options) {
  const LoadedData data = load_ingested(config);
  const fs::path out = config.output_dir;
  const fs::path dir = out / "prune";
  refuse_overwrite(dir / "history.csv", options);
  fs::create_directories(dir);

  const ModelSpec spec = spec_for(config, data.schema, config.model.kind);
  require(spec.kind != ModelKind::LR, ErrorKind::Contract, "the LR model has no embedding to prune");
  Model model = make_model(spec, config.seed);
  const std::size_t table_size = spec.feature_count * spec.dim;

  PruneConfig pc = config.prune;
  pc.budgets = config.budgets(table_size);
  pc.seed = config.seed;
  const PruneResult result = prune_stage(model, data.split, pc, config.train_options());

  write_history_csv(dir / "history.csv", result.history);
  write_sparsity_csv(dir / "sparsity.csv", result.sparsity);

  PruneSummary summary;
  summary.table_size = table_size;
  summary.budgets = pc.budgets;
  summary.unmet = result.unmet_budgets;
  summary.epochs_run = result.epochs_run;

  auto checkpoints = ordered_json::array();
  for (std::size_t k = 0; k < result.checkpoints.size(); ++k) {
    const auto& cp = result.checkpoints[k];
    const std::string file = "prune/budget_" + std::to_string(k) + ".pepv";
    write_checkpoint(out / file, Checkpoint{cp.snapshot, true, result.initial, cp.mask.keep});
    checkpoints.push_back({{"index", k},
                           {"budget", cp.budget},
                           {"epoch", cp.epoch_reached},
                           {"nonzero", cp.mask.nonzero_count},
                           {"val_logloss", cp.val_logloss},
                           {"val_auc", cp.val_auc},
                           {"path", file}});
    summary.captured_nonzeros.push_back(cp.mask.nonzero_count);
    summary.captured_epochs.push_back(cp.epoch_reached);
  }

  Manifest manifest = Manifest::load(out);
  manifest.section("prune") = {{"hash", prune_hash(config)},
                               {"table_size", table_size},
                               {"budgets", pc.budgets},
                               {"epochs_run", result.epochs_run},
                               {"checkpoints", std::move(checkpoints)},
                               {"unmet_budgets", result.unmet_budgets},
                               {"history", "prune/history.csv"},
                               {"sparsity", "prune/sparsity.csv"}};
  manifest.save(out);
  return summary;
}

std::vector<RetrainSummary> cmd_retrain(const RunConfig& config, const CommandOptions& options,
                                        std::optional<std::size_t> budget_index, const std::string& init) {
  require(init == "lth" || init == "random" || init == "none", ErrorKind::Input,
          "--init must be lth, random or none");
  const fs::path out = config.output_dir;
  const Manifest before = Manifest::load(out);
  before.require_hash("prune", prune_hash(config));
  const LoadedData data = load_ingested(config);
  const auto& checkpoints = before.find("prune")->at("checkpoints");

  std::vector<std::size_t> which;
  if (budget_index) {
    require(*budget_index < checkpoints.size(), ErrorKind::Input,
            "budget index " + std::to_string(*budget_index) + " has no captured checkpoint (" +
                std::to_string(checkpoints.size()) + " captured)");
    which.push_back(*budget_index);
  } else {
    for (std::size_t k = 0; k < checkpoints.size(); ++k) which.push_back(k);
  }

  fs::create_directories(out / "retrain");
  std::vector<RetrainSummary> summaries;
  for (std::size_t k : which) {
    const std::string key = retrain_key(k, init);
    const std::string model_file = "retrain/" + key + ".pepv";
    const std::string sparse_file = "retrain/" + key + ".pepc";
    refuse_overwrite(out / model_file, options);

    const Checkpoint cp = read_checkpoint(out / checkpoints[k].at("path").get<std::string>());
    require(cp.model.feature_count() == data.schema.feature_count(), ErrorKind::Contract,
            "checkpoint feature count differs from schema");
    const PruneMask mask = mask_from_checkpoint(cp);

    RetrainSummary s;
    s.budget_index = k;
    s.init = init;
    ordered_json entry = {{"hash", retrain_hash(config)}, {"budget_index", k}, {"init", init}};

    if (init == "none") {
      const Matrix active = cp.active_embedding();
      write_checkpoint(out / model_file, cp);
      write_sparse(out / sparse_file, to_sparse(active, mask));
      s.nonzero_params = count_parameters(active);
    } else {
      RetrainConfig rc = config.retrain;
      rc.init_mode = parse_init_mode(init);
      rc.seed = config.seed;
      const RetrainResult r = retrain_stage(cp.model, mask, data.split, rc, config.train_options());
      const std::string history_file = "retrain/" + key + "_history.csv";
      write_history_csv(out / history_file, r.history);
      write_checkpoint(out / model_file, Checkpoint{r.model, false, mask.initial, mask.keep});
      write_sparse(out / sparse_file, to_sparse(r.model.embedding.weights, mask));
      s.nonzero_params = count_parameters(r.model.embedding.weights);
      s.best_epoch = r.best_epoch;
      s.epochs_run = r.epochs_run;
      s.best_val_logloss = r.best_val_logloss;
      entry["history"] = history_file;
      entry["best_epoch"] = r.best_epoch;
      entry["epochs_run"] = r.epochs_run;
      entry["best_val_logloss"] = r.best_val_logloss;
    }
    entry["nonzero_params"] = s.nonzero_params;
    entry["model"] = model_file;
    entry["sparse"] = sparse_file;

    Manifest manifest = Manifest::load(out);
    manifest.section("retrain")[key] = std::move(entry);
    manifest.save(out);
    summaries.push_back(s);
  }
  return summaries;
}

RetrainSummary cmd_baseline(const RunConfig& config, const CommandOptions& options, ModelKind kind) {
  const LoadedData data = load_ingested(config);
  const fs::path out = config.output_dir;
  const std::string name(to_string(kind));
  const std::string model_file = "baseline/" + name + ".pepv";
  refuse_overwrite(out / model_file, options);
  fs::create_directories(out / "baseline");

  const Model model = make_model(spec_for(config, data.schema, kind), config.seed);
  RetrainConfig rc = config.retrain;
  rc.seed = config.seed;
  const RetrainResult r = train_dense(model, data.split, rc, config.train_options(), "dense");
  const std::string history_file = "baseline/" + name + "_history.csv";
  write_history_csv(out / history_file, r.history);
  write_checkpoint(out / model_file, Checkpoint{r.model, false, std::nullopt, std::nullopt});

  RetrainSummary s;
  s.init = "dense";
  s.nonzero_params = count_parameters(r.model.embedding.weights);
  s.best_epoch = r.best_epoch;
  s.epochs_run = r.epochs_run;
  s.best_val_logloss = r.best_val_logloss;

  Manifest manifest = Manifest::load(out);
  manifest.section("baseline")[name] = {{"hash", hash_json({{"data", data_hash(config)},
                                                            {"model", model_json(config.model)},
                                                            {"optimizer", optimizer_json(config.adam)},
                                                            {"retrain", retrain_json(config.retrain)},
                                                            {"seed", config.seed},
                                                            {"kind", name}})},
                                        {"model", model_file},
                                        {"history", history_file},
                                        {"best_epoch", r.best_epoch},
                                        {"epochs_run", r.epochs_run},
                                        {"nonzero_params", s.nonzero_params}};
  manifest.save(out);
  return s;
}

namespace {

struct ResolvedModel {
  std::string name;
  fs::path path;
};

ResolvedModel resolve_target(const RunConfig& config, const std::string& target) {
  const fs::path out = config.output_dir;
  const Manifest manifest = Manifest::load(out);
  if (target.rfind("baseline_", 0) == 0) {
    const std::string kind = target.substr(9);
    const auto* b = manifest.find("baseline");
    require(b != nullptr && b->contains(kind), ErrorKind::Contract, "no baseline '" + kind + "' in manifest");
    return {target, out / b->at(kind).at("model").get<std::string>()};
  }
  if (target.rfind("budget_", 0) == 0) {
    manifest.require_hash("prune", prune_hash(config));
    const auto* r = manifest.find("retrain");
    require(r != nullptr && r->contains(target), ErrorKind::Contract, "no retrained model '" + target + "' in manifest");
    const std::string got = r->at(target).at("hash").get<std::string>();
    require(got == retrain_hash(config), ErrorKind::Contract,
            "retrained model '" + target + "' comes from a different retrain configuration");
    return {target, out / r->at(target).at("model").get<std::string>()};
  }
  const fs::path p = target;
  require(fs::exists(p), ErrorKind::Input, "model not found: " + target);
  return {p.stem().string(), p};
}

}  // namespace

EvalReport cmd_eval(const RunConfig& config, const CommandOptions& options, const std::string& target) {
  const LoadedData data = load_ingested(config);
  const ResolvedModel rm = resolve_target(config, target);
  const fs::path report_path = config.output_dir / "eval" / (rm.name + ".json");
  refuse_overwrite(report_path, options);

  const Checkpoint cp = read_checkpoint(rm.path);
  require(cp.model.feature_count() == data.schema.feature_count() &&
              cp.model.field_count == data.schema.field_count(),
          ErrorKind::Contract, "model does not match the ingested schema");
  const Matrix active = cp.active_embedding();
  const Evaluation ev = evaluate(cp.model, active, data.split.test, config.threads);

  EvalReport report;
  report.auc = ev.auc;
  report.logloss = ev.logloss;
  report.nonzero_params = count_parameters(active);
  report.samples = data.split.test.size();
  report.fields = field_dims(active, data.schema);

  fs::create_directories(report_path.parent_path());
  write_text(report_path, to_json(report).dump(2) + "\n");
  return report;
}

AnalyzeSummary cmd_analyze(const RunConfig& config, const CommandOptions& options, std::size_t budget_index,
                           const std::string& init) {
  const LoadedData data = load_ingested(config);
  const fs::path out = config.output_dir;
  const std::string key = retrain_key(budget_index, init);
  const fs::path dir = out / "analyze";
  const fs::path summary_path = dir / (key + "_summary.json");
  refuse_overwrite(summary_path, options);

  const ResolvedModel pruned_ref = resolve_target(config, key);
  const ResolvedModel original_ref =
      resolve_target(config, "baseline_" + std::string(to_string(config.model.kind)));
  const Checkpoint pruned = read_checkpoint(pruned_ref.path);
  const Checkpoint original = read_checkpoint(original_ref.path);
  require(pruned.model.has_embedding() && original.model.has_embedding(), ErrorKind::Contract,
          "interaction analysis needs embedding models");

  const Matrix pruned_table = pruned.active_embedding();
  const Matrix original_table = original.active_embedding();
  InteractionOptions io;
  io.seed = config.seed;
  const auto before = interaction_matrix(original_table, data.split.test, io);
  const auto after = interaction_matrix(pruned_table, data.split.test, io);
  const auto diff = interaction_difference(after, before);

  fs::create_directories(dir);
  AnalyzeSummary s;
  const auto& names = data.schema.field_names();
  auto emit = [&](const std::string& suffix, const InteractionMatrix& m) {
    const fs::path p = dir / (key + "_" + suffix + ".csv");
    write_matrix_csv(p, m, names);
    s.files.push_back(p);
  };
  emit("interaction_original", before);
  emit("interaction_pruned", after);
  emit("interaction_diff", diff);

  const PruneMask mask = extract_mask(pruned_table, pruned_table);
  const auto& freq = data.schema.feature_frequencies();
  const auto rows = frequency_sparsity_scatter(mask, freq);
  std::string csv = "feature_id,frequency,sparsity\n";
  std::vector<double> fx, sy;
  for (const auto& r : rows) {
    csv += std::to_string(r.feature_id) + "," + std::to_string(r.frequency) + "," + format_double(r.sparsity) + "\n";
    fx.push_back(static_cast<double>(r.frequency));
    sy.push_back(r.sparsity);
  }
  const fs::path scatter = dir / (key + "_frequency_sparsity.csv");
  write_text(scatter, csv);
  s.files.push_back(scatter);
  s.spearman = spearman(fx, sy);

  ordered_json summary = {{"model", pruned_ref.path.lexically_relative(out).string()},
                          {"original", original_ref.path.lexically_relative(out).string()},
                          {"nonzero_params", count_parameters(pruned_table)},
                          {"spearman_frequency_sparsity", s.spearman}};
  write_text(summary_path, summary.dump(2) + "\n");
  s.files.push_back(summary_path);
  return s;
}

RunArtifacts run_pipeline(const RunConfig& config, const CommandOptions& options) {
  RunArtifacts a;
  a.ingest = cmd_ingest(config, options);
  a.prune = cmd_prune(config, options);
  a.retrains = cmd_retrain(config, options, std::nullopt, std::string(to_string(config.retrain.init_mode)));
  return a;
}

}  // namespace pep
