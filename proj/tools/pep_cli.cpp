#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pep/error.hpp"
#include "pep/pipeline.hpp"
#include "pep/synthetic.hpp"

namespace {

int exit_code(pep::ErrorKind kind) {
  using pep::ErrorKind;
  switch (kind) {
    case ErrorKind::Overwrite:
      return 3;
    case ErrorKind::Contract:
    case ErrorKind::Shape:
      return 4;
    case ErrorKind::Numeric:
      return 5;
    default:
      return 2;
  }
}

std::size_t env_threads() {
  const char* v = std::getenv("PEP_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  pep::require(end != v && *end == '\0' && n > 0, pep::ErrorKind::Input,
               std::string("PEP_THREADS must be a positive integer, got '") + v + "'");
  return n;
}

void report_prune(const pep::PruneSummary& s) {
  std::cerr << "prune: " << s.captured_nonzeros.size() << "/" << s.budgets.size() << " budgets captured in "
            << s.epochs_run << " epochs\n";
  for (std::size_t k = 0; k < s.captured_nonzeros.size(); ++k) {
    std::cerr << "  budget " << k << ": " << s.budgets[k] << " -> " << s.captured_nonzeros[k] << " nonzeros at epoch "
              << s.captured_epochs[k] << "\n";
  }
  for (auto b : s.unmet) std::cerr << "  warning: budget " << b << " not reached\n";
}

void report_retrain(const pep::RetrainSummary& s) {
  std::cerr << "retrain budget " << s.budget_index << " (" << s.init << "): " << s.nonzero_params
            << " nonzeros, best epoch " << s.best_epoch << " of " << s.epochs_run << ", val logloss "
            << pep::format_double(s.best_val_logloss) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learnable embedding pruning for CTR models"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::optional<std::size_t> budget;
  std::string init = "lth";
  std::string kind = "lr";
  std::string target;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "seed (overrides config)");
    sub->add_flag("--force", force, "overwrite existing outputs");
  };

  auto* ingest = app.add_subcommand("ingest", "build schema, encoded samples and splits");
  common(ingest);
  auto* prune = app.add_subcommand("prune", "learn thresholds and capture one mask per budget");
  common(prune);
  auto* retrain = app.add_subcommand("retrain", "retrain captured masks");
  common(retrain);
  retrain->add_option("--budget", budget, "budget index (default: all)");
  retrain->add_option("--init", init, "lth, random or none")->check(CLI::IsMember({"lth", "random", "none"}));
  auto* baseline = app.add_subcommand("baseline", "train a dense baseline");
  common(baseline);
  baseline->add_option("--kind", kind, "lr, fm or deepfm")->check(CLI::IsMember({"lr", "fm", "deepfm"}));
  auto* eval = app.add_subcommand("eval", "evaluate a model on the test split");
  common(eval);
  eval->add_option("target", target, "manifest key (budget_<k>_<init>, baseline_<kind>) or .pepv path")->required();
  auto* analyze = app.add_subcommand("analyze", "interaction and frequency/sparsity analysis");
  common(analyze);
  analyze->add_option("--budget", budget, "budget index")->required();
  analyze->add_option("--init", init, "lth, random or none")->check(CLI::IsMember({"lth", "random", "none"}));
  auto* run = app.add_subcommand("run", "ingest, prune and retrain every budget");
  common(run);

  auto* synth = app.add_subcommand("synth", "write synthetic data files");
  std::string synth_kind = "planted";
  std::string synth_out;
  std::size_t rows = 0;
  std::uint64_t synth_seed = 7;
  synth->add_option("--kind", synth_kind, "planted, movielens or criteo")
      ->check(CLI::IsMember({"planted", "movielens", "criteo"}));
  synth->add_option("--out", synth_out, "output file (directory for movielens)")->required();
  synth->add_option("--rows", rows, "number of samples or ratings");
  synth->add_option("--seed", synth_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      if (synth_kind == "planted") {
        pep::PlantedConfig pc;
        pc.seed = synth_seed;
        if (rows) pc.samples = rows;
        pep::write_delimited(synth_out, pep::make_planted(pc).table);
      } else if (synth_kind == "movielens") {
        pep::MovieLensShape shape;
        shape.seed = synth_seed;
        if (rows) shape.ratings = rows;
        pep::write_movielens_like(synth_out, shape);
      } else {
        pep::write_criteo_like(synth_out, rows ? rows : 10000, synth_seed);
      }
      return 0;
    }

    std::optional<std::filesystem::path> out;
    if (out_dir) out = *out_dir;
    pep::RunConfig config = pep::load_config(config_path, seed, out);
    if (const auto t = env_threads()) config.threads = t;
    const pep::CommandOptions options{force};

    if (ingest->parsed()) {
      const auto s = pep::cmd_ingest(config, options);
      std::cerr << "ingest: " << s.samples << " samples, " << s.fields << " fields, " << s.features
                << " features (train " << s.train << ", validation " << s.validation << ", test " << s.test << ")\n";
    } else if (prune->parsed()) {
      report_prune(pep::cmd_prune(config, options));
    } else if (retrain->parsed()) {
      for (const auto& s : pep::cmd_retrain(config, options, budget, init)) report_retrain(s);
    } else if (baseline->parsed()) {
      report_retrain(pep::cmd_baseline(config, options, pep::parse_model_kind(kind)));
    } else if (eval->parsed()) {
      std::cout << pep::to_json(pep::cmd_eval(config, options, target)).dump(2) << "\n";
    } else if (analyze->parsed()) {
      const auto s = pep::cmd_analyze(config, options, *budget, init);
      std::cerr << "analyze: spearman(frequency, sparsity) = " << pep::format_double(s.spearman) << "\n";
      for (const auto& f : s.files) std::cerr << "  " << f.string() << "\n";
    } else if (run->parsed()) {
      const auto a = pep::run_pipeline(config, options);
      report_prune(a.prune);
      for (const auto& s : a.retrains) report_retrain(s);
    }
  } catch (const pep::Error& e) {
    std::cerr << "error (" << pep::to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 2;
  }
  return 0;
}
