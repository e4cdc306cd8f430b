#include "pep/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pep/error.hpp"
#include "pep/rng.hpp"

namespace pep {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Input, "cannot write " + path.string());
  return out;
}

}  // namespace

PlantedData make_planted(const PlantedConfig& c) {
  require(c.signal_per_field <= c.features_per_field && c.signal_per_field > 0, ErrorKind::Input,
          "signal_per_field must be in [1, features_per_field]");
  Rng params = Rng::stream(c.seed, "planted-params");
  Rng draws = Rng::stream(c.seed, "planted-samples");

  PlantedData data;
  const std::size_t noise = c.features_per_field - c.signal_per_field;
  std::vector<std::vector<double>> w(c.fields);
  std::vector<std::vector<std::vector<double>>> u(c.fields);
  for (std::size_t f = 0; f < c.fields; ++f) {
    data.table.field_names.push_back("F" + std::to_string(f));
    std::vector<std::string> tokens;
    for (std::size_t j = 0; j < c.signal_per_field; ++j) {
      tokens.push_back("s" + std::to_string(j));
      w[f].push_back(c.weight_scale * params.normal());
      std::vector<double> v(c.rank);
      for (auto& x : v) x = c.embedding_scale * params.normal();
      u[f].push_back(std::move(v));
    }
    data.signal_tokens.push_back(std::move(tokens));
  }

  std::vector<std::size_t> pick(c.fields);
  std::vector<double> sum(c.rank);
  for (std::size_t n = 0; n < c.samples; ++n) {
    std::vector<std::string> row(c.fields);
    double logit = c.bias;
    std::fill(sum.begin(), sum.end(), 0.0);
    double sq = 0.0;
    for (std::size_t f = 0; f < c.fields; ++f) {
      const bool signal = noise == 0 || draws.uniform() < c.signal_probability;
      if (signal) {
        const std::size_t j = draws.below(c.signal_per_field);
        row[f] = "s" + std::to_string(j);
        logit += w[f][j];
        for (std::size_t r = 0; r < c.rank; ++r) {
          sum[r] += u[f][j][r];
          sq += u[f][j][r] * u[f][j][r];
        }
      } else {
        row[f] = "n" + std::to_string(draws.below(noise));
      }
    }
    double s2 = 0.0;
    for (double x : sum) s2 += x * x;
    logit += 0.5 * (s2 - sq);
    const double p = 1.0 / (1.0 + std::exp(-logit));
    data.table.labels.push_back(draws.uniform() < p ? 1 : 0);
    data.table.rows.push_back(std::move(row));
  }
  return data;
}

std::vector<std::uint8_t> signal_flags(const FieldSchema& schema, const PlantedData& data) {
  std::vector<std::uint8_t> flags(schema.feature_count(), 0);
  for (std::size_t f = 0; f < data.signal_tokens.size(); ++f) {
    for (const auto& t : data.signal_tokens[f]) {
      const auto i = schema.encode(f, t);
      if (i != schema.unknown_index(f)) flags[i] = 1;
    }
  }
  return flags;
}

void write_movielens_like(const fs::path& dir, const MovieLensShape& s) {
  Rng rng = Rng::stream(s.seed, "movielens-like");
  static const char* kGenres[] = {"Action", "Comedy", "Drama", "Horror", "Romance", "Thriller"};
  static const int kAges[] = {1, 18, 25, 35, 45, 50, 56};
  {
    auto out = open_output(dir / "users.dat");
    for (std::size_t u = 1; u <= s.users; ++u) {
      out << u << "::" << (rng.below(2) ? "M" : "F") << "::" << kAges[rng.below(7)] << "::" << rng.below(21)
          << "::" << 10000 + rng.below(s.users) << "\n";
    }
  }
  std::vector<double> appeal(s.movies + 1);
  {
    auto out = open_output(dir / "movies.dat");
    for (std::size_t m = 1; m <= s.movies; ++m) {
      std::string genre = kGenres[rng.below(6)];
      if (rng.uniform() < 0.3) genre += std::string("|") + kGenres[rng.below(6)];
      out << m << "::Movie " << m << " (1999)::" << genre << "\n";
      appeal[m] = rng.normal();
    }
  }
  auto out = open_output(dir / "ratings.dat");
  for (std::size_t r = 0; r < s.ratings; ++r) {
    const std::size_t u = 1 + rng.below(s.users);
    const std::size_t m = 1 + rng.below(s.movies);
    const double score = 3.0 + appeal[m] + 0.8 * rng.normal();
    const long rating = std::lround(std::clamp(score, 1.0, 5.0));
    out << u << "::" << m << "::" << rating << "::" << 978300000 + r << "\n";
  }
}

void write_criteo_like(const fs::path& path, std::size_t rows, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "criteo-like");
  auto out = open_output(path);
  char hex[16];
  for (std::size_t r = 0; r < rows; ++r) {
    out << (rng.uniform() < 0.25 ? 1 : 0);
    for (int i = 0; i < 13; ++i) {
      out << '\t';
      if (rng.uniform() < 0.1) continue;
      out << static_cast<long>(std::floor(std::exp(3.0 * rng.uniform()))) - 1;
    }
    for (int c = 0; c < 26; ++c) {
      out << '\t';
      if (rng.uniform() < 0.05) continue;
      const std::uint64_t cardinality = 5 + 10 * static_cast<std::uint64_t>(c);
      std::snprintf(hex, sizeof hex, "%08llx",
                    static_cast<unsigned long long>(Rng::splitmix(rng.below(cardinality) + 977 * c) & 0xffffffffULL));
      out << hex;
    }
    out << '\n';
  }
}

void write_delimited(const fs::path& path, const RawTable& table, const std::string& delimiter) {
  auto out = open_output(path);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out << static_cast<int>(table.labels[r]);
    for (const auto& cell : table.rows[r]) out << delimiter << cell;
    out << '\n';
  }
}

}  // namespace pep
