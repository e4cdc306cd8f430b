#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pep/schema.hpp"

namespace pep {

// Toy CTR data from a known FM: only "signal" tokens carry a linear weight
// and a low-rank embedding, the rest are pure noise. With the unknown slot
// each field the defaults give 1,000 features, 100 of them signal.
struct PlantedConfig {
  std::size_t fields = 10;
  std::size_t features_per_field = 99;
  std::size_t signal_per_field = 10;
  double signal_probability = 0.5;
  std::size_t rank = 4;
  double embedding_scale = 0.8;
  double weight_scale = 0.5;
  double bias = 0.0;
  std::size_t samples = 500000;
  std::uint64_t seed = 7;
};

struct PlantedData {
  RawTable table;
  // Per field, the tokens that carry signal.
  std::vector<std::vector<std::string>> signal_tokens;
};

PlantedData make_planted(const PlantedConfig& config);

// 1 for every global feature index that is a planted signal token.
std::vector<std::uint8_t> signal_flags(const FieldSchema& schema, const PlantedData& data);

// Synthetic text files in the MovieLens-1M "::" layout.
struct MovieLensShape {
  std::size_t users = 200;
  std::size_t movies = 150;
  std::size_t ratings = 5000;
  std::uint64_t seed = 11;
};

void write_movielens_like(const std::filesystem::path& dir, const MovieLensShape& shape);

// Criteo layout: label, 13 integer columns, 26 hex categorical columns.
void write_criteo_like(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed);

// Tab- or otherwise-delimited dump, label first.
void write_delimited(const std::filesystem::path& path, const RawTable& table, const std::string& delimiter = "\t");

}  // namespace pep
