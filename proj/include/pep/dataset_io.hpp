#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pep/schema.hpp"

namespace pep {

struct DelimitedFormat {
  std::string delimiter = "\t";
  std::size_t label_column = 0;
  // Columns holding numeric values; bucketized through transform_numeric.
  // Empty cells stay as the empty token.
  std::vector<std::size_t> numeric_columns;
  bool has_header = false;
  std::vector<std::string> field_names;
};

// Tab-separated: label, 13 integer columns, 26 hashed categorical columns.
DelimitedFormat criteo_format();

std::vector<std::string> split_line(const std::string& line, const std::string& delimiter);

RawTable read_delimited(const std::filesystem::path& path, const DelimitedFormat& format);

// MovieLens-1M directory layout (ratings.dat, users.dat, movies.dat, "::"
// separated). Produces seven fields: user_id, gender, age, occupation, zip,
// movie_id, genre. Rating 3 rows are dropped.
RawTable read_movielens_1m(const std::filesystem::path& dir);

void write_schema_json(const std::filesystem::path& path, const FieldSchema& schema);
FieldSchema read_schema_json(const std::filesystem::path& path);

// Split sidecar: "PEPS", u32 version, then train/validation/test as u64
// length-prefixed u64 arrays.
void write_splits(const std::filesystem::path& path, const SplitIndices& splits);
SplitIndices read_splits(const std::filesystem::path& path);

// Encoded sample sidecar: "PEPD", u32 version, u64 field count, u64 sample
// count, u32 indices row-major, u8 labels.
void write_samples(const std::filesystem::path& path, const SampleSet& samples);
SampleSet read_samples(const std::filesystem::path& path);

}  // namespace pep
