#include "pep/schema.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pep/error.hpp"
#include "pep/rng.hpp"

namespace pep {

FieldSchema::FieldSchema(std::vector<std::string> field_names,
                         std::vector<std::vector<std::string>> vocab,
                         std::uint64_t min_frequency)
    : field_names_(std::move(field_names)), vocab_(std::move(vocab)), min_frequency_(min_frequency) {
  require(field_names_.size() == vocab_.size(), ErrorKind::Schema,
          "field name count does not match vocabulary count");
  require(!field_names_.empty(), ErrorKind::Schema, "schema has no fields");
  field_offsets_.assign(1, 0);
  lookup_.resize(vocab_.size());
  for (std::size_t f = 0; f < vocab_.size(); ++f) {
    const std::uint64_t base = field_offsets_.back();
    for (std::size_t k = 0; k < vocab_[f].size(); ++k) {
      const auto [it, inserted] =
          lookup_[f].emplace(vocab_[f][k], static_cast<std::uint32_t>(base + k));
      require(inserted, ErrorKind::Schema,
              "duplicate token '" + vocab_[f][k] + "' in field " + field_names_[f]);
    }
    field_offsets_.push_back(base + vocab_[f].size() + 1);
  }
  require(field_offsets_.back() <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::Schema,
          "feature count exceeds 32-bit index space");
}

std::uint32_t FieldSchema::encode(std::size_t field, const std::string& token) const {
  const auto& map = lookup_.at(field);
  const auto it = map.find(token);
  return it == map.end() ? unknown_index(field) : it->second;
}

std::size_t FieldSchema::field_of(std::uint32_t feature) const {
  require(feature < feature_count(), ErrorKind::Index,
          "feature index " + std::to_string(feature) + " out of range");
  const auto it = std::upper_bound(field_offsets_.begin(), field_offsets_.end(), feature);
  return static_cast<std::size_t>(it - field_offsets_.begin()) - 1;
}

void FieldSchema::set_feature_frequencies(std::vector<std::uint64_t> freq) {
  require(freq.size() == feature_count(), ErrorKind::Shape,
          "frequency vector length does not match feature count");
  frequencies_ = std::move(freq);
}

void SampleSet::push_back(std::span<const std::uint32_t> features, std::uint8_t label) {
  require(features.size() == field_count_, ErrorKind::Shape,
          "sample has " + std::to_string(features.size()) + " features, expected " +
              std::to_string(field_count_));
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
}

SampleSet SampleSet::subset(std::span<const std::uint64_t> indices) const {
  SampleSet out(field_count_);
  out.reserve(indices.size());
  for (std::uint64_t i : indices) {
    if (i >= size()) fail(ErrorKind::Index, "split index " + std::to_string(i) + " out of range");
    out.push_back(features(i), labels_[i]);
  }
  return out;
}

FieldSchema build_schema(std::span<const std::vector<std::string>> rows,
                         std::vector<std::string> field_names, std::uint64_t min_frequency) {
  require(!rows.empty(), ErrorKind::Schema, "no input rows");
  const std::size_t m = rows.front().size();
  require(m > 0, ErrorKind::Schema, "rows have no fields");
  if (field_names.empty()) {
    for (std::size_t f = 0; f < m; ++f) field_names.push_back("f" + std::to_string(f));
  }
  require(field_names.size() == m, ErrorKind::Format, "field name count does not match column count");

  std::vector<std::vector<std::string>> order(m);
  std::vector<std::unordered_map<std::string, std::uint64_t>> counts(m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == m, ErrorKind::Format,
            "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                " columns, expected " + std::to_string(m));
    for (std::size_t f = 0; f < m; ++f) {
      auto [it, inserted] = counts[f].try_emplace(rows[r][f], 0);
      if (inserted) order[f].push_back(rows[r][f]);
      ++it->second;
    }
  }

  std::vector<std::vector<std::string>> vocab(m);
  for (std::size_t f = 0; f < m; ++f) {
    for (auto& token : order[f]) {
      if (counts[f][token] >= min_frequency) vocab[f].push_back(std::move(token));
    }
  }
  return FieldSchema(std::move(field_names), std::move(vocab), min_frequency);
}

FieldSchema build_schema(const RawTable& table, std::uint64_t min_frequency) {
  return build_schema(table.rows, table.field_names, min_frequency);
}

SampleSet encode_samples(const FieldSchema& schema, const RawTable& table) {
  const std::size_t m = schema.field_count();
  require(table.rows.size() == table.labels.size(), ErrorKind::Format, "row/label count mismatch");
  SampleSet out(m);
  out.reserve(table.rows.size());
  std::vector<std::uint32_t> idx(m);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    require(table.rows[r].size() == m, ErrorKind::Format,
            "row " + std::to_string(r) + " column count differs from schema");
    for (std::size_t f = 0; f < m; ++f) idx[f] = schema.encode(f, table.rows[r][f]);
    out.push_back(idx, table.labels[r]);
  }
  return out;
}

std::vector<std::uint64_t> count_frequencies(const FieldSchema& schema, const SampleSet& samples) {
  std::vector<std::uint64_t> freq(schema.feature_count(), 0);
  for (std::uint32_t f : samples.flat_features()) {
    require(f < freq.size(), ErrorKind::Index, "feature index out of schema range");
    ++freq[f];
  }
  return freq;
}

std::int64_t transform_numeric(double x) {
  require(std::isfinite(x), ErrorKind::Format, "non-finite numeric value");
  if (x > 2.0) {
    const double l = std::log2(x);
    return static_cast<std::int64_t>(std::floor(l * l));
  }
  return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(x)));
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
  require(n >= 10, ErrorKind::Size,
          "need at least 10 samples to split, got " + std::to_string(n));
  std::vector<std::uint64_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(perm);

  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + n_train);
  out.validation.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  out.test.assign(perm.begin() + n_train + n_val, perm.end());
  return out;
}

DatasetSplit apply_split(const SampleSet& samples, SplitIndices indices, std::uint64_t seed) {
  DatasetSplit out;
  out.train = samples.subset(indices.train);
  out.validation = samples.subset(indices.validation);
  out.test = samples.subset(indices.test);
  out.split_seed = seed;
  out.indices = std::move(indices);
  return out;
}

DatasetSplit split_dataset(const SampleSet& samples, std::uint64_t seed) {
  require(!samples.empty(), ErrorKind::Size, "no samples to split");
  return apply_split(samples, split_indices(samples.size(), seed), seed);
}

RatingLabel movielens_labeler(int rating) {
  require(rating >= 1 && rating <= 5, ErrorKind::Format,
          "rating " + std::to_string(rating) + " outside 1..5");
  if (rating <= 2) return RatingLabel::Negative;
  if (rating >= 4) return RatingLabel::Positive;
  return RatingLabel::Drop;
}

}  // namespace pep
