#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace pep {

// Raw categorical rows before indexing: one token per field, plus a 0/1 label.
struct RawTable {
  std::vector<std::string> field_names;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::uint8_t> labels;
};

// Per-field vocabularies laid out contiguously in one global index space.
// Field f owns [field_offsets[f], field_offsets[f+1]); its known tokens come
// first in first-appearance order and the last slot is the unknown token.
class FieldSchema {
 public:
  FieldSchema() = default;
  FieldSchema(std::vector<std::string> field_names,
              std::vector<std::vector<std::string>> vocab,
              std::uint64_t min_frequency);

  std::size_t field_count() const { return field_names_.size(); }
  std::size_t feature_count() const { return field_offsets_.empty() ? 0 : field_offsets_.back(); }

  const std::vector<std::string>& field_names() const { return field_names_; }
  const std::vector<std::vector<std::string>>& vocab() const { return vocab_; }
  const std::vector<std::uint64_t>& field_offsets() const { return field_offsets_; }
  std::uint64_t min_frequency() const { return min_frequency_; }

  std::uint32_t unknown_index(std::size_t field) const {
    return static_cast<std::uint32_t>(field_offsets_[field + 1] - 1);
  }
  std::size_t field_size(std::size_t field) const {
    return field_offsets_[field + 1] - field_offsets_[field];
  }

  // Global index for `token` in `field`; unseen or folded tokens map to the
  // field's unknown index.
  std::uint32_t encode(std::size_t field, const std::string& token) const;

  // Field owning a global feature index.
  std::size_t field_of(std::uint32_t feature) const;

  // Frequencies over the training split; empty until set.
  const std::vector<std::uint64_t>& feature_frequencies() const { return frequencies_; }
  void set_feature_frequencies(std::vector<std::uint64_t> freq);

  friend bool operator==(const FieldSchema& a, const FieldSchema& b) {
    return a.field_names_ == b.field_names_ && a.vocab_ == b.vocab_ &&
           a.min_frequency_ == b.min_frequency_ && a.frequencies_ == b.frequencies_;
  }

 private:
  std::vector<std::string> field_names_;
  std::vector<std::vector<std::string>> vocab_;
  std::vector<std::uint64_t> field_offsets_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> lookup_;
  std::vector<std::uint64_t> frequencies_;
  std::uint64_t min_frequency_ = 0;
};

// Read-only view of one sample: the active feature of each field.
struct SampleView {
  std::span<const std::uint32_t> features;
  std::uint8_t label;
};

// Samples stored flat, `field_count` indices per sample.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::size_t field_count) : field_count_(field_count) {}

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t field_count() const { return field_count_; }

  SampleView operator[](std::size_t i) const {
    return {{features_.data() + i * field_count_, field_count_}, labels_[i]};
  }
  std::span<const std::uint32_t> features(std::size_t i) const {
    return {features_.data() + i * field_count_, field_count_};
  }
  std::uint8_t label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  const std::vector<std::uint32_t>& flat_features() const { return features_; }

  void reserve(std::size_t n) {
    features_.reserve(n * field_count_);
    labels_.reserve(n);
  }
  void push_back(std::span<const std::uint32_t> features, std::uint8_t label);

  SampleSet subset(std::span<const std::uint64_t> indices) const;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;

 private:
  std::size_t field_count_ = 0;
  std::vector<std::uint32_t> features_;
  std::vector<std::uint8_t> labels_;
};

struct SplitIndices {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> validation;
  std::vector<std::uint64_t> test;

  friend bool operator==(const SplitIndices&, const SplitIndices&) = default;
};

struct DatasetSplit {
  SampleSet train;
  SampleSet validation;
  SampleSet test;
  std::uint64_t split_seed = 0;
  SplitIndices indices;
};

// Vocabulary construction; tokens seen fewer than `min_frequency` times over
// all rows are folded into the field's unknown slot.
FieldSchema build_schema(std::span<const std::vector<std::string>> rows,
                         std::vector<std::string> field_names,
                         std::uint64_t min_frequency);
FieldSchema build_schema(const RawTable& table, std::uint64_t min_frequency);

SampleSet encode_samples(const FieldSchema& schema, const RawTable& table);

// Occurrence count of every global feature over `samples`.
std::vector<std::uint64_t> count_frequencies(const FieldSchema& schema, const SampleSet& samples);

// Numeric-to-token bucketization: floor((log2 x)^2) for x > 2, floor(x)
// clamped at zero otherwise.
std::int64_t transform_numeric(double x);

// Random 80/10/10 partition of [0, n).
SplitIndices split_indices(std::size_t n, std::uint64_t seed);
DatasetSplit split_dataset(const SampleSet& samples, std::uint64_t seed);
DatasetSplit apply_split(const SampleSet& samples, SplitIndices indices, std::uint64_t seed);

enum class RatingLabel { Negative, Positive, Drop };
RatingLabel movielens_labeler(int rating);

}  // namespace pep
