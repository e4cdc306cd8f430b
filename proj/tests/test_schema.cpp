#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "pep/dataset_io.hpp"
#include "pep/error.hpp"
#include "pep/schema.hpp"
#include "pep/synthetic.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace pep;

TEST(BuildSchema, RareTokensFoldIntoUnknown) {
  const std::vector<std::vector<std::string>> rows{{"a"}, {"a"}, {"b"}};
  const FieldSchema s = build_schema(rows, {"f"}, 2);
  EXPECT_EQ(s.feature_count(), 2u);
  EXPECT_EQ(s.encode(0, "a"), 0u);
  EXPECT_EQ(s.unknown_index(0), 1u);
  EXPECT_EQ(s.encode(0, "b"), 1u);
  EXPECT_EQ(s.encode(0, "never seen"), 1u);
}

TEST(BuildSchema, ZeroMinFrequencyKeepsEveryToken) {
  const std::vector<std::vector<std::string>> rows{{"x", "p"}, {"y", "p"}, {"x", "q"}, {"z", "r"}};
  const FieldSchema s = build_schema(rows, {"f0", "f1"}, 0);
  // 3 + 3 distinct tokens plus one unknown slot per field.
  EXPECT_EQ(s.feature_count(), 8u);
  EXPECT_EQ(s.field_offsets(), (std::vector<std::uint64_t>{0, 4, 8}));
  // First-appearance order.
  EXPECT_EQ(s.encode(0, "x"), 0u);
  EXPECT_EQ(s.encode(0, "y"), 1u);
  EXPECT_EQ(s.encode(0, "z"), 2u);
  EXPECT_EQ(s.encode(1, "p"), 4u);
  EXPECT_EQ(s.encode(1, "r"), 6u);
  EXPECT_EQ(s.unknown_index(1), 7u);
  std::size_t total = 0;
  for (std::size_t f = 0; f < s.field_count(); ++f) total += s.field_size(f);
  EXPECT_EQ(total, s.feature_count());
}

TEST(BuildSchema, Errors) {
  const std::vector<std::vector<std::string>> none;
  EXPECT_ERROR_KIND(build_schema(none, {"f"}, 0), ErrorKind::Schema);
  const std::vector<std::vector<std::string>> ragged{{"a", "b"}, {"a"}};
  EXPECT_ERROR_KIND(build_schema(ragged, {"f0", "f1"}, 0), ErrorKind::Format);
}

TEST(TransformNumeric, Examples) {
  EXPECT_EQ(transform_numeric(2.0), 2);
  EXPECT_EQ(transform_numeric(4.0), 4);
  EXPECT_EQ(transform_numeric(0.5), 0);
  EXPECT_EQ(transform_numeric(-3.0), 0);
  EXPECT_EQ(transform_numeric(8.0), 9);
  EXPECT_EQ(transform_numeric(1000.0), 99);  // log2(1000)^2 = 99.3
  EXPECT_ERROR_KIND(transform_numeric(std::nan("")), ErrorKind::Format);
  EXPECT_ERROR_KIND(transform_numeric(INFINITY), ErrorKind::Format);
}

TEST(Split, Proportions) {
  const auto s10 = split_indices(10, 3);
  EXPECT_EQ(s10.train.size(), 8u);
  EXPECT_EQ(s10.validation.size(), 1u);
  EXPECT_EQ(s10.test.size(), 1u);
  const auto big = split_indices(739015, 2021);
  EXPECT_EQ(big.train.size(), 591212u);
  EXPECT_EQ(big.validation.size(), 73901u);
  EXPECT_EQ(big.test.size(), 73902u);
  EXPECT_ERROR_KIND(split_indices(9, 1), ErrorKind::Size);
}

TEST(Split, DisjointExhaustiveDeterministic) {
  for (std::size_t n : {10u, 11u, 57u, 1000u}) {
    const auto a = split_indices(n, 42);
    EXPECT_EQ(a, split_indices(n, 42));
    EXPECT_NE(a, split_indices(n, 43));
    std::vector<std::uint64_t> all;
    for (const auto* part : {&a.train, &a.validation, &a.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    std::vector<std::uint64_t> expect(n);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(all, expect);
    const double nd = static_cast<double>(n);
    EXPECT_NEAR(static_cast<double>(a.train.size()), 0.8 * nd, 1.0);
    EXPECT_NEAR(static_cast<double>(a.validation.size()), 0.1 * nd, 1.0);
    EXPECT_NEAR(static_cast<double>(a.test.size()), 0.1 * nd, 2.0);
  }
}

TEST(MovieLensLabeler, Mapping) {
  EXPECT_EQ(movielens_labeler(4), RatingLabel::Positive);
  EXPECT_EQ(movielens_labeler(5), RatingLabel::Positive);
  EXPECT_EQ(movielens_labeler(3), RatingLabel::Drop);
  EXPECT_EQ(movielens_labeler(1), RatingLabel::Negative);
  EXPECT_EQ(movielens_labeler(2), RatingLabel::Negative);
  EXPECT_ERROR_KIND(movielens_labeler(0), ErrorKind::Format);
  EXPECT_ERROR_KIND(movielens_labeler(6), ErrorKind::Format);
}

TEST(Encode, OneFeaturePerFieldWithinRange) {
  PlantedConfig pc;
  pc.samples = 2000;
  pc.fields = 4;
  const auto data = make_planted(pc);
  const FieldSchema schema = build_schema(data.table, 3);
  const SampleSet samples = encode_samples(schema, data.table);
  ASSERT_EQ(samples.size(), 2000u);
  const auto& off = schema.field_offsets();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto f = samples.features(i);
    ASSERT_EQ(f.size(), 4u);
    for (std::size_t k = 0; k < f.size(); ++k) {
      EXPECT_GE(f[k], off[k]);
      EXPECT_LT(f[k], off[k + 1]);
    }
  }
}

TEST(Frequencies, TrainSplitOnlyAndSumToSamplesTimesFields) {
  PlantedConfig pc;
  pc.samples = 500;
  pc.fields = 3;
  const auto data = make_planted(pc);
  FieldSchema schema = build_schema(data.table, 0);
  const SampleSet samples = encode_samples(schema, data.table);
  const DatasetSplit split = split_dataset(samples, 5);
  const auto freq = count_frequencies(schema, split.train);
  ASSERT_EQ(freq.size(), schema.feature_count());
  EXPECT_EQ(std::accumulate(freq.begin(), freq.end(), std::uint64_t{0}), split.train.size() * 3);
  const auto all = count_frequencies(schema, samples);
  EXPECT_NE(freq, all);
}

TEST(DatasetIo, SchemaAndSplitsRoundTripByteIdentical) {
  TempDir dir;
  PlantedConfig pc;
  pc.samples = 300;
  const auto data = make_planted(pc);
  FieldSchema schema = build_schema(data.table, 2);
  const SampleSet samples = encode_samples(schema, data.table);
  const DatasetSplit split = split_dataset(samples, 9);
  schema.set_feature_frequencies(count_frequencies(schema, split.train));

  write_schema_json(dir / "a.json", schema);
  write_splits(dir / "a.bin", split.indices);
  write_samples(dir / "a.pepd", samples);
  EXPECT_EQ(read_schema_json(dir / "a.json"), schema);
  EXPECT_EQ(read_splits(dir / "a.bin"), split.indices);
  EXPECT_EQ(read_samples(dir / "a.pepd"), samples);

  // Rebuilding from the same input reproduces the files bit for bit.
  FieldSchema again = build_schema(make_planted(pc).table, 2);
  again.set_feature_frequencies(count_frequencies(again, split_dataset(encode_samples(again, data.table), 9).train));
  write_schema_json(dir / "b.json", again);
  write_splits(dir / "b.bin", split_dataset(encode_samples(again, data.table), 9).indices);
  EXPECT_EQ(read_file(dir / "a.json"), read_file(dir / "b.json"));
  EXPECT_EQ(read_file(dir / "a.bin"), read_file(dir / "b.bin"));
}

TEST(DatasetIo, SplitFileLayout) {
  TempDir dir;
  SplitIndices s{{3, 1}, {0}, {2}};
  write_splits(dir / "s.bin", s);
  const std::string bytes = read_file(dir / "s.bin");
  ASSERT_EQ(bytes.size(), 4u + 4u + 3 * 8u + 4 * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "PEPS");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);  // version, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);  // train length
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 3u);

  std::string truncated = bytes.substr(0, bytes.size() - 3);
  std::ofstream(dir / "t.bin", std::ios::binary) << truncated;
  EXPECT_ERROR_KIND(read_splits(dir / "t.bin"), ErrorKind::Format);
  std::ofstream(dir / "m.bin", std::ios::binary) << "XXXX" << bytes.substr(4);
  EXPECT_ERROR_KIND(read_splits(dir / "m.bin"), ErrorKind::Format);
}

TEST(DatasetIo, MovieLensLayout) {
  TempDir dir;
  MovieLensShape shape;
  shape.ratings = 3000;
  write_movielens_like(dir.path(), shape);
  const RawTable t = read_movielens_1m(dir.path());
  EXPECT_EQ(t.field_names,
            (std::vector<std::string>{"user_id", "gender", "age", "occupation", "zip", "movie_id", "genre"}));
  EXPECT_GT(t.rows.size(), 0u);
  EXPECT_LT(t.rows.size(), 3000u);  // rating-3 rows dropped
  for (const auto& r : t.rows) EXPECT_EQ(r.size(), 7u);
  bool composite = false;
  for (const auto& r : t.rows) composite |= r[6].find('|') != std::string::npos;
  EXPECT_TRUE(composite);
  const FieldSchema s = build_schema(t, 0);
  EXPECT_EQ(s.field_count(), 7u);
}

TEST(DatasetIo, MovieLensMissingFileNamesPath) {
  TempDir dir;
  try {
    read_movielens_1m(dir / "nowhere");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Input);
    EXPECT_NE(std::string(e.what()).find("nowhere"), std::string::npos);
  }
}

TEST(DatasetIo, CriteoFormatSample) {
  TempDir dir;
  write_criteo_like(dir / "c.tsv", 5000, 3);
  const RawTable t = read_delimited(dir / "c.tsv", criteo_format());
  ASSERT_EQ(t.rows.size(), 5000u);
  EXPECT_EQ(t.field_names.size(), 39u);
  EXPECT_EQ(t.field_names.front(), "I1");
  EXPECT_EQ(t.field_names.back(), "C26");
  std::set<std::string> numeric_tokens;
  for (const auto& r : t.rows) {
    ASSERT_EQ(r.size(), 39u);
    numeric_tokens.insert(r[0]);
  }
  // Every numeric cell became a bucket token (or stayed empty for missing).
  for (const auto& tok : numeric_tokens) {
    if (tok.empty()) continue;
    EXPECT_GE(std::stoll(tok), 0);
  }
  const FieldSchema s = build_schema(t, 10);
  const SampleSet samples = encode_samples(s, t);
  EXPECT_EQ(samples.size(), 5000u);
  EXPECT_EQ(samples.field_count(), 39u);
}

TEST(DatasetIo, DelimitedBadLabelIsFormatError) {
  TempDir dir;
  std::ofstream(dir / "bad.tsv") << "1\ta\nx\tb\n";
  DelimitedFormat fmt;
  EXPECT_ERROR_KIND(read_delimited(dir / "bad.tsv", fmt), ErrorKind::Format);
}
