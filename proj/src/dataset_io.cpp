#include "pep/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "pep/binary_io.hpp"
#include "pep/error.hpp"

namespace pep {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kSplitsVersion = 1;
constexpr std::uint32_t kSamplesVersion = 1;

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Input, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Input, "cannot write " + path.string());
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

long parse_long(const std::string& s, const std::string& context) {
  long v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  require(ec == std::errc() && p == end, ErrorKind::Format,
          context + ": expected integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::Format, context + ": expected number, got '" + s + "'");
  }
  require(used == s.size(), ErrorKind::Format, context + ": expected number, got '" + s + "'");
  return v;
}

}  // namespace

DelimitedFormat criteo_format() {
  DelimitedFormat fmt;
  fmt.delimiter = "\t";
  fmt.label_column = 0;
  for (std::size_t c = 1; c <= 13; ++c) fmt.numeric_columns.push_back(c);
  for (std::size_t i = 1; i <= 13; ++i) fmt.field_names.push_back("I" + std::to_string(i));
  for (std::size_t i = 1; i <= 26; ++i) fmt.field_names.push_back("C" + std::to_string(i));
  return fmt;
}

std::vector<std::string> split_line(const std::string& line, const std::string& delimiter) {
  require(!delimiter.empty(), ErrorKind::Input, "empty delimiter");
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delimiter.size();
  }
}

RawTable read_delimited(const fs::path& path, const DelimitedFormat& format) {
  std::ifstream in = open_input(path);
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::vector<bool> numeric;

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_line(line, format.delimiter);
    if (columns == 0) {
      columns = cells.size();
      require(format.label_column < columns, ErrorKind::Format,
              path.string() + ": label column beyond row width");
      numeric.assign(columns, false);
      for (std::size_t c : format.numeric_columns) {
        require(c < columns && c != format.label_column, ErrorKind::Format,
                path.string() + ": bad numeric column " + std::to_string(c));
        numeric[c] = true;
      }
      if (format.has_header) {
        for (std::size_t c = 0; c < columns; ++c) {
          if (c != format.label_column) table.field_names.push_back(cells[c]);
        }
        continue;
      }
    }
    require(cells.size() == columns, ErrorKind::Format,
            path.string() + ":" + std::to_string(line_no) + ": expected " +
                std::to_string(columns) + " columns, got " + std::to_string(cells.size()));

    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    const double label = parse_double(cells[format.label_column], ctx);
    table.labels.push_back(label > 0.0 ? 1 : 0);

    std::vector<std::string> row;
    row.reserve(columns - 1);
    for (std::size_t c = 0; c < columns; ++c) {
      if (c == format.label_column) continue;
      if (numeric[c] && !cells[c].empty()) {
        row.push_back(std::to_string(transform_numeric(parse_double(cells[c], ctx))));
      } else {
        row.push_back(std::move(cells[c]));
      }
    }
    table.rows.push_back(std::move(row));
  }
  require(!table.rows.empty(), ErrorKind::Schema, path.string() + ": no data rows");

  if (table.field_names.empty()) {
    if (format.field_names.size() == columns - 1) {
      table.field_names = format.field_names;
    } else {
      for (std::size_t f = 0; f + 1 < columns; ++f) table.field_names.push_back("f" + std::to_string(f));
    }
  }
  return table;
}

RawTable read_movielens_1m(const fs::path& dir) {
  struct User {
    std::string gender, age, occupation, zip;
  };
  std::unordered_map<std::string, User> users;
  std::unordered_map<std::string, std::string> genres;
  std::string line;

  {
    const fs::path p = dir / "users.dat";
    std::ifstream in = open_input(p);
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      strip_cr(line);
      if (line.empty()) continue;
      auto c = split_line(line, "::");
      require(c.size() == 5, ErrorKind::Format,
              p.string() + ":" + std::to_string(n) + ": expected 5 columns");
      users[c[0]] = User{c[1], c[2], c[3], c[4]};
    }
  }
  {
    const fs::path p = dir / "movies.dat";
    std::ifstream in = open_input(p);
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      strip_cr(line);
      if (line.empty()) continue;
      auto c = split_line(line, "::");
      require(c.size() == 3, ErrorKind::Format,
              p.string() + ":" + std::to_string(n) + ": expected 3 columns");
      // Multi-genre movies keep the whole "A|B|C" string as one composite token.
      genres[c[0]] = c[2];
    }
  }

  RawTable table;
  table.field_names = {"user_id", "gender", "age", "occupation", "zip", "movie_id", "genre"};
  const fs::path p = dir / "ratings.dat";
  std::ifstream in = open_input(p);
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    auto c = split_line(line, "::");
    const std::string ctx = p.string() + ":" + std::to_string(n);
    require(c.size() == 4, ErrorKind::Format, ctx + ": expected 4 columns");
    const RatingLabel label = movielens_labeler(static_cast<int>(parse_long(c[2], ctx)));
    if (label == RatingLabel::Drop) continue;
    const auto u = users.find(c[0]);
    require(u != users.end(), ErrorKind::Format, ctx + ": unknown user " + c[0]);
    const auto g = genres.find(c[1]);
    require(g != genres.end(), ErrorKind::Format, ctx + ": unknown movie " + c[1]);
    table.rows.push_back({c[0], u->second.gender, u->second.age, u->second.occupation,
                          u->second.zip, c[1], g->second});
    table.labels.push_back(label == RatingLabel::Positive ? 1 : 0);
  }
  require(!table.rows.empty(), ErrorKind::Schema, p.string() + ": no usable ratings");
  return table;
}

void write_schema_json(const fs::path& path, const FieldSchema& schema) {
  nlohmann::ordered_json j;
  j["field_count"] = schema.field_count();
  j["feature_count"] = schema.feature_count();
  j["min_frequency"] = schema.min_frequency();
  j["field_names"] = schema.field_names();
  j["field_offsets"] = schema.field_offsets();
  std::vector<std::uint32_t> unknown;
  auto vocab = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < schema.field_count(); ++f) {
    unknown.push_back(schema.unknown_index(f));
    nlohmann::ordered_json field = nlohmann::ordered_json::object();
    const auto base = schema.field_offsets()[f];
    for (std::size_t k = 0; k < schema.vocab()[f].size(); ++k) {
      field[schema.vocab()[f][k]] = base + k;
    }
    vocab.push_back(std::move(field));
  }
  j["unknown_index"] = unknown;
  j["vocab"] = std::move(vocab);
  j["feature_frequencies"] = schema.feature_frequencies();

  std::ofstream out = open_output(path);
  out << j.dump(1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
}

FieldSchema read_schema_json(const fs::path& path) {
  std::ifstream in = open_input(path);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
    auto names = j.at("field_names").get<std::vector<std::string>>();
    std::vector<std::vector<std::string>> vocab;
    for (const auto& field : j.at("vocab")) {
      std::vector<std::string> tokens;
      for (const auto& [token, index] : field.items()) {
        (void)index;
        tokens.push_back(token);
      }
      vocab.push_back(std::move(tokens));
    }
    FieldSchema schema(std::move(names), std::move(vocab), j.at("min_frequency").get<std::uint64_t>());
    require(schema.field_offsets() == j.at("field_offsets").get<std::vector<std::uint64_t>>(),
            ErrorKind::Format, path.string() + ": field offsets inconsistent with vocab");
    auto freq = j.at("feature_frequencies").get<std::vector<std::uint64_t>>();
    if (!freq.empty()) schema.set_feature_frequencies(std::move(freq));
    return schema;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_splits(const fs::path& path, const SplitIndices& splits) {
  std::ofstream out = open_output(path);
  binio::put_magic(out, "PEPS");
  binio::put_u32(out, kSplitsVersion);
  for (const auto* part : {&splits.train, &splits.validation, &splits.test}) {
    binio::put_u64(out, part->size());
    for (std::uint64_t v : *part) binio::put_u64(out, v);
  }
}

SplitIndices read_splits(const fs::path& path) {
  std::ifstream in = open_input(path);
  binio::Reader r(in, path.string());
  r.expect_magic("PEPS");
  require(r.u32() == kSplitsVersion, ErrorKind::Format, path.string() + ": unsupported version");
  SplitIndices s;
  for (auto* part : {&s.train, &s.validation, &s.test}) {
    part->resize(r.length(1ULL << 34));
    for (auto& v : *part) v = r.u64();
  }
  return s;
}

void write_samples(const fs::path& path, const SampleSet& samples) {
  std::ofstream out = open_output(path);
  binio::put_magic(out, "PEPD");
  binio::put_u32(out, kSamplesVersion);
  binio::put_u64(out, samples.field_count());
  binio::put_u64(out, samples.size());
  for (std::uint32_t f : samples.flat_features()) binio::put_u32(out, f);
  for (std::uint8_t y : samples.labels()) binio::put_u8(out, y);
}

SampleSet read_samples(const fs::path& path) {
  std::ifstream in = open_input(path);
  binio::Reader r(in, path.string());
  r.expect_magic("PEPD");
  require(r.u32() == kSamplesVersion, ErrorKind::Format, path.string() + ": unsupported version");
  const std::size_t m = r.length(1 << 16);
  const std::size_t n = r.length(1ULL << 34);
  SampleSet out(m);
  out.reserve(n);
  std::vector<std::uint32_t> flat(n * m);
  for (auto& f : flat) f = r.u32();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = r.u8();
    require(y <= 1, ErrorKind::Format, path.string() + ": label byte not 0/1");
    out.push_back(std::span<const std::uint32_t>(flat.data() + i * m, m), y);
  }
  return out;
}

}  // namespace pep
