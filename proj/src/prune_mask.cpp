#include "pep/prune_mask.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "pep/binary_io.hpp"
#include "pep/error.hpp"

namespace pep {

namespace {
constexpr std::uint32_t kSparseVersion = 1;
}

PruneMask PruneMask::full(const Matrix& initial) {
  PruneMask m;
  m.rows = initial.rows;
  m.cols = initial.cols;
  m.keep.assign(initial.size(), 1);
  m.initial = initial;
  m.nonzero_count = initial.size();
  return m;
}

PruneMask extract_mask(const Matrix& reparameterized, const Matrix& initial) {
  require(reparameterized.same_shape(initial), ErrorKind::Shape,
          "mask source and initial weights differ in shape");
  PruneMask m;
  m.rows = reparameterized.rows;
  m.cols = reparameterized.cols;
  m.keep.resize(reparameterized.size());
  for (std::size_t k = 0; k < reparameterized.size(); ++k) {
    m.keep[k] = reparameterized.data[k] != 0.0 ? 1 : 0;
    m.nonzero_count += m.keep[k];
  }
  m.initial = initial;
  return m;
}

Matrix apply_mask(const Matrix& weights, const PruneMask& mask) {
  require(weights.rows == mask.rows && weights.cols == mask.cols, ErrorKind::Shape,
          "mask shape does not match weights");
  Matrix out(weights.rows, weights.cols);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    out.data[k] = mask.keep[k] ? weights.data[k] : 0.0;
  }
  return out;
}

std::vector<double> SparseTable::dense_row(std::size_t i) const {
  std::vector<double> out(cols, 0.0);
  for (std::uint64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) out[col_idx[k]] = values[k];
  return out;
}

void SparseTable::validate() const {
  require(!row_ptr.empty() && row_ptr.front() == 0, ErrorKind::Format,
          "row_ptr must start at 0");
  require(row_ptr.back() == values.size() && col_idx.size() == values.size(), ErrorKind::Format,
          "row_ptr end does not match value count");
  for (std::size_t i = 0; i + 1 < row_ptr.size(); ++i) {
    if (row_ptr[i] > row_ptr[i + 1]) fail(ErrorKind::Format, "row_ptr decreases at row " + std::to_string(i));
    for (std::uint64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      if (col_idx[k] >= cols) fail(ErrorKind::Format, "column index out of range in row " + std::to_string(i));
      if (k > row_ptr[i] && col_idx[k - 1] >= col_idx[k]) {
        fail(ErrorKind::Format, "column indices not strictly increasing in row " + std::to_string(i));
      }
    }
  }
}

SparseTable to_sparse(const Matrix& weights, const PruneMask& mask) {
  require(weights.rows == mask.rows && weights.cols == mask.cols, ErrorKind::Shape,
          "mask shape does not match weights");
  SparseTable t;
  t.cols = weights.cols;
  t.row_ptr.reserve(weights.rows + 1);
  t.row_ptr.push_back(0);
  for (std::size_t i = 0; i < weights.rows; ++i) {
    for (std::size_t j = 0; j < weights.cols; ++j) {
      if (mask.at(i, j)) {
        t.col_idx.push_back(static_cast<std::uint32_t>(j));
        t.values.push_back(weights(i, j));
      }
    }
    t.row_ptr.push_back(t.values.size());
  }
  return t;
}

Matrix from_sparse(const SparseTable& table) {
  table.validate();
  Matrix out(table.rows(), table.cols);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::uint64_t k = table.row_ptr[i]; k < table.row_ptr[i + 1]; ++k) {
      out(i, table.col_idx[k]) = table.values[k];
    }
  }
  return out;
}

void write_sparse(const std::filesystem::path& path, const SparseTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Input, "cannot write " + path.string());
  binio::put_magic(out, "PEPC");
  binio::put_u32(out, kSparseVersion);
  binio::put_u64(out, table.rows());
  binio::put_u64(out, table.cols);
  binio::put_u64(out, table.nonzeros());
  for (auto v : table.row_ptr) binio::put_u64(out, v);
  for (auto v : table.col_idx) binio::put_u32(out, v);
  binio::put_f64s(out, table.values);
}

SparseTable read_sparse(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Input, "cannot open " + path.string());
  binio::Reader r(in, path.string());
  r.expect_magic("PEPC");
  require(r.u32() == kSparseVersion, ErrorKind::Format, path.string() + ": unsupported version");
  const std::uint64_t rows = r.length(1ULL << 32);
  SparseTable t;
  t.cols = r.length(1ULL << 32);
  const std::uint64_t nnz = r.length(rows * t.cols);
  t.row_ptr.resize(rows + 1);
  for (auto& v : t.row_ptr) v = r.u64();
  t.col_idx.resize(nnz);
  for (auto& v : t.col_idx) v = r.u32();
  t.values.resize(nnz);
  r.f64s(t.values);
  t.validate();
  return t;
}

std::vector<std::size_t> effective_dims(const PruneMask& mask) {
  std::vector<std::size_t> dims(mask.rows, 0);
  for (std::size_t i = 0; i < mask.rows; ++i) {
    for (std::uint8_t b : mask.row(i)) dims[i] += b;
  }
  return dims;
}

std::vector<GroupSparsity> sparsity_by_group(const PruneMask& mask,
                                             std::span<const std::size_t> group_of,
                                             std::size_t group_count) {
  require(group_of.size() == mask.rows, ErrorKind::Input,
          "group assignment must cover every feature exactly once");
  const auto dims = effective_dims(mask);
  const double d = mask.cols == 0 ? 1.0 : static_cast<double>(mask.cols);
  std::vector<GroupSparsity> out(group_count);
  std::vector<double> sum(group_count, 0.0), sum_sq(group_count, 0.0);
  for (std::size_t i = 0; i < mask.rows; ++i) {
    require(group_of[i] < group_count, ErrorKind::Input, "group id out of range");
    const double sp = static_cast<double>(dims[i]) / d;
    sum[group_of[i]] += sp;
    ++out[group_of[i]].size;
  }
  for (std::size_t g = 0; g < group_count; ++g) {
    if (out[g].size > 0) out[g].mean = sum[g] / static_cast<double>(out[g].size);
  }
  for (std::size_t i = 0; i < mask.rows; ++i) {
    const double dev = static_cast<double>(dims[i]) / d - out[group_of[i]].mean;
    sum_sq[group_of[i]] += dev * dev;
  }
  for (std::size_t g = 0; g < group_count; ++g) {
    if (out[g].size > 0) out[g].variance = sum_sq[g] / static_cast<double>(out[g].size);
  }
  return out;
}

std::vector<GroupSparsity> sparsity_by_group(const PruneMask& mask,
                                             const std::vector<std::vector<std::size_t>>& groups) {
  constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  std::vector<std::size_t> group_of(mask.rows, kUnassigned);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i : groups[g]) {
      require(i < mask.rows, ErrorKind::Input, "group member out of range");
      require(group_of[i] == kUnassigned, ErrorKind::Input,
              "feature " + std::to_string(i) + " appears in more than one group");
      group_of[i] = g;
    }
  }
  for (std::size_t i = 0; i < mask.rows; ++i) {
    require(group_of[i] != kUnassigned, ErrorKind::Input,
            "feature " + std::to_string(i) + " is in no group");
  }
  return sparsity_by_group(mask, group_of, groups.size());
}

std::vector<std::size_t> frequency_groups(std::span<const std::uint64_t> frequencies,
                                          std::size_t group_count) {
  require(group_count > 0, ErrorKind::Input, "group count must be positive");
  const std::size_t n = frequencies.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frequencies[a] < frequencies[b]; });
  std::vector<std::size_t> group_of(n, 0);
  for (std::size_t rank = 0; rank < n; ++rank) {
    group_of[order[rank]] = rank * group_count / std::max<std::size_t>(n, 1);
  }
  return group_of;
}

}  // namespace pep
