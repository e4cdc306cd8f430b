#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pep/matrix.hpp"

namespace pep {

// Binary keep-mask over the embedding table plus the frozen initial weights
// the surviving entries are reset to before retraining.
struct PruneMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> keep;  // row-major, 0/1
  Matrix initial;                  // V0
  std::size_t nonzero_count = 0;

  bool at(std::size_t i, std::size_t j) const { return keep[i * cols + j] != 0; }
  std::span<const std::uint8_t> row(std::size_t i) const { return {keep.data() + i * cols, cols}; }

  static PruneMask full(const Matrix& initial);

  friend bool operator==(const PruneMask&, const PruneMask&) = default;
};

PruneMask extract_mask(const Matrix& reparameterized, const Matrix& initial);

// Elementwise m * V.
Matrix apply_mask(const Matrix& weights, const PruneMask& mask);

// CSR layout of the surviving entries.
struct SparseTable {
  std::vector<std::uint64_t> row_ptr;
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;
  std::size_t cols = 0;

  std::size_t rows() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
  std::size_t nonzeros() const { return values.size(); }

  // Dense copy of row i.
  std::vector<double> dense_row(std::size_t i) const;

  // Throws a format error unless the CSR invariants hold.
  void validate() const;

  friend bool operator==(const SparseTable&, const SparseTable&) = default;
};

SparseTable to_sparse(const Matrix& weights, const PruneMask& mask);
Matrix from_sparse(const SparseTable& table);

// Sparse export: "PEPC", u32 version, u64 rows, u64 cols, u64 nnz, then
// row_ptr (u64), col_idx (u32), values (f64), all little-endian.
void write_sparse(const std::filesystem::path& path, const SparseTable& table);
SparseTable read_sparse(const std::filesystem::path& path);

// Surviving entries per feature row.
std::vector<std::size_t> effective_dims(const PruneMask& mask);

struct GroupSparsity {
  double mean = 0.0;
  double variance = 0.0;  // population variance
  std::size_t size = 0;
};

// Per-feature sparsity (nonzeros / d) summarized per group. `group_of[i]` is
// the group of feature i; every feature must belong to exactly one group.
std::vector<GroupSparsity> sparsity_by_group(const PruneMask& mask,
                                             std::span<const std::size_t> group_of,
                                             std::size_t group_count);

// Same, taking groups as explicit feature-index lists.
std::vector<GroupSparsity> sparsity_by_group(const PruneMask& mask,
                                             const std::vector<std::vector<std::size_t>>& groups);

// Frequency-decile style grouping: features sorted by frequency (ties by
// index) split into `group_count` near-equal groups, group 0 the rarest.
std::vector<std::size_t> frequency_groups(std::span<const std::uint64_t> frequencies,
                                          std::size_t group_count);

}  // namespace pep
