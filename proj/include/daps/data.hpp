// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "daps/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace daps {

/// Synthetic test matrix A = U diag(xi^{1-i}) V^T with U (n x n) and V (m x n)
/// orthonormalized from uniform[-1, 1] entries.
struct SyntheticSpec {
  Index n = 0;
  Index m = 0;
  double xi = 1.1;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Vector singular_values;  ///< length n, nonincreasing, positive
  Matrix left_basis;       ///< n x n orthogonal
};

struct SyntheticProblem {
  Matrix a;
  GroundTruth truth;
  Matrix right_basis;  ///< m x n
};

/// Throws InvalidSpec when n > m, n == 0 or xi <= 1.
SyntheticProblem generate_synthetic(const SyntheticSpec& spec);

/// Per-node column counts m_1..m_d.
struct ColumnPartition {
  std::vector<Index> sizes;

  int nodes() const noexcept { return static_cast<int>(sizes.size()); }
  Index total() const noexcept;
  Index offset(int node) const;
};

/// Equal split of m columns over d nodes; the remainder goes to the lowest
/// node indices, e.g. m = 10, d = 4 gives (3, 3, 2, 2).
ColumnPartition equal_partition(Index m, int d);

/// Checks sum m_i = m, m_i >= 1 and p < m_i. Throws InvalidPartition.
void validate_partition(const ColumnPartition& part, Index m, Index p);

/// Splits A column-wise. Block i is a fresh copy intended for node i only.
std::vector<Matrix> partition_columns(const Matrix& a, const ColumnPartition& part, Index p);
std::vector<Matrix> partition_columns(const Matrix& a, int d, Index p);

enum class MatrixFormat { kCsv, kRawBinary };

/// ".csv" -> kCsv, anything else -> kRawBinary.
MatrixFormat format_from_path(const std::filesystem::path& path);

/// CSV layout: a header line "n,m" followed by n lines of m comma-separated
/// values. Raw layout: little-endian u64 n, u64 m, then n*m little-endian
/// float64 entries in column-major order.
Matrix load_matrix(const std::filesystem::path& path, MatrixFormat format);
void save_matrix(const std::filesystem::path& path, const Matrix& a, MatrixFormat format);

}  // namespace daps
