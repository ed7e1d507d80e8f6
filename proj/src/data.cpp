// SPDX-License-Identifier: Apache-2.0
#include "daps/data.hpp"

#include "daps/error.hpp"
#include "daps/rng.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace daps {

static_assert(std::endian::native == std::endian::little,
              "raw-binary I/O assumes a little-endian host");

SyntheticProblem generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n <= 0 || spec.n > spec.m) {
    throw Error(ErrorCode::kInvalidSpec, "synthetic matrix needs 0 < n <= m");
  }
  if (!(spec.xi > 1.0) || !std::isfinite(spec.xi)) {
    throw Error(ErrorCode::kInvalidSpec, "decay parameter xi must exceed 1");
  }
  Rng rng(spec.seed);
  const Matrix u_raw = rng.uniform_matrix(spec.n, spec.n);
  const Matrix v_raw = rng.uniform_matrix(spec.m, spec.n);

  SyntheticProblem out;
  out.truth.left_basis = orthonormalize(u_raw).basis();
  out.right_basis = orthonormalize(v_raw).basis();
  out.truth.singular_values.resize(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    out.truth.singular_values(i) = std::pow(spec.xi, -static_cast<double>(i));
  }
  out.a = out.truth.left_basis * out.truth.singular_values.asDiagonal() *
          out.right_basis.transpose();
  require_finite(out.a, "synthetic matrix");
  return out;
}

Index ColumnPartition::total() const noexcept {
  Index s = 0;
  for (Index v : sizes) s += v;
  return s;
}

Index ColumnPartition::offset(int node) const {
  Index s = 0;
  for (int i = 0; i < node; ++i) s += sizes.at(static_cast<std::size_t>(i));
  return s;
}

ColumnPartition equal_partition(Index m, int d) {
  if (d <= 0) throw Error(ErrorCode::kInvalidPartition, "node count must be positive");
  ColumnPartition part;
  part.sizes.resize(static_cast<std::size_t>(d));
  const Index base = m / d;
  const Index extra = m % d;
  for (int i = 0; i < d; ++i) {
    part.sizes[static_cast<std::size_t>(i)] = base + (i < extra ? 1 : 0);
  }
  return part;
}

void validate_partition(const ColumnPartition& part, Index m, Index p) {
  if (part.sizes.empty()) throw Error(ErrorCode::kInvalidPartition, "no nodes");
  if (part.total() != m) {
    throw Error(ErrorCode::kInvalidPartition, "column counts do not sum to m");
  }
  for (std::size_t i = 0; i < part.sizes.size(); ++i) {
    const Index mi = part.sizes[i];
    if (mi < 1 || mi <= p) {
      throw Error(ErrorCode::kInvalidPartition,
                  "node " + std::to_string(i) + " has m_i = " + std::to_string(mi) +
                      ", need m_i > p = " + std::to_string(p));
    }
  }
}

std::vector<Matrix> partition_columns(const Matrix& a, const ColumnPartition& part, Index p) {
  validate_partition(part, a.cols(), p);
  std::vector<Matrix> blocks;
  blocks.reserve(part.sizes.size());
  Index offset = 0;
  for (Index mi : part.sizes) {
    blocks.emplace_back(a.middleCols(offset, mi));
    offset += mi;
  }
  return blocks;
}

std::vector<Matrix> partition_columns(const Matrix& a, int d, Index p) {
  return partition_columns(a, equal_partition(a.cols(), d), p);
}

MatrixFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MatrixFormat::kCsv : MatrixFormat::kRawBinary;
}

namespace {

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (in.gcount() != 8) throw Error(ErrorCode::kParseError, "truncated raw-binary header");
  std::uint64_t v = 0;
  std::memcpy(&v, buf, 8);
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::vector<double> split_numbers(const std::string& line, std::size_t line_no) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    std::string field = line.substr(pos, end - pos);
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    if (first == std::string::npos) {
      throw Error(ErrorCode::kParseError, "empty field on line " + std::to_string(line_no));
    }
    field = field.substr(first, last - first + 1);
    double v = 0.0;
    const char* begin = field.data();
    const char* stop = field.data() + field.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, stop, v);
    if (ec != std::errc() || ptr != stop) {
      throw Error(ErrorCode::kParseError,
                  "bad number '" + field + "' on line " + std::to_string(line_no));
    }
    values.push_back(v);
    pos = end + 1;
  }
  return values;
}

Matrix load_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "missing CSV header");
  const auto header = split_numbers(line, 1);
  if (header.size() != 2 || header[0] < 0 || header[1] < 0 ||
      header[0] != std::floor(header[0]) || header[1] != std::floor(header[1])) {
    throw Error(ErrorCode::kParseError, "CSV header must be 'n,m'");
  }
  const auto n = static_cast<Index>(header[0]);
  const auto m = static_cast<Index>(header[1]);
  Matrix a(n, m);
  Index row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto values = split_numbers(line, line_no);
    if (row >= n || static_cast<Index>(values.size()) != m) {
      throw Error(ErrorCode::kDimensionHeaderMismatch,
                  "line " + std::to_string(line_no) + " disagrees with header " +
                      std::to_string(n) + "x" + std::to_string(m));
    }
    for (Index j = 0; j < m; ++j) a(row, j) = values[static_cast<std::size_t>(j)];
    ++row;
  }
  if (row != n) {
    throw Error(ErrorCode::kDimensionHeaderMismatch,
                "expected " + std::to_string(n) + " rows, found " + std::to_string(row));
  }
  return a;
}

Matrix load_raw(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  const std::uint64_t m = read_u64(in);
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  if (n > kLimit || m > kLimit || (n != 0 && m > kLimit / n)) {
    throw Error(ErrorCode::kParseError, "implausible raw-binary dimensions");
  }
  Matrix a(static_cast<Index>(n), static_cast<Index>(m));
  const auto bytes = static_cast<std::streamsize>(n * m * sizeof(double));
  in.read(reinterpret_cast<char*>(a.data()), bytes);
  if (in.gcount() != bytes) throw Error(ErrorCode::kParseError, "truncated raw-binary payload");
  in.peek();
  if (!in.eof()) {
    throw Error(ErrorCode::kDimensionHeaderMismatch, "trailing bytes after raw-binary payload");
  }
  return a;
}

}  // namespace

Matrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  Matrix a = format == MatrixFormat::kCsv ? load_csv(in) : load_raw(in);
  require_finite(a, "loaded matrix");
  return a;
}

void save_matrix(const std::filesystem::path& path, const Matrix& a, MatrixFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  if (format == MatrixFormat::kRawBinary) {
    write_u64(out, static_cast<std::uint64_t>(a.rows()));
    write_u64(out, static_cast<std::uint64_t>(a.cols()));
    out.write(reinterpret_cast<const char*>(a.data()),
              static_cast<std::streamsize>(a.size() * static_cast<Index>(sizeof(double))));
  } else {
    out << a.rows() << ',' << a.cols() << '\n';
    char buf[32];
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index j = 0; j < a.cols(); ++j) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), a(i, j));
        (void)ec;
        if (j) out << ',';
        out.write(buf, ptr - buf);
      }
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace daps
