// SPDX-License-Identifier: Apache-2.0
#include "daps/data.hpp"
#include "daps/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace daps;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kIoError;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "daps_data_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

}  // namespace

TEST(Synthetic, SingularValuesDecayGeometrically) {
  const auto prob = generate_synthetic({20, 50, 1.1, 3});
  ASSERT_EQ(prob.truth.singular_values.size(), 20);
  for (Index i = 0; i < 20; ++i) {
    EXPECT_DOUBLE_EQ(prob.truth.singular_values(i), std::pow(1.1, -static_cast<double>(i)));
  }
}

TEST(Synthetic, MatchesDenseSvd) {
  const auto prob = generate_synthetic({15, 40, 1.3, 4});
  Eigen::JacobiSVD<Matrix> svd(prob.a);
  EXPECT_LE((svd.singularValues() - prob.truth.singular_values).norm(), 1e-13);
  const Matrix& u = prob.truth.left_basis;
  EXPECT_LE((u.transpose() * u - Matrix::Identity(15, 15)).norm(), 1e-13);
  const Matrix& v = prob.right_basis;
  EXPECT_LE((v.transpose() * v - Matrix::Identity(15, 15)).norm(), 1e-13);
  EXPECT_LE((u * prob.truth.singular_values.asDiagonal() * v.transpose() - prob.a).norm(), 1e-13);
}

TEST(Synthetic, DeterministicInSeed) {
  EXPECT_EQ(generate_synthetic({6, 9, 1.1, 5}).a, generate_synthetic({6, 9, 1.1, 5}).a);
  EXPECT_NE(generate_synthetic({6, 9, 1.1, 5}).a, generate_synthetic({6, 9, 1.1, 6}).a);
}

TEST(Synthetic, RejectsInvalidSpecs) {
  EXPECT_EQ(code_of([] { generate_synthetic({10, 5, 1.1, 0}); }), ErrorCode::kInvalidSpec);
  EXPECT_EQ(code_of([] { generate_synthetic({5, 10, 1.0, 0}); }), ErrorCode::kInvalidSpec);
  EXPECT_EQ(code_of([] { generate_synthetic({0, 10, 1.1, 0}); }), ErrorCode::kInvalidSpec);
}

TEST(Partition, RemainderGoesToLowIndices) {
  EXPECT_EQ(equal_partition(10, 4).sizes, (std::vector<Index>{3, 3, 2, 2}));
  EXPECT_EQ(equal_partition(8, 4).sizes, (std::vector<Index>{2, 2, 2, 2}));
  EXPECT_EQ(equal_partition(10, 4).offset(2), 6);
}

TEST(Partition, BlocksReassembleTheMatrix) {
  const auto prob = generate_synthetic({5, 23, 1.2, 1});
  const auto blocks = partition_columns(prob.a, 3, 2);
  ASSERT_EQ(blocks.size(), 3u);
  Matrix joined(5, 23);
  joined << blocks[0], blocks[1], blocks[2];
  EXPECT_EQ(joined, prob.a);
}

TEST(Partition, RejectsBlocksNotWiderThanP) {
  EXPECT_EQ(code_of([] { validate_partition(equal_partition(8, 4), 8, 2); }),
            ErrorCode::kInvalidPartition);
  EXPECT_EQ(code_of([] { validate_partition({{3, 3}}, 7, 1); }), ErrorCode::kInvalidPartition);
  EXPECT_NO_THROW(validate_partition(equal_partition(12, 4), 12, 2));
}

TEST(MatrixIo, CsvAndRawRoundTripExactly) {
  const auto prob = generate_synthetic({7, 11, 1.05, 2});
  for (const auto& [name, fmt] : {std::pair{"m.csv", MatrixFormat::kCsv},
                                  std::pair{"m.bin", MatrixFormat::kRawBinary}}) {
    const fs::path p = temp_file(name);
    EXPECT_EQ(format_from_path(p), fmt);
    save_matrix(p, prob.a, fmt);
    EXPECT_EQ(load_matrix(p, fmt), prob.a) << name;
  }
}

TEST(MatrixIo, CsvErrors) {
  const fs::path p = temp_file("bad.csv");
  write(p, "2,2\n1,2\n3,x\n");
  EXPECT_EQ(code_of([&] { load_matrix(p, MatrixFormat::kCsv); }), ErrorCode::kParseError);
  write(p, "2,2\n1,2\n3,4\n5,6\n");
  EXPECT_EQ(code_of([&] { load_matrix(p, MatrixFormat::kCsv); }),
            ErrorCode::kDimensionHeaderMismatch);
  write(p, "2,3\n1,2\n3,4\n");
  EXPECT_EQ(code_of([&] { load_matrix(p, MatrixFormat::kCsv); }),
            ErrorCode::kDimensionHeaderMismatch);
}

TEST(MatrixIo, RawErrors) {
  const fs::path p = temp_file("bad.bin");
  save_matrix(p, Matrix::Ones(3, 2), MatrixFormat::kRawBinary);
  fs::resize_file(p, fs::file_size(p) - 4);
  EXPECT_EQ(code_of([&] { load_matrix(p, MatrixFormat::kRawBinary); }), ErrorCode::kParseError);
  save_matrix(p, Matrix::Ones(3, 2), MatrixFormat::kRawBinary);
  std::ofstream(p, std::ios::binary | std::ios::app) << "extra!!!";
  EXPECT_EQ(code_of([&] { load_matrix(p, MatrixFormat::kRawBinary); }),
            ErrorCode::kDimensionHeaderMismatch);
}
