#include "doctest.h"

#include "../support/oracles.hpp"
#include "statenet/errors.hpp"
#include "statenet/tensor.hpp"

using namespace statenet;

TEST_CASE("reshape keeps flat order") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto r = reshape(t, {3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK(r.values() == t.values());
  CHECK(reshape(r, {2, 3}) == t);

  Tensor flat({1, 128, 1, 1}, 0.5f);
  CHECK(reshape(flat, {1, 128}).shape() == Shape{1, 128});
  CHECK_THROWS_AS(reshape(t, {4, 2}), ShapeError);
}

TEST_CASE("constructor rejects data of the wrong length") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  Tensor t({2, 2});
  CHECK_THROWS_AS(t.dim(2), ShapeError);
}

TEST_CASE("matmul hand cases") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, m) == m);

  Tensor row({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  const auto c = matmul(row, col);
  CHECK(c.shape() == Shape{1, 1});
  CHECK(c[0] == 11.0f);

  CHECK_THROWS_AS(matmul(row, row), ShapeError);
  CHECK_THROWS_AS(matmul(Tensor({2}), m), ShapeError);
}

TEST_CASE("matmul agrees with the triple-loop oracle") {
  Rng rng(7);
  const auto a = oracle::random_tensor<double>({8, 16}, rng);
  const auto b = oracle::random_tensor<double>({16, 4}, rng);
  CHECK(oracle::relative_error(matmul(a, b), oracle::naive_matmul(a, b)) < 1e-12);

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng() % 17, k = 1 + rng() % 17, n = 1 + rng() % 17;
    const auto x = oracle::random_tensor<float>({m, k}, rng);
    const auto y = oracle::random_tensor<float>({k, n}, rng);
    CHECK(oracle::relative_error(matmul(x, y), oracle::naive_matmul(x, y)) < 1e-6);
  }
}

TEST_CASE("gemm transpose flags and accumulation") {
  Rng rng(11);
  const auto a = oracle::random_tensor<double>({5, 3}, rng);  // used as A^T: [3,5]
  const auto b = oracle::random_tensor<double>({4, 5}, rng);  // used as B^T: [5,4]
  TensorD at({3, 5}), bt({5, 4});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) at[j * 5 + i] = a[i * 3 + j];
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) bt[j * 4 + i] = b[i * 5 + j];
  const auto expected = oracle::naive_matmul(at, bt);

  TensorD c({3, 4}, 1.0);
  gemm(true, true, 3, 4, 5, a.raw(), b.raw(), c.raw(), false);
  CHECK(oracle::relative_error(c, expected) < 1e-12);

  gemm(true, true, 3, 4, 5, a.raw(), b.raw(), c.raw(), true);
  TensorD twice = expected;
  for (auto& v : twice.data()) v *= 2.0;
  CHECK(oracle::relative_error(c, twice) < 1e-12);
}

TEST_CASE("im2col layout") {
  Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto cols = im2col(x);
  CHECK(cols.shape() == Shape{9, 9});
  // Centre tap of every column is the pixel itself.
  for (std::size_t p = 0; p < 9; ++p) CHECK(cols[4 * 9 + p] == x[p]);
  // Top-left tap of the top-left pixel falls in the padding.
  CHECK(cols[0] == 0.0f);
  // Bottom-right tap of the top-left pixel is pixel (1,1).
  CHECK(cols[8 * 9 + 0] == 5.0f);

  const auto zeros = im2col(Tensor({2, 3, 4, 4}));
  CHECK(zeros.shape() == Shape{27, 32});
  for (float v : zeros.values()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(im2col(Tensor({3, 4, 4})), ShapeError);
}

TEST_CASE("col2im is the adjoint of im2col") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Shape shape{1 + rng() % 3, 1 + rng() % 4, 1 + rng() % 7, 1 + rng() % 7};
    const auto x = oracle::random_tensor<double>(shape, rng);
    const auto cols = im2col(x);
    const auto g = oracle::random_tensor<double>(cols.shape(), rng);
    const double lhs = dot(cols, g);
    const double rhs = dot(x, col2im(g, shape));
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("im2col convolution matches the direct oracle") {
  Rng rng(5);
  const auto x = oracle::random_tensor<double>({1, 2, 4, 4}, rng);
  const auto w = oracle::random_tensor<double>({3, 2, 3, 3}, rng);
  const auto b = oracle::random_tensor<double>({3}, rng);
  const auto cols = im2col(x);
  const auto y = matmul(reshape(w, {3, 18}), cols);  // [F, N*H*W] with N = 1
  TensorD lowered({1, 3, 4, 4});
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t p = 0; p < 16; ++p) lowered[f * 16 + p] = y[f * 16 + p] + b[f];
  CHECK(oracle::relative_error(lowered, oracle::direct_conv(x, w, b)) < 1e-12);
}

TEST_CASE("tensor_cast and all_finite") {
  TensorD d({3}, {1.5, -2.0, 0.25});
  const auto f = tensor_cast<float>(d);
  CHECK(f.values() == std::vector<float>{1.5f, -2.0f, 0.25f});
  CHECK(f.all_finite());
  Tensor bad({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK_FALSE(bad.all_finite());
}
