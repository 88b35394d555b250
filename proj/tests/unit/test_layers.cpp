#include "doctest.h"

#include <cmath>

#include "../support/oracles.hpp"
#include "statenet/errors.hpp"
#include "statenet/layers.hpp"

using namespace statenet;
using oracle::numeric_grad;
using oracle::relative_error;
using oracle::weighted_sum;

namespace {

constexpr double kGradTol = 1e-4;

}  // namespace

TEST_CASE("conv identity kernel and oracle") {
  Conv2d<double> conv(2, 2);
  auto& p = conv.params();
  p.weights.fill(0.0);
  p.weights.at(0, 0, 1, 1) = 1.0;
  p.weights.at(1, 1, 1, 1) = 1.0;
  Rng rng(1);
  const auto x = oracle::random_tensor<double>({2, 2, 5, 5}, rng);
  CHECK(conv.forward(x) == x);

  Conv2d<double> c3(2, 3);
  c3.params().weights = oracle::random_tensor<double>({3, 2, 3, 3}, rng);
  c3.params().bias = oracle::random_tensor<double>({3}, rng);
  const auto x2 = oracle::random_tensor<double>({1, 2, 4, 4}, rng);
  const auto expect = oracle::direct_conv(x2, c3.params().weights, c3.params().bias);
  CHECK(relative_error(c3.forward(x2), expect) < 1e-12);
  CHECK(relative_error(c3.infer(x2), expect) < 1e-12);

  CHECK_THROWS_AS(c3.forward(TensorD({1, 3, 4, 4})), ShapeError);
}

TEST_CASE("conv keeps spatial size on a first-stage batch") {
  Conv2d<float> conv(3, 16);
  const auto y = conv.infer(Tensor({32, 3, 64, 64}, 0.5f));
  CHECK(y.shape() == Shape{32, 16, 64, 64});
}

TEST_CASE("conv gradients") {
  Rng rng(21);
  Conv2d<double> conv(3, 2);
  conv.params().weights = oracle::random_tensor<double>({2, 3, 3, 3}, rng);
  conv.params().bias = oracle::random_tensor<double>({2}, rng);
  auto x = oracle::random_tensor<double>({2, 3, 5, 4}, rng);
  const auto r = oracle::random_tensor<double>({2, 2, 5, 4}, rng);

  conv.params().zero_grad();
  conv.forward(x);
  const auto dx = conv.backward(r);
  auto loss = [&] { return weighted_sum(conv.infer(x), r); };
  CHECK(relative_error(dx, numeric_grad(loss, x)) < kGradTol);
  CHECK(relative_error(conv.params().grad_weights, numeric_grad(loss, conv.params().weights)) < kGradTol);
  CHECK(relative_error(conv.params().grad_bias, numeric_grad(loss, conv.params().bias)) < kGradTol);
}

TEST_CASE("maxpool forward, ties and routing") {
  MaxPool2d<float> pool;
  CHECK(pool.forward(Tensor({1, 1, 2, 2}, {1, 2, 3, 4})).values() == std::vector<float>{4});
  CHECK(pool.infer(Tensor({2, 3, 64, 64})).shape() == Shape{2, 3, 32, 32});

  // All-equal window: gradient goes to the first element only.
  MaxPool2d<float> tie;
  tie.forward(Tensor({1, 1, 2, 2}, 7.0f));
  const auto g = tie.backward(Tensor({1, 1, 1, 1}, {1.0f}));
  CHECK(g.values() == std::vector<float>{1, 0, 0, 0});

  CHECK_THROWS_AS(pool.forward(Tensor({1, 1, 3, 4})), ShapeError);
  CHECK_THROWS_AS(pool.forward(Tensor({1, 1, 0, 0})), ShapeError);
}

TEST_CASE("maxpool gradients away from ties") {
  Rng rng(22);
  MaxPool2d<double> pool;
  auto x = oracle::separated_tensor({2, 3, 6, 6}, rng);
  const auto r = oracle::random_tensor<double>({2, 3, 3, 3}, rng);
  pool.forward(x);
  const auto dx = pool.backward(r);
  auto loss = [&] { return weighted_sum(pool.infer(x), r); };
  CHECK(relative_error(dx, numeric_grad(loss, x)) < kGradTol);
}

TEST_CASE("batchnorm normalizes per channel") {
  Rng rng(23);
  BatchNorm2d<double> bn(3);
  TensorD x = oracle::random_tensor<double>({4, 3, 5, 5}, rng, 3.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 2.0;
  const auto y = bn.forward(x, Mode::Train);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) mean += y[(n * 3 + c) * 25 + i];
    mean /= 100.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) sq += std::pow(y[(n * 3 + c) * 25 + i] - mean, 2);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(sq / 100.0 - 1.0) < 1e-3);
  }

  BatchNorm2d<float> constant(1);
  const auto z = constant.forward(Tensor({2, 1, 2, 2}, 3.0f), Mode::Train);
  for (float v : z.values()) CHECK(std::abs(v) < 1e-6f);
}

TEST_CASE("batchnorm running statistics") {
  BatchNorm2d<double> bn(1);
  // Values 1..4 in one channel: mean 2.5, unbiased variance 5/3.
  bn.forward(TensorD({1, 1, 2, 2}, {1, 2, 3, 4}), Mode::Train);
  CHECK(bn.state().running_mean[0] == doctest::Approx(0.25));
  CHECK(bn.state().running_var[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));

  // Infer mode uses the running statistics and leaves them alone.
  const auto before = bn.state().running_mean;
  const auto y = bn.forward(TensorD({1, 1, 1, 2}, {0.25, 1.25}), Mode::Infer);
  const double denom = std::sqrt(bn.state().running_var[0] + 1e-5);
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(1.0 / denom));
  CHECK(bn.state().running_mean == before);
  CHECK(bn.infer(TensorD({1, 1, 1, 2}, {0.25, 1.25})) == y);

  CHECK_THROWS_AS(bn.forward(TensorD({1, 1, 1, 1}, {1.0}), Mode::Train), ShapeError);
}

TEST_CASE("batchnorm gradients") {
  Rng rng(24);
  BatchNorm2d<double> bn(3);
  bn.state().gamma = oracle::random_tensor<double>({3}, rng);
  bn.state().beta = oracle::random_tensor<double>({3}, rng);
  auto x = oracle::random_tensor<double>({4, 3, 3, 3}, rng);
  const auto r = oracle::random_tensor<double>({4, 3, 3, 3}, rng);

  bn.zero_grad();
  bn.forward(x, Mode::Train);
  const auto dx = bn.backward(r);
  const auto dgamma = bn.grad_gamma();
  const auto dbeta = bn.grad_beta();
  // Running statistics change on every call but train-mode outputs do not
  // depend on them.
  auto loss = [&] { return weighted_sum(bn.forward(x, Mode::Train), r); };
  CHECK(relative_error(dx, numeric_grad(loss, x)) < kGradTol);
  CHECK(relative_error(dgamma, numeric_grad(loss, bn.state().gamma)) < kGradTol);
  CHECK(relative_error(dbeta, numeric_grad(loss, bn.state().beta)) < kGradTol);
}

TEST_CASE("relu") {
  Relu<float> relu;
  CHECK(relu.forward(Tensor({3}, {-1, 0, 2})).values() == std::vector<float>{0, 0, 2});
  const auto g = relu.backward(Tensor({3}, {5, 5, 5}));
  CHECK(g.values() == std::vector<float>{0, 0, 5});
  Tensor pos({4}, {0.1f, 1, 2, 3});
  CHECK(Relu<float>::infer(pos) == pos);

  Rng rng(25);
  Relu<double> r2;
  auto x = oracle::separated_tensor({2, 3, 4, 4}, rng, 0.01);
  const auto w = oracle::random_tensor<double>(x.shape(), rng);
  r2.forward(x);
  const auto dx = r2.backward(w);
  auto loss = [&] { return weighted_sum(Relu<double>::infer(x), w); };
  CHECK(relative_error(dx, numeric_grad(loss, x)) < kGradTol);
}

TEST_CASE("dropout") {
  Rng rng(26);
  Tensor ones({100000}, 1.0f);

  Dropout<float> none(0.0);
  CHECK(none.forward(ones, Mode::Train, rng) == ones);
  CHECK(none.forward(ones, Mode::Infer, rng) == ones);

  Dropout<float> half(0.5);
  CHECK(half.forward(ones, Mode::Infer, rng) == ones);
  const auto y = half.forward(ones, Mode::Train, rng);
  double mean = 0.0;
  std::size_t other = 0;
  for (float v : y.values()) {
    if (v != 0.0f && v != 2.0f) ++other;
    mean += v;
  }
  CHECK(other == 0);
  mean /= static_cast<double>(y.size());
  CHECK(std::abs(mean - 1.0) < 0.02);

  CHECK_THROWS_AS(Dropout<float>(1.0), ConfigError);
  CHECK_THROWS_AS(Dropout<float>(-0.1), ConfigError);
}

TEST_CASE("dropout gradient with a fixed mask") {
  Rng data_rng(27);
  Dropout<double> drop(0.3);
  auto x = oracle::random_tensor<double>({4, 8}, data_rng);
  const auto r = oracle::random_tensor<double>({4, 8}, data_rng);
  Rng mask_rng(99);
  drop.forward(x, Mode::Train, mask_rng);
  const auto dx = drop.backward(r);
  auto loss = [&] {
    Rng same(99);
    Dropout<double> replay(0.3);
    return weighted_sum(replay.forward(x, Mode::Train, same), r);
  };
  CHECK(relative_error(dx, numeric_grad(loss, x)) < kGradTol);
}

TEST_CASE("linear") {
  Linear<float> fc(2, 2);
  fc.params().weights = Tensor({2, 2}, {1, 0, 0, 1});
  fc.params().bias.fill(0.0f);
  Tensor x({1, 2}, {1, 2});
  CHECK(fc.forward(x) == x);
  fc.params().bias = Tensor({2}, {1, 1});
  CHECK(fc.forward(x).values() == std::vector<float>{2, 3});
  CHECK_THROWS_AS(fc.forward(Tensor({1, 3})), ShapeError);

  Rng rng(28);
  Linear<double> lin(8, 3);
  lin.params().weights = oracle::random_tensor<double>({8, 3}, rng);
  lin.params().bias = oracle::random_tensor<double>({3}, rng);
  auto in = oracle::random_tensor<double>({4, 8}, rng);
  const auto r = oracle::random_tensor<double>({4, 3}, rng);
  lin.params().zero_grad();
  lin.forward(in);
  const auto dx = lin.backward(r);
  auto loss = [&] { return weighted_sum(lin.infer(in), r); };
  CHECK(relative_error(dx, numeric_grad(loss, in)) < kGradTol);
  CHECK(relative_error(lin.params().grad_weights, numeric_grad(loss, lin.params().weights)) < kGradTol);
  CHECK(relative_error(lin.params().grad_bias, numeric_grad(loss, lin.params().bias)) < kGradTol);
}

TEST_CASE("softmax cross-entropy") {
  SoftmaxCrossEntropy<float> xent;
  const std::vector<std::size_t> labels{3, 0};
  const auto uniform = xent.forward(Tensor({2, 11}), labels);
  CHECK(uniform.loss == doctest::Approx(std::log(11.0)).epsilon(1e-6));
  for (float p : uniform.probs.values()) CHECK(p == doctest::Approx(1.0 / 11.0));

  Tensor big({1, 3}, {0, 1000, 0});
  const std::vector<std::size_t> one{1};
  const auto sharp = xent.forward(big, one);
  CHECK(std::isfinite(sharp.loss));
  CHECK(sharp.loss < 1e-6);

  const std::vector<std::size_t> bad{5};
  CHECK_THROWS_AS(xent.forward(Tensor({1, 3}), bad), DataError);

  Rng rng(29);
  const auto logits = oracle::random_tensor<double>({5, 7}, rng, 30.0);
  const auto probs = softmax(logits);
  for (std::size_t n = 0; n < 5; ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < 7; ++k) s += probs[n * 7 + k];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("softmax cross-entropy gradient") {
  Rng rng(30);
  SoftmaxCrossEntropy<double> xent;
  auto logits = oracle::random_tensor<double>({4, 5}, rng);
  const std::vector<std::size_t> labels{0, 4, 2, 2};
  xent.forward(logits, labels);
  const auto grad = xent.backward();
  auto loss = [&] {
    SoftmaxCrossEntropy<double> fresh;
    return fresh.forward(logits, labels).loss;
  };
  CHECK(relative_error(grad, numeric_grad(loss, logits)) < kGradTol);
}
