#pragma once

// Reference implementations used as independent oracles. Deliberately naive:
// plain loops, double accumulation, no shared code with the engine.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "statenet/rng.hpp"
#include "statenet/tensor.hpp"

namespace oracle {

using statenet::BasicTensor;
using statenet::Shape;

template <typename T>
BasicTensor<T> naive_matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  BasicTensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += double(a[i * k + p]) * double(b[p * n + j]);
      c[i * n + j] = static_cast<T>(s);
    }
  return c;
}

// 3x3, stride 1, zero padding 1.
template <typename T>
BasicTensor<T> direct_conv(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), f = w.dim(0);
  BasicTensor<T> y({n, f, h, wd});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double acc = b[o];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t ki = 0; ki < 3; ++ki)
              for (std::size_t kj = 0; kj < 3; ++kj) {
                const long yi = long(i) + long(ki) - 1, xj = long(j) + long(kj) - 1;
                if (yi < 0 || xj < 0 || yi >= long(h) || xj >= long(wd)) continue;
                acc += double(x.at(s, ch, std::size_t(yi), std::size_t(xj))) *
                       double(w.at(o, ch, ki, kj));
              }
          y.at(s, o, i, j) = static_cast<T>(acc);
        }
  return y;
}

template <typename T>
BasicTensor<T> random_tensor(const Shape& shape, statenet::Rng& rng, double scale = 1.0) {
  BasicTensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

// Central differences of a scalar function with respect to every entry of x.
inline statenet::TensorD numeric_grad(const std::function<double()>& f, statenet::TensorD& x,
                                      double h = 1e-5) {
  statenet::TensorD g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / (||a|| + ||b||), 0 when both vanish.
template <typename T>
double relative_error(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

template <typename T>
double weighted_sum(const BasicTensor<T>& y, const BasicTensor<T>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += double(y[i]) * double(r[i]);
  return s;
}

// Values spaced at least `gap` apart in random order, so max-pool windows
// have no near-ties and relu inputs stay away from zero.
inline statenet::TensorD separated_tensor(const Shape& shape, statenet::Rng& rng, double gap = 0.05) {
  statenet::TensorD t(shape);
  std::vector<double> values(t.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = (double(i) - double(values.size()) / 2.0 + 0.5) * gap;
  std::shuffle(values.begin(), values.end(), rng);
  for (std::size_t i = 0; i < values.size(); ++i) t[i] = values[i];
  return t;
}

}  // namespace oracle
