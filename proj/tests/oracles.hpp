#pragma once

// Independent oracles used by the unit and acceptance suites. These stay
// deliberately naive (scalar loops, no shared code with the implementation
// path they check).

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "flowcast/tensor.hpp"

namespace oracles {

// Elementwise-loop MAE/RMSE over an optional node subset (axis 0 = node).
inline double loop_mae(const flowcast::Tensor& a, const flowcast::Tensor& b,
                       const std::vector<int64_t>* mask = nullptr) {
  const int64_t n = a.dim(0);
  const int64_t per = a.numel() / n;
  double s = 0.0;
  int64_t cnt = 0;
  for (int64_t i = 0; i < n; ++i) {
    bool in = !mask;
    if (mask)
      for (int64_t m : *mask)
        if (m == i) in = true;
    if (!in) continue;
    for (int64_t j = 0; j < per; ++j) {
      s += std::fabs(a.data()[i * per + j] - b.data()[i * per + j]);
      ++cnt;
    }
  }
  return s / static_cast<double>(cnt);
}

inline double loop_rmse(const flowcast::Tensor& a, const flowcast::Tensor& b,
                        const std::vector<int64_t>* mask = nullptr) {
  const int64_t n = a.dim(0);
  const int64_t per = a.numel() / n;
  double s = 0.0;
  int64_t cnt = 0;
  for (int64_t i = 0; i < n; ++i) {
    bool in = !mask;
    if (mask)
      for (int64_t m : *mask)
        if (m == i) in = true;
    if (!in) continue;
    for (int64_t j = 0; j < per; ++j) {
      const double d = a.data()[i * per + j] - b.data()[i * per + j];
      s += d * d;
      ++cnt;
    }
  }
  return std::sqrt(s / static_cast<double>(cnt));
}

// Plain triple-loop matrix product.
inline flowcast::Tensor loop_matmul(const flowcast::Tensor& a, const flowcast::Tensor& b) {
  const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  flowcast::Tensor c({M, N});
  for (int64_t i = 0; i < M; ++i)
    for (int64_t j = 0; j < N; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline flowcast::Tensor random_tensor(std::mt19937_64& g, std::vector<int64_t> shape,
                                      double lo = -1.0, double hi = 1.0) {
  flowcast::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (int64_t i = 0; i < t.numel(); ++i) t(i) = dist(g);
  return t;
}

// Random symmetric 0/1 adjacency with zero diagonal.
inline flowcast::Tensor random_adjacency(std::mt19937_64& g, int64_t n, double density = 0.4) {
  flowcast::Tensor a({n, n});
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) {
      const double v = dist(g) < density ? 1.0 : 0.0;
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

}  // namespace oracles
