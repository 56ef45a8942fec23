#include <cstring>
#include <random>

#include "doctest.h"
#include "flowcast/kernels.hpp"
#include "flowcast/tensor.hpp"
#include "oracles.hpp"

using namespace flowcast;

namespace {

// Runs fn under both backends and requires bitwise-equal output buffers.
template <typename Fn>
void expect_backends_match(Fn&& fn, std::vector<double>& out_serial,
                           std::vector<double>& out_omp) {
  kern::set_backend(kern::Backend::serial);
  fn(out_serial.data());
  kern::set_backend(kern::Backend::openmp);
  fn(out_omp.data());
  kern::set_backend(kern::Backend::openmp);
  REQUIRE(out_serial.size() == out_omp.size());
  CHECK(std::memcmp(out_serial.data(), out_omp.data(), out_serial.size() * sizeof(double)) == 0);
}

}  // namespace

TEST_CASE("matmul matches a naive loop and both backends agree bitwise") {
  std::mt19937_64 g(7);
  for (int rep = 0; rep < 5; ++rep) {
    const int64_t M = 3 + rep * 7, K = 5 + rep, N = 4 + rep * 3;
    Tensor a = oracles::random_tensor(g, {M, K});
    Tensor b = oracles::random_tensor(g, {K, N});
    std::vector<double> s(static_cast<size_t>(M * N)), o(static_cast<size_t>(M * N));
    expect_backends_match(
        [&](double* out) { kern::matmul(a.data(), b.data(), out, M, K, N); }, s, o);
    Tensor ref = oracles::loop_matmul(a, b);
    for (int64_t i = 0; i < M * N; ++i) CHECK(s[static_cast<size_t>(i)] == doctest::Approx(ref(i)).epsilon(1e-12));
  }
}

TEST_CASE("matmul_nt / matmul_tn_acc / matmul_nt_acc agree with transposed loop products") {
  std::mt19937_64 g(13);
  const int64_t M = 6, K = 5, N = 7;
  Tensor a = oracles::random_tensor(g, {M, K});
  Tensor bt = oracles::random_tensor(g, {N, K});  // represents b^T
  std::vector<double> s(static_cast<size_t>(M * N)), o(static_cast<size_t>(M * N));
  expect_backends_match(
      [&](double* out) { kern::matmul_nt(a.data(), bt.data(), out, M, K, N); }, s, o);
  Tensor b({K, N});
  for (int64_t k = 0; k < K; ++k)
    for (int64_t j = 0; j < N; ++j) b(k, j) = bt(j, k);
  Tensor ref = oracles::loop_matmul(a, b);
  for (int64_t i = 0; i < M * N; ++i) CHECK(s[static_cast<size_t>(i)] == doctest::Approx(ref(i)).epsilon(1e-12));

  // c[M x N] += a2[K x M]^T b2[K x N]
  Tensor a2 = oracles::random_tensor(g, {K, M});
  Tensor b2 = oracles::random_tensor(g, {K, N});
  std::vector<double> s2(static_cast<size_t>(M * N), 0.5), o2(static_cast<size_t>(M * N), 0.5);
  expect_backends_match(
      [&](double* out) {
        for (int64_t i = 0; i < M * N; ++i) out[i] = 0.5;
        kern::matmul_tn_acc(a2.data(), b2.data(), out, M, K, N);
      },
      s2, o2);
  Tensor a2t({M, K});
  for (int64_t i = 0; i < M; ++i)
    for (int64_t k = 0; k < K; ++k) a2t(i, k) = a2(k, i);
  Tensor ref2 = oracles::loop_matmul(a2t, b2);
  for (int64_t i = 0; i < M * N; ++i)
    CHECK(s2[static_cast<size_t>(i)] == doctest::Approx(0.5 + ref2(i)).epsilon(1e-12));
}

TEST_CASE("graph_mix applies the mixing matrix per batch block") {
  std::mt19937_64 g(21);
  const int64_t n = 5, B = 3, f = 4;
  Tensor ahat = oracles::random_tensor(g, {n, n});
  Tensor h = oracles::random_tensor(g, {B * n, f});
  std::vector<double> s(static_cast<size_t>(B * n * f)), o(static_cast<size_t>(B * n * f));
  expect_backends_match(
      [&](double* out) { kern::graph_mix(ahat.data(), h.data(), out, n, B, f); }, s, o);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t c = 0; c < f; ++c) {
        double want = 0.0;
        for (int64_t j = 0; j < n; ++j) want += ahat(i, j) * h(b * n + j, c);
        CHECK(s[static_cast<size_t>((b * n + i) * f + c)] == doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("conv_time forward matches a scalar loop; backends agree") {
  std::mt19937_64 g(33);
  const int64_t rows = 7, C = 2, T = 6, O = 3, K = 3, To = T - K + 1;
  Tensor in = oracles::random_tensor(g, {rows, C * T});
  Tensor w = oracles::random_tensor(g, {O * C * K});
  Tensor bias = oracles::random_tensor(g, {O});
  std::vector<double> s(static_cast<size_t>(rows * O * To)), o(static_cast<size_t>(rows * O * To));
  expect_backends_match(
      [&](double* out) { kern::conv_time(in.data(), w.data(), bias.data(), out, rows, C, T, O, K); },
      s, o);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t oc = 0; oc < O; ++oc)
      for (int64_t t = 0; t < To; ++t) {
        double want = bias(oc);
        for (int64_t c = 0; c < C; ++c)
          for (int64_t k = 0; k < K; ++k) want += in(r, c * T + t + k) * w((oc * C + c) * K + k);
        CHECK(s[static_cast<size_t>(r * O * To + oc * To + t)] ==
              doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("elementwise and reduction kernels agree across backends") {
  std::mt19937_64 g(55);
  const int64_t n = 1001;
  Tensor a = oracles::random_tensor(g, {n});
  Tensor b = oracles::random_tensor(g, {n});
  for (auto op : {kern::Unary::identity, kern::Unary::tanh_, kern::Unary::sigmoid_,
                  kern::Unary::relu_}) {
    std::vector<double> s(static_cast<size_t>(n)), o(static_cast<size_t>(n));
    expect_backends_match([&](double* out) { kern::map_unary(op, a.data(), out, n); }, s, o);
  }
  {
    std::vector<double> s(static_cast<size_t>(n)), o(static_cast<size_t>(n));
    expect_backends_match([&](double* out) { kern::add(a.data(), b.data(), out, n); }, s, o);
    expect_backends_match([&](double* out) { kern::mul(a.data(), b.data(), out, n); }, s, o);
    expect_backends_match([&](double* out) { kern::affine(a.data(), 2.5, -1.0, out, n); }, s, o);
  }
  {
    const int64_t rows = 13, cols = 77;
    Tensor m = oracles::random_tensor(g, {rows, cols});
    Tensor m2 = oracles::random_tensor(g, {rows, cols});
    std::vector<double> s(static_cast<size_t>(rows)), o(static_cast<size_t>(rows));
    expect_backends_match(
        [&](double* out) { kern::rowwise_abs_diff(m.data(), m2.data(), out, rows, cols); }, s, o);
    expect_backends_match(
        [&](double* out) { kern::rowwise_sq_diff(m.data(), m2.data(), out, rows, cols); }, s, o);
    std::vector<double> sb(static_cast<size_t>(cols)), ob(static_cast<size_t>(cols));
    expect_backends_match(
        [&](double* out) {
          for (int64_t j = 0; j < cols; ++j) out[j] = 0.0;
          kern::bias_grad(m.data(), out, rows, cols);
        },
        sb, ob);
  }
}
