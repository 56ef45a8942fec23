#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "flowcast/autodiff.hpp"
#include "oracles.hpp"

using namespace flowcast;

namespace {

// Central-difference gradient check for an arbitrary scalar graph builder.
// builder must construct the graph from the given parameter tensors, using
// leaf() for each, and return {loss, leaves}.
using Builder =
    std::function<std::pair<ad::Var, std::vector<ad::Var>>(const std::vector<Tensor>&)>;

void check_gradients(std::vector<Tensor> params, const Builder& build, double tol = 1e-7,
                     double h = 1e-6) {
  auto [loss, leaves] = build(params);
  ad::backward(loss);
  for (size_t p = 0; p < params.size(); ++p) {
    for (int64_t i = 0; i < params[p].numel(); ++i) {
      const double saved = params[p](i);
      params[p](i) = saved + h;
      const double up = build(params).first->val(0);
      params[p](i) = saved - h;
      const double dn = build(params).first->val(0);
      params[p](i) = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double an = leaves[p]->grad(i);
      const double scale = std::max({1.0, std::fabs(fd), std::fabs(an)});
      CHECK(std::fabs(fd - an) / scale < tol);
    }
  }
}

Tensor rt(std::mt19937_64& g, std::vector<int64_t> shape) {
  return oracles::random_tensor(g, std::move(shape), -0.9, 0.9);
}

}  // namespace

TEST_CASE("matmul gradients") {
  std::mt19937_64 g(1);
  Tensor target = rt(g, {3, 4});
  check_gradients({rt(g, {3, 5}), rt(g, {5, 4})}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    auto b = ad::leaf(p[1]);
    return std::make_pair(ad::mse_loss(ad::matmul(a, b), target), std::vector<ad::Var>{a, b});
  });
}

TEST_CASE("matmul_nt gradients") {
  std::mt19937_64 g(2);
  Tensor target = rt(g, {3, 4});
  check_gradients({rt(g, {3, 5}), rt(g, {4, 5})}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    auto b = ad::leaf(p[1]);
    return std::make_pair(ad::mse_loss(ad::matmul_nt(a, b), target), std::vector<ad::Var>{a, b});
  });
}

TEST_CASE("graph_mix gradients (symmetric mixing matrix)") {
  std::mt19937_64 g(3);
  const int64_t n = 4, B = 2, f = 3;
  Tensor ahat({n, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i; j < n; ++j) {
      const double v = rt(g, {1})(0);
      ahat(i, j) = v;
      ahat(j, i) = v;
    }
  Tensor target = rt(g, {B * n, f});
  check_gradients({rt(g, {B * n, f})}, [&](const std::vector<Tensor>& p) {
    auto h = ad::leaf(p[0]);
    return std::make_pair(ad::mse_loss(ad::graph_mix(ahat, h, B), target),
                          std::vector<ad::Var>{h});
  });
}

TEST_CASE("elementwise op gradients") {
  std::mt19937_64 g(4);
  Tensor target = rt(g, {4, 3});
  check_gradients({rt(g, {4, 3}), rt(g, {4, 3})}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    auto b = ad::leaf(p[1]);
    auto expr = ad::add(ad::mul(a, b), ad::affine(a, 0.5, -0.25));
    return std::make_pair(ad::mse_loss(expr, target), std::vector<ad::Var>{a, b});
  });
}

TEST_CASE("activation gradients (tanh, sigmoid, identity)") {
  std::mt19937_64 g(5);
  Tensor target = rt(g, {3, 3});
  for (auto op : {kern::Unary::tanh_, kern::Unary::sigmoid_, kern::Unary::identity}) {
    check_gradients({rt(g, {3, 3})}, [&](const std::vector<Tensor>& p) {
      auto a = ad::leaf(p[0]);
      return std::make_pair(ad::mse_loss(ad::activation(a, op), target),
                            std::vector<ad::Var>{a});
    });
  }
}

TEST_CASE("relu gradient away from the kink") {
  std::mt19937_64 g(6);
  Tensor a = rt(g, {4, 4});
  for (int64_t i = 0; i < a.numel(); ++i)
    if (std::fabs(a(i)) < 0.05) a(i) = 0.1;  // keep clear of the nondifferentiable point
  Tensor target = rt(g, {4, 4});
  check_gradients({a}, [&](const std::vector<Tensor>& p) {
    auto v = ad::leaf(p[0]);
    return std::make_pair(ad::mse_loss(ad::activation(v, kern::Unary::relu_), target),
                          std::vector<ad::Var>{v});
  });
}

TEST_CASE("bias_add and colwise_affine gradients") {
  std::mt19937_64 g(7);
  Tensor target = rt(g, {5, 3});
  Tensor scale = rt(g, {3});
  Tensor shift = rt(g, {3});
  check_gradients({rt(g, {5, 3}), rt(g, {3})}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    auto b = ad::leaf(p[1]);
    auto expr = ad::colwise_affine(ad::bias_add(a, b), scale, shift);
    return std::make_pair(ad::mse_loss(expr, target), std::vector<ad::Var>{a, b});
  });
}

TEST_CASE("concat_cols and slice_cols gradients") {
  std::mt19937_64 g(8);
  Tensor target = rt(g, {4, 5});
  check_gradients({rt(g, {4, 2}), rt(g, {4, 4})}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    auto b = ad::leaf(p[1]);
    auto cat = ad::concat_cols(a, ad::slice_cols(b, 1, 4));
    return std::make_pair(ad::mse_loss(cat, target), std::vector<ad::Var>{a, b});
  });
}

TEST_CASE("assemble_frame and stack_frames gradients") {
  std::mt19937_64 g(9);
  const int64_t B = 2, n = 3, d = 2, T = 3;
  Tensor base = rt(g, {B * n, d});
  Tensor target = rt(g, {B * (n + 1), d * T});
  check_gradients({rt(g, {B, d}), rt(g, {B, d}), rt(g, {B, d})},
                  [&](const std::vector<Tensor>& p) {
                    std::vector<ad::Var> leaves;
                    std::vector<ad::Var> frames;
                    for (int64_t t = 0; t < T; ++t) {
                      auto aux = ad::leaf(p[static_cast<size_t>(t)]);
                      leaves.push_back(aux);
                      frames.push_back(ad::assemble_frame(base, {aux}, B, n));
                    }
                    auto stacked = ad::stack_frames(frames);
                    return std::make_pair(ad::mse_loss(stacked, target), leaves);
                  });
}

TEST_CASE("conv_time gradients for input, weights and bias") {
  std::mt19937_64 g(10);
  const int64_t R = 3, C = 2, T = 5, O = 3, K = 3;
  Tensor target = rt(g, {R, O * (T - K + 1)});
  check_gradients({rt(g, {R, C * T}), rt(g, {O * C * K}), rt(g, {O})},
                  [&](const std::vector<Tensor>& p) {
                    auto in = ad::leaf(p[0]);
                    auto w = ad::leaf(p[1]);
                    auto b = ad::leaf(p[2]);
                    auto out = ad::conv_time(in, w, b, C, T, K);
                    return std::make_pair(ad::mse_loss(out, target),
                                          std::vector<ad::Var>{in, w, b});
                  });
}

TEST_CASE("select_rows_block gradient routes only kept rows") {
  std::mt19937_64 g(11);
  const int64_t group = 4, keep = 3, blocks = 2, C = 2;
  Tensor target = rt(g, {blocks * keep, C});
  check_gradients({rt(g, {blocks * group, C})}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    return std::make_pair(ad::mse_loss(ad::select_rows_block(a, group, keep), target),
                          std::vector<ad::Var>{a});
  });
  // Rows beyond keep receive exactly zero gradient.
  auto a = ad::leaf(rt(g, {blocks * group, C}));
  auto loss = ad::mse_loss(ad::select_rows_block(a, group, keep), target);
  ad::backward(loss);
  for (int64_t b = 0; b < blocks; ++b)
    for (int64_t c = 0; c < C; ++c) CHECK(a->grad(b * group + keep, c) == 0.0);
}

TEST_CASE("mae loss gradient away from zero residuals") {
  std::mt19937_64 g(12);
  Tensor target = rt(g, {4, 3});
  Tensor pred = rt(g, {4, 3});
  for (int64_t i = 0; i < pred.numel(); ++i)
    if (std::fabs(pred(i) - target(i)) < 0.05) pred(i) = target(i) + 0.2;
  check_gradients({pred}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    return std::make_pair(ad::mae_loss(a, target), std::vector<ad::Var>{a});
  });
}

TEST_CASE("gradient accumulates over shared subexpressions") {
  // loss = mse(a*a_const_use + a, t): a used twice.
  std::mt19937_64 g(13);
  Tensor target = rt(g, {3, 3});
  check_gradients({rt(g, {3, 3})}, [&](const std::vector<Tensor>& p) {
    auto a = ad::leaf(p[0]);
    auto expr = ad::add(ad::mul(a, a), a);
    return std::make_pair(ad::mse_loss(expr, target), std::vector<ad::Var>{a});
  });
}

TEST_CASE("backward requires a scalar and constants get no gradient") {
  auto a = ad::leaf(Tensor::full({2, 2}, 1.0));
  CHECK_THROWS_AS(ad::backward(a), std::invalid_argument);
  auto c = ad::constant(Tensor::full({2, 2}, 2.0));
  auto loss = ad::mse_loss(ad::mul(a, c), Tensor({2, 2}));
  ad::backward(loss);
  CHECK(c->grad.numel() == 0);
  CHECK(a->grad.numel() == 4);
}
