#include <cmath>
#include <random>

#include "doctest.h"
#include "flowcast/augment.hpp"
#include "oracles.hpp"

using namespace flowcast;

TEST_CASE("project_context: all-zero parameters with tanh give a zero block") {
  ProjectionStack s = ProjectionStack::make(3, 4, 5, kern::Unary::tanh_, 9);
  for (auto& w : s.weights) w.fill(0.0);
  for (auto& b : s.biases) b.fill(0.0);
  Tensor block = project_context({1.0, -2.0, 0.5, 0.0, 3.0}, s);
  REQUIRE(block.shape() == std::vector<int64_t>{3, 4});
  for (int64_t i = 0; i < block.numel(); ++i) CHECK(block(i) == 0.0);
}

TEST_CASE("project_context: d=1, t1=2 hand case -> [[6, -3]]") {
  ProjectionStack s;
  s.d = 1;
  s.t1 = 2;
  s.d_ctx = 1;
  s.act = kern::Unary::identity;
  s.weights = {Tensor::from({1, 1}, {2.0}), Tensor::from({1, 1}, {-1.0})};
  s.biases = {Tensor({1}), Tensor({1})};
  Tensor block = project_context({3.0}, s);
  CHECK(block(0, 0) == 6.0);
  CHECK(block(0, 1) == -3.0);
}

TEST_CASE("project_context matches a scalar loop oracle on random stacks") {
  std::mt19937_64 g(41);
  for (int rep = 0; rep < 20; ++rep) {
    const int64_t d = 1 + static_cast<int64_t>(g() % 4);
    const int64_t t1 = 1 + static_cast<int64_t>(g() % 6);
    const int64_t dc = 1 + static_cast<int64_t>(g() % 7);
    ProjectionStack s = ProjectionStack::make(d, t1, dc, kern::Unary::tanh_, g());
    for (auto& w : s.weights) w = oracles::random_tensor(g, {d, dc});
    for (auto& b : s.biases) b = oracles::random_tensor(g, {d});
    std::vector<double> c(static_cast<size_t>(dc));
    for (auto& v : c) v = oracles::random_tensor(g, {1})(0);
    Tensor block = project_context(c, s);
    for (int64_t i = 0; i < t1; ++i)
      for (int64_t r = 0; r < d; ++r) {
        double pre = s.biases[static_cast<size_t>(i)](r);
        for (int64_t j = 0; j < dc; ++j)
          pre += s.weights[static_cast<size_t>(i)](r, j) * c[static_cast<size_t>(j)];
        CHECK(std::fabs(block(r, i) - std::tanh(pre)) < 1e-12);
      }
  }
}

TEST_CASE("tape projection equals the pure operation") {
  std::mt19937_64 g(43);
  const int64_t d = 2, t1 = 3, dc = 4, B = 5;
  ProjectionStack s = ProjectionStack::make(d, t1, dc, kern::Unary::tanh_, 7);
  Tensor cb = oracles::random_tensor(g, {B, dc});
  std::vector<ad::Var> ws, bs;
  for (int64_t i = 0; i < t1; ++i) {
    ws.push_back(ad::leaf(s.weights[static_cast<size_t>(i)], false));
    bs.push_back(ad::leaf(s.biases[static_cast<size_t>(i)], false));
  }
  auto cols = project_context_batch(ad::constant(cb), ws, bs, s.act);
  REQUIRE(cols.size() == static_cast<size_t>(t1));
  for (int64_t b = 0; b < B; ++b) {
    std::vector<double> c(static_cast<size_t>(dc));
    for (int64_t j = 0; j < dc; ++j) c[static_cast<size_t>(j)] = cb(b, j);
    Tensor block = project_context(c, s);
    for (int64_t i = 0; i < t1; ++i)
      for (int64_t r = 0; r < d; ++r)
        CHECK(std::fabs(cols[static_cast<size_t>(i)]->val(b, r) - block(r, i)) < 1e-15);
  }
}

TEST_CASE("project_context validates dimensions") {
  ProjectionStack s = ProjectionStack::make(2, 3, 4, kern::Unary::tanh_, 1);
  CHECK_THROWS_AS(project_context({1.0, 2.0}, s), std::invalid_argument);
  s.weights.pop_back();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("augment_features: k=0 is the identity") {
  std::mt19937_64 g(47);
  Tensor x = oracles::random_tensor(g, {3, 2, 4});
  Tensor out = augment_features(x, {});
  REQUIRE(out.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(out(i) == x(i));
}

TEST_CASE("augment_features appends blocks after the original rows in order") {
  std::mt19937_64 g(53);
  Tensor x = oracles::random_tensor(g, {2, 2, 3});
  Tensor city = oracles::random_tensor(g, {2, 3});
  Tensor node = oracles::random_tensor(g, {2, 3});
  Tensor out = augment_features(x, {city, node});
  REQUIRE(out.shape() == std::vector<int64_t>{4, 2, 3});
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t f = 0; f < 2; ++f)
      for (int64_t t = 0; t < 3; ++t) CHECK(out(i, f, t) == x(i, f, t));
  for (int64_t f = 0; f < 2; ++f)
    for (int64_t t = 0; t < 3; ++t) {
      CHECK(out(2, f, t) == city(f, t));
      CHECK(out(3, f, t) == node(f, t));
    }
  Tensor bad = oracles::random_tensor(g, {3, 3});
  CHECK_THROWS_AS(augment_features(x, {bad}), std::invalid_argument);
}

TEST_CASE("make_augmented_sample: city+node bundle keeps originals and indexes aux last") {
  std::mt19937_64 g(71);
  const int64_t n = 3, d = 2, t1 = 4;
  Tensor x = oracles::random_tensor(g, {n, d, t1});
  Tensor y = oracles::random_tensor(g, {n, d, 1});
  Tensor a = oracles::random_adjacency(g, n);
  std::vector<AuxNodeSpec> specs{{AuxScope::city, -1}, {AuxScope::node, 2}};
  std::vector<Tensor> blocks{oracles::random_tensor(g, {d, t1}),
                             oracles::random_tensor(g, {d, t1})};
  AugmentedSample s = make_augmented_sample(x, y, a, specs, blocks);
  REQUIRE(s.x_e.shape() == std::vector<int64_t>{n + 2, d, t1});
  REQUIRE(s.a_e.shape() == std::vector<int64_t>{n + 2, n + 2});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t f = 0; f < d; ++f)
      for (int64_t t = 0; t < t1; ++t) CHECK(s.x_e(i, f, t) == x(i, f, t));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) CHECK(s.a_e(i, j) == a(i, j));
  CHECK(s.y.dim(0) == n);
  CHECK(s.aux_indices == std::vector<int64_t>{n, n + 1});
  CHECK_THROWS_AS(make_augmented_sample(x, y, a, specs, {blocks[0]}), std::invalid_argument);
}

TEST_CASE("augment_adjacency: one city aux over a 2-node empty graph") {
  Tensor a({2, 2});
  Tensor out = augment_adjacency(a, {{AuxScope::city, -1}});
  REQUIRE(out.shape() == std::vector<int64_t>{3, 3});
  CHECK(out(2, 0) == 1.0);
  CHECK(out(2, 1) == 1.0);
  CHECK(out(2, 2) == 0.0);
  CHECK(out(0, 2) == 1.0);
  CHECK(out(1, 2) == 1.0);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == 0.0);
}

TEST_CASE("augment_adjacency: node aux adds exactly one symmetric edge") {
  Tensor a({3, 3});
  Tensor out = augment_adjacency(a, {{AuxScope::node, 0}});
  int64_t nonzero = 0;
  for (int64_t i = 0; i < out.numel(); ++i) nonzero += out(i) != 0.0;
  CHECK(nonzero == 2);
  CHECK(out(3, 0) == 1.0);
  CHECK(out(0, 3) == 1.0);
}

TEST_CASE("augment_adjacency property check over random graphs") {
  std::mt19937_64 g(59);
  for (int rep = 0; rep < 50; ++rep) {
    const int64_t n = 2 + static_cast<int64_t>(g() % 8);
    Tensor a = oracles::random_adjacency(g, n);
    const int64_t target = static_cast<int64_t>(g() % static_cast<uint64_t>(n));
    Tensor out = augment_adjacency(a, {{AuxScope::city, -1}, {AuxScope::node, target}});
    REQUIRE(out.dim(0) == n + 2);

    // Original block bit-equal.
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) CHECK(out(i, j) == a(i, j));
    // Symmetry everywhere.
    for (int64_t i = 0; i < n + 2; ++i)
      for (int64_t j = 0; j < n + 2; ++j) CHECK(out(i, j) == out(j, i));
    // Degrees: city aux n, node aux 1; aux-aux zero; aux diagonal zero.
    double deg_city = 0.0, deg_node = 0.0;
    for (int64_t j = 0; j < n + 2; ++j) {
      deg_city += out(n, j);
      deg_node += out(n + 1, j);
    }
    CHECK(deg_city == static_cast<double>(n));
    CHECK(deg_node == 1.0);
    CHECK(out(n, n + 1) == 0.0);
    CHECK(out(n, n) == 0.0);
    CHECK(out(n + 1, n + 1) == 0.0);
  }
}

TEST_CASE("augment_adjacency: locality of node-scope augmentation") {
  std::mt19937_64 g(61);
  const int64_t n = 6, target = 2;
  Tensor a = oracles::random_adjacency(g, n);
  Tensor out = augment_adjacency(a, {{AuxScope::node, target}});
  for (int64_t i = 0; i < n; ++i) {
    if (i == target) continue;
    for (int64_t j = 0; j < n; ++j) CHECK(out(i, j) == a(i, j));
    CHECK(out(i, n) == 0.0);  // padding only
  }
}

TEST_CASE("augment_adjacency rejects invalid targets and asymmetric input") {
  Tensor a({3, 3});
  CHECK_THROWS_AS(augment_adjacency(a, {{AuxScope::node, 7}}), std::invalid_argument);
  CHECK_THROWS_AS(augment_adjacency(a, {{AuxScope::node, -1}}), std::invalid_argument);
  Tensor rect({2, 3});
  CHECK_THROWS_AS(augment_adjacency(rect, {}), std::invalid_argument);
}

TEST_CASE("symmetry preservation for arbitrary spec lists") {
  std::mt19937_64 g(67);
  Tensor a = oracles::random_adjacency(g, 5);
  std::vector<AuxNodeSpec> specs{{AuxScope::node, 1}, {AuxScope::city, -1}, {AuxScope::node, 4}};
  Tensor out = augment_adjacency(a, specs);
  for (int64_t i = 0; i < out.dim(0); ++i)
    for (int64_t j = 0; j < out.dim(0); ++j) CHECK(out(i, j) == out(j, i));
}
