#include "flowcast/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "flowcast/rng.hpp"

namespace flowcast {

kern::Unary parse_activation(const std::string& name) {
  if (name == "tanh") return kern::Unary::tanh_;
  if (name == "relu") return kern::Unary::relu_;
  if (name == "identity") return kern::Unary::identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

ProjectionStack ProjectionStack::make(int64_t d, int64_t t1, int64_t d_ctx, kern::Unary act,
                                      uint64_t seed) {
  if (d < 1 || t1 < 1 || d_ctx < 1) throw std::invalid_argument("ProjectionStack: bad dims");
  ProjectionStack s;
  s.d = d;
  s.t1 = t1;
  s.d_ctx = d_ctx;
  s.act = act;
  std::mt19937_64 g(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(d + d_ctx));
  for (int64_t i = 0; i < t1; ++i) {
    Tensor w({d, d_ctx});
    for (int64_t k = 0; k < w.numel(); ++k) w(k) = uniform_range(g, -limit, limit);
    s.weights.push_back(std::move(w));
    s.biases.emplace_back(Tensor({d}));
  }
  return s;
}

void ProjectionStack::validate() const {
  if (static_cast<int64_t>(weights.size()) != t1 || static_cast<int64_t>(biases.size()) != t1)
    throw std::invalid_argument("ProjectionStack: expected exactly t1 layers");
  for (int64_t i = 0; i < t1; ++i) {
    const Tensor& w = weights[static_cast<size_t>(i)];
    const Tensor& b = biases[static_cast<size_t>(i)];
    if (w.rank() != 2 || w.dim(0) != d || w.dim(1) != d_ctx || b.numel() != d)
      throw std::invalid_argument("ProjectionStack: layer shape mismatch");
    if (!w.all_finite() || !b.all_finite())
      throw std::invalid_argument("ProjectionStack: non-finite parameters");
  }
}

Tensor project_context(const std::vector<double>& c, const ProjectionStack& stack) {
  stack.validate();
  if (static_cast<int64_t>(c.size()) != stack.d_ctx)
    throw std::invalid_argument("project_context: context dimension mismatch (" +
                                std::to_string(c.size()) + " vs " + std::to_string(stack.d_ctx) +
                                ")");
  Tensor block({stack.d, stack.t1});
  Tensor pre({stack.d});
  Tensor post({stack.d});
  for (int64_t i = 0; i < stack.t1; ++i) {
    const Tensor& w = stack.weights[static_cast<size_t>(i)];
    const Tensor& b = stack.biases[static_cast<size_t>(i)];
    for (int64_t r = 0; r < stack.d; ++r) {
      double s = b(r);
      for (int64_t j = 0; j < stack.d_ctx; ++j) s += w(r, j) * c[static_cast<size_t>(j)];
      pre(r) = s;
    }
    kern::map_unary(stack.act, pre.data(), post.data(), stack.d);
    for (int64_t r = 0; r < stack.d; ++r) block(r, i) = post(r);
  }
  return block;
}

std::vector<ad::Var> project_context_batch(const ad::Var& c_batch,
                                           const std::vector<ad::Var>& weight_vars,
                                           const std::vector<ad::Var>& bias_vars,
                                           kern::Unary act) {
  if (weight_vars.size() != bias_vars.size())
    throw std::invalid_argument("project_context_batch: layer count mismatch");
  std::vector<ad::Var> cols;
  cols.reserve(weight_vars.size());
  for (size_t i = 0; i < weight_vars.size(); ++i) {
    // c [B x d_ctx] @ W_i^T [d_ctx x d] + b_i
    auto lin = ad::bias_add(ad::matmul_nt(c_batch, weight_vars[i]), bias_vars[i]);
    cols.push_back(ad::activation(lin, act));
  }
  return cols;
}

void AuxNodeSpec::validate(int64_t n) const {
  if (scope == AuxScope::node && (target_grid < 0 || target_grid >= n))
    throw std::invalid_argument("AuxNodeSpec: invalid target_grid " +
                                std::to_string(target_grid));
}

Tensor augment_features(const Tensor& x, const std::vector<Tensor>& blocks) {
  if (x.rank() != 3) throw std::invalid_argument("augment_features: x must be [n x d x t1]");
  const int64_t n = x.dim(0), d = x.dim(1), t1 = x.dim(2);
  const int64_t k = static_cast<int64_t>(blocks.size());
  for (const Tensor& b : blocks)
    if (b.rank() != 2 || b.dim(0) != d || b.dim(1) != t1)
      throw std::invalid_argument("augment_features: block shape mismatch, want [d x t1]");
  Tensor out({n + k, d, t1});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t f = 0; f < d; ++f)
      for (int64_t t = 0; t < t1; ++t) out(i, f, t) = x(i, f, t);
  for (int64_t j = 0; j < k; ++j)
    for (int64_t f = 0; f < d; ++f)
      for (int64_t t = 0; t < t1; ++t) out(n + j, f, t) = blocks[static_cast<size_t>(j)](f, t);
  return out;
}

AugmentedSample make_augmented_sample(const Tensor& x, const Tensor& y, const Tensor& a,
                                      const std::vector<AuxNodeSpec>& specs,
                                      const std::vector<Tensor>& blocks) {
  if (specs.size() != blocks.size())
    throw std::invalid_argument("make_augmented_sample: one block per aux spec required");
  if (y.rank() != 3 || y.dim(0) != x.dim(0))
    throw std::invalid_argument("make_augmented_sample: y must cover the original nodes");
  AugmentedSample s;
  s.x_e = augment_features(x, blocks);
  s.a_e = augment_adjacency(a, specs);
  s.y = y;
  for (size_t j = 0; j < specs.size(); ++j)
    s.aux_indices.push_back(x.dim(0) + static_cast<int64_t>(j));
  return s;
}

Tensor augment_adjacency(const Tensor& a, const std::vector<AuxNodeSpec>& specs) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw std::invalid_argument("augment_adjacency: a must be square");
  const int64_t n = a.dim(0);
  const int64_t k = static_cast<int64_t>(specs.size());
  for (const auto& s : specs) s.validate(n);
  Tensor out({n + k, n + k});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) out(i, j) = a(i, j);
  for (int64_t j = 0; j < k; ++j) {
    const auto& spec = specs[static_cast<size_t>(j)];
    const int64_t aux = n + j;
    if (spec.scope == AuxScope::city) {
      for (int64_t v = 0; v < n; ++v) {
        out(aux, v) = 1.0;
        out(v, aux) = 1.0;
      }
    } else {
      out(aux, spec.target_grid) = 1.0;
      out(spec.target_grid, aux) = 1.0;
    }
  }
  return out;
}

}  // namespace flowcast
