#include "flowcast/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace flowcast::ad {

namespace {

std::atomic<uint64_t> g_order{0};

Var make_node(Tensor val, std::vector<Var> parents) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  n->order = ++g_order;
  for (const auto& p : n->parents)
    if (p->needs_grad) {
      n->needs_grad = true;
      break;
    }
  return n;
}

inline bool wants(const Var& p) { return p->needs_grad; }

}  // namespace

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->needs_grad = false;
  n->order = ++g_order;
  return n;
}

Var leaf(Tensor v, bool needs_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->needs_grad = needs_grad;
  n->order = ++g_order;
  return n;
}

Var matmul(const Var& a, const Var& b) {
  const int64_t M = a->val.dim(0), K = a->val.dim(1), N = b->val.dim(1);
  if (b->val.dim(0) != K) throw std::invalid_argument("matmul: inner dimension mismatch");
  Tensor out({M, N});
  kern::matmul(a->val.data(), b->val.data(), out.data(), M, K, N);
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad)
    node->backfn = [M, K, N](Node& self) {
      const Var& a = self.parents[0];
      const Var& b = self.parents[1];
      if (wants(a)) kern::matmul_nt_acc(self.grad.data(), b->val.data(), a->grad.data(), M, N, K);
      if (wants(b)) kern::matmul_tn_acc(a->val.data(), self.grad.data(), b->grad.data(), K, M, N);
    };
  return node;
}

Var matmul_nt(const Var& a, const Var& b) {
  const int64_t M = a->val.dim(0), K = a->val.dim(1), N = b->val.dim(0);
  if (b->val.dim(1) != K) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Tensor out({M, N});
  kern::matmul_nt(a->val.data(), b->val.data(), out.data(), M, K, N);
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad)
    node->backfn = [M, K, N](Node& self) {
      const Var& a = self.parents[0];
      const Var& b = self.parents[1];
      if (wants(a)) {
        // dA += G @ B, G:[M x N], B:[N x K]
        Tensor tmp({M, K});
        kern::matmul(self.grad.data(), b->val.data(), tmp.data(), M, N, K);
        kern::axpy(1.0, tmp.data(), a->grad.data(), tmp.numel());
      }
      if (wants(b)) {
        // dB += G^T @ A, result [N x K]
        kern::matmul_tn_acc(self.grad.data(), a->val.data(), b->grad.data(), N, M, K);
      }
    };
  return node;
}

Var graph_mix(const Tensor& ahat, const Var& h, int64_t batch) {
  const int64_t n = ahat.dim(0);
  if (ahat.rank() != 2 || ahat.dim(1) != n) throw std::invalid_argument("graph_mix: ahat not square");
  if (h->val.dim(0) != batch * n) throw std::invalid_argument("graph_mix: row count != batch*n");
  const int64_t f = h->val.dim(1);
  Tensor out({batch * n, f});
  kern::graph_mix(ahat.data(), h->val.data(), out.data(), n, batch, f);
  auto node = make_node(std::move(out), {h});
  if (node->needs_grad) {
    Tensor mix = ahat;  // symmetric by contract, so backward reuses it
    node->backfn = [mix = std::move(mix), n, batch, f](Node& self) {
      const Var& h = self.parents[0];
      if (!wants(h)) return;
      Tensor tmp({batch * n, f});
      kern::graph_mix(mix.data(), self.grad.data(), tmp.data(), n, batch, f);
      kern::axpy(1.0, tmp.data(), h->grad.data(), tmp.numel());
    };
  }
  return node;
}

Var add(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("add: shape mismatch");
  Tensor out(a->val.shape());
  kern::add(a->val.data(), b->val.data(), out.data(), out.numel());
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad)
    node->backfn = [](Node& self) {
      for (const auto& p : self.parents)
        if (wants(p)) kern::axpy(1.0, self.grad.data(), p->grad.data(), self.grad.numel());
    };
  return node;
}

Var mul(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out(a->val.shape());
  kern::mul(a->val.data(), b->val.data(), out.data(), out.numel());
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad)
    node->backfn = [](Node& self) {
      const Var& a = self.parents[0];
      const Var& b = self.parents[1];
      const int64_t n = self.grad.numel();
      if (wants(a)) {
        Tensor tmp(self.grad.shape());
        kern::mul(self.grad.data(), b->val.data(), tmp.data(), n);
        kern::axpy(1.0, tmp.data(), a->grad.data(), n);
      }
      if (wants(b)) {
        Tensor tmp(self.grad.shape());
        kern::mul(self.grad.data(), a->val.data(), tmp.data(), n);
        kern::axpy(1.0, tmp.data(), b->grad.data(), n);
      }
    };
  return node;
}

Var mul_const(const Var& a, const Tensor& m) {
  if (!a->val.same_shape(m)) throw std::invalid_argument("mul_const: shape mismatch");
  Tensor out(a->val.shape());
  kern::mul(a->val.data(), m.data(), out.data(), out.numel());
  auto node = make_node(std::move(out), {a});
  if (node->needs_grad)
    node->backfn = [m](Node& self) {
      const Var& a = self.parents[0];
      if (!wants(a)) return;
      Tensor tmp(self.grad.shape());
      kern::mul(self.grad.data(), m.data(), tmp.data(), tmp.numel());
      kern::axpy(1.0, tmp.data(), a->grad.data(), tmp.numel());
    };
  return node;
}

Var affine(const Var& a, double k, double c) {
  Tensor out(a->val.shape());
  kern::affine(a->val.data(), k, c, out.data(), out.numel());
  auto node = make_node(std::move(out), {a});
  if (node->needs_grad)
    node->backfn = [k](Node& self) {
      const Var& a = self.parents[0];
      if (wants(a)) kern::axpy(k, self.grad.data(), a->grad.data(), self.grad.numel());
    };
  return node;
}

Var bias_add(const Var& a, const Var& bias) {
  const int64_t R = a->val.dim(0), C = a->val.dim(1);
  if (bias->val.rank() != 1 || bias->val.dim(0) != C)
    throw std::invalid_argument("bias_add: bias shape mismatch");
  Tensor out = a->val;
  kern::bias_add(out.data(), bias->val.data(), R, C);
  auto node = make_node(std::move(out), {a, bias});
  if (node->needs_grad)
    node->backfn = [R, C](Node& self) {
      const Var& a = self.parents[0];
      const Var& bias = self.parents[1];
      if (wants(a)) kern::axpy(1.0, self.grad.data(), a->grad.data(), self.grad.numel());
      if (wants(bias)) kern::bias_grad(self.grad.data(), bias->grad.data(), R, C);
    };
  return node;
}

Var colwise_affine(const Var& a, const Tensor& scale, const Tensor& shift) {
  const int64_t R = a->val.dim(0), C = a->val.dim(1);
  if (scale.numel() != C || shift.numel() != C)
    throw std::invalid_argument("colwise_affine: scale/shift size mismatch");
  Tensor out({R, C});
  for (int64_t r = 0; r < R; ++r)
    for (int64_t c = 0; c < C; ++c) out(r, c) = a->val(r, c) * scale(c) + shift(c);
  auto node = make_node(std::move(out), {a});
  if (node->needs_grad)
    node->backfn = [scale, R, C](Node& self) {
      const Var& a = self.parents[0];
      if (!wants(a)) return;
      for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c) a->grad(r, c) += self.grad(r, c) * scale(c);
    };
  return node;
}

Var activation(const Var& a, kern::Unary op) {
  Tensor out(a->val.shape());
  kern::map_unary(op, a->val.data(), out.data(), out.numel());
  auto node = make_node(std::move(out), {a});
  if (node->needs_grad)
    node->backfn = [op](Node& self) {
      const Var& a = self.parents[0];
      if (wants(a))
        kern::map_unary_grad(op, self.val.data(), self.grad.data(), a->grad.data(),
                             self.grad.numel());
    };
  return node;
}

Var concat_cols(const Var& a, const Var& b) {
  const int64_t R = a->val.dim(0), Ca = a->val.dim(1), Cb = b->val.dim(1);
  if (b->val.dim(0) != R) throw std::invalid_argument("concat_cols: row mismatch");
  Tensor out({R, Ca + Cb});
  for (int64_t r = 0; r < R; ++r) {
    for (int64_t c = 0; c < Ca; ++c) out(r, c) = a->val(r, c);
    for (int64_t c = 0; c < Cb; ++c) out(r, Ca + c) = b->val(r, c);
  }
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad)
    node->backfn = [R, Ca, Cb](Node& self) {
      const Var& a = self.parents[0];
      const Var& b = self.parents[1];
      if (wants(a))
        for (int64_t r = 0; r < R; ++r)
          for (int64_t c = 0; c < Ca; ++c) a->grad(r, c) += self.grad(r, c);
      if (wants(b))
        for (int64_t r = 0; r < R; ++r)
          for (int64_t c = 0; c < Cb; ++c) b->grad(r, c) += self.grad(r, Ca + c);
    };
  return node;
}

Var slice_cols(const Var& a, int64_t lo, int64_t hi) {
  const int64_t R = a->val.dim(0), C = a->val.dim(1);
  if (lo < 0 || hi > C || lo >= hi) throw std::invalid_argument("slice_cols: bad range");
  Tensor out({R, hi - lo});
  for (int64_t r = 0; r < R; ++r)
    for (int64_t c = lo; c < hi; ++c) out(r, c - lo) = a->val(r, c);
  auto node = make_node(std::move(out), {a});
  if (node->needs_grad)
    node->backfn = [R, lo, hi](Node& self) {
      const Var& a = self.parents[0];
      if (!wants(a)) return;
      for (int64_t r = 0; r < R; ++r)
        for (int64_t c = lo; c < hi; ++c) a->grad(r, c) += self.grad(r, c - lo);
    };
  return node;
}

Var assemble_frame(const Tensor& base, const std::vector<Var>& aux, int64_t batch, int64_t n) {
  const int64_t d = base.dim(1);
  if (base.dim(0) != batch * n) throw std::invalid_argument("assemble_frame: base row mismatch");
  const int64_t k = static_cast<int64_t>(aux.size());
  for (const auto& v : aux)
    if (v->val.dim(0) != batch || v->val.dim(1) != d)
      throw std::invalid_argument("assemble_frame: aux shape mismatch");
  const int64_t N = n + k;
  Tensor out({batch * N, d});
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t c = 0; c < d; ++c) out(b * N + i, c) = base(b * n + i, c);
    for (int64_t j = 0; j < k; ++j)
      for (int64_t c = 0; c < d; ++c) out(b * N + n + j, c) = aux[static_cast<size_t>(j)]->val(b, c);
  }
  std::vector<Var> parents(aux.begin(), aux.end());
  auto node = make_node(std::move(out), std::move(parents));
  if (node->needs_grad)
    node->backfn = [batch, n, k, d, N](Node& self) {
      for (int64_t j = 0; j < k; ++j) {
        const Var& v = self.parents[static_cast<size_t>(j)];
        if (!wants(v)) continue;
        for (int64_t b = 0; b < batch; ++b)
          for (int64_t c = 0; c < d; ++c) v->grad(b, c) += self.grad(b * N + n + j, c);
      }
    };
  return node;
}

Var stack_frames(const std::vector<Var>& frames) {
  if (frames.empty()) throw std::invalid_argument("stack_frames: no frames");
  const int64_t T = static_cast<int64_t>(frames.size());
  const int64_t R = frames[0]->val.dim(0), C = frames[0]->val.dim(1);
  for (const auto& f : frames)
    if (f->val.dim(0) != R || f->val.dim(1) != C)
      throw std::invalid_argument("stack_frames: inconsistent frame shapes");
  Tensor out({R, C * T});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t r = 0; r < R; ++r)
      for (int64_t c = 0; c < C; ++c) out(r, c * T + t) = frames[static_cast<size_t>(t)]->val(r, c);
  std::vector<Var> parents(frames.begin(), frames.end());
  auto node = make_node(std::move(out), std::move(parents));
  if (node->needs_grad)
    node->backfn = [T, R, C](Node& self) {
      for (int64_t t = 0; t < T; ++t) {
        const Var& f = self.parents[static_cast<size_t>(t)];
        if (!wants(f)) continue;
        for (int64_t r = 0; r < R; ++r)
          for (int64_t c = 0; c < C; ++c) f->grad(r, c) += self.grad(r, c * T + t);
      }
    };
  return node;
}

Var conv_time(const Var& in, const Var& w, const Var& bias, int64_t C, int64_t T, int64_t K) {
  const int64_t R = in->val.dim(0);
  if (in->val.dim(1) != C * T) throw std::invalid_argument("conv_time: input cols != C*T");
  if (w->val.numel() % (C * K) != 0) throw std::invalid_argument("conv_time: weight size");
  const int64_t O = w->val.numel() / (C * K);
  if (bias->val.numel() != O) throw std::invalid_argument("conv_time: bias size != O");
  if (T < K) throw std::invalid_argument("conv_time: T < K");
  const int64_t To = T - K + 1;
  Tensor out({R, O * To});
  kern::conv_time(in->val.data(), w->val.data(), bias->val.data(), out.data(), R, C, T, O, K);
  auto node = make_node(std::move(out), {in, w, bias});
  if (node->needs_grad)
    node->backfn = [R, C, T, O, K, To](Node& self) {
      const Var& in = self.parents[0];
      const Var& w = self.parents[1];
      const Var& bias = self.parents[2];
      if (wants(in))
        kern::conv_time_grad_in(self.grad.data(), w->val.data(), in->grad.data(), R, C, T, O, K);
      if (wants(w))
        kern::conv_time_grad_w(self.grad.data(), in->val.data(), w->grad.data(), R, C, T, O, K);
      if (wants(bias)) {
        for (int64_t o = 0; o < O; ++o) {
          double s = 0.0;
          for (int64_t r = 0; r < R; ++r)
            for (int64_t t = 0; t < To; ++t) s += self.grad(r, o * To + t);
          bias->grad(o) += s;
        }
      }
    };
  return node;
}

Var select_rows_block(const Var& a, int64_t group, int64_t keep) {
  const int64_t R = a->val.dim(0), C = a->val.dim(1);
  if (group < 1 || keep < 1 || keep > group || R % group != 0)
    throw std::invalid_argument("select_rows_block: bad group/keep");
  const int64_t blocks = R / group;
  Tensor out({blocks * keep, C});
  for (int64_t b = 0; b < blocks; ++b)
    for (int64_t i = 0; i < keep; ++i)
      for (int64_t c = 0; c < C; ++c) out(b * keep + i, c) = a->val(b * group + i, c);
  auto node = make_node(std::move(out), {a});
  if (node->needs_grad)
    node->backfn = [group, keep, blocks, C](Node& self) {
      const Var& a = self.parents[0];
      if (!wants(a)) return;
      for (int64_t b = 0; b < blocks; ++b)
        for (int64_t i = 0; i < keep; ++i)
          for (int64_t c = 0; c < C; ++c)
            a->grad(b * group + i, c) += self.grad(b * keep + i, c);
    };
  return node;
}

namespace {

Var pointwise_loss(const Var& pred, const Tensor& target, bool absolute) {
  if (!pred->val.same_shape(target)) throw std::invalid_argument("loss: shape mismatch");
  const int64_t n = pred->val.numel();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = pred->val(i) - target(i);
    s += absolute ? std::fabs(d) : d * d;
  }
  Tensor out({1});
  out(0) = s / static_cast<double>(n);
  auto node = make_node(std::move(out), {pred});
  if (node->needs_grad)
    node->backfn = [target, n, absolute](Node& self) {
      const Var& pred = self.parents[0];
      if (!wants(pred)) return;
      const double g = self.grad(0) / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) {
        const double d = pred->val(i) - target(i);
        if (absolute) {
          pred->grad(i) += d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
        } else {
          pred->grad(i) += 2.0 * d * g;
        }
      }
    };
  return node;
}

}  // namespace

Var mae_loss(const Var& pred, const Tensor& target) { return pointwise_loss(pred, target, true); }
Var mse_loss(const Var& pred, const Tensor& target) { return pointwise_loss(pred, target, false); }

void backward(const Var& loss) {
  if (loss->val.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!loss->needs_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.get()};
  seen.insert(loss.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p->needs_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->order > b->order; });

  for (Node* n : order) {
    n->grad = Tensor(n->val.shape());
  }
  loss->grad(0) = 1.0;
  for (Node* n : order)
    if (n->backfn) n->backfn(*n);
}

}  // namespace flowcast::ad
