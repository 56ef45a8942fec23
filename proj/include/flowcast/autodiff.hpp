#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "flowcast/kernels.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::ad {

// Reverse-mode tape over Tensor. Nodes are reference-counted; backward()
// walks the creation order, so a graph is valid for exactly one forward pass.
// Heavy lifting is delegated to the kernels layer, which keeps gradients
// bitwise deterministic for any thread count.

struct Node {
  Tensor val;
  Tensor grad;  // allocated by backward() for nodes that need it
  bool needs_grad = false;
  uint64_t order = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor v);
Var leaf(Tensor v, bool needs_grad = true);

// c = a @ b, a:[M x K], b:[K x N]
Var matmul(const Var& a, const Var& b);
// c = a @ b^T, a:[M x K], b:[N x K]
Var matmul_nt(const Var& a, const Var& b);
// out[b] = ahat @ h[b] for each batch block; h:[(batch*n) x f], ahat symmetric
Var graph_mix(const Tensor& ahat, const Var& h, int64_t batch);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);          // elementwise
Var mul_const(const Var& a, const Tensor& m); // elementwise by a constant mask
Var affine(const Var& a, double k, double c); // k*a + c
Var bias_add(const Var& a, const Var& bias);  // a:[R x C], bias:[C]
// out[r,c] = a[r,c]*scale[c] + shift[c]; scale/shift constant
Var colwise_affine(const Var& a, const Tensor& scale, const Tensor& shift);
Var activation(const Var& a, kern::Unary op);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, int64_t lo, int64_t hi);

// Batched node-axis assembly: base rows stay constant, aux rows come from
// vars. base:[(batch*n) x d]; each aux:[batch x d]; result [(batch*(n+k)) x d]
// with sample block layout [n original rows, then k aux rows].
Var assemble_frame(const Tensor& base, const std::vector<Var>& aux, int64_t batch, int64_t n);

// frames[t]:[R x C] -> [R x (C*T)] in channel-major layout col = c*T + t.
Var stack_frames(const std::vector<Var>& frames);

// in:[R x (C*T)] channel-major, w:[O*C*K], bias:[O] -> [R x (O*(T-K+1))]
Var conv_time(const Var& in, const Var& w, const Var& bias, int64_t C, int64_t T, int64_t K);

// Keeps rows with (r % group) < keep.
Var select_rows_block(const Var& a, int64_t group, int64_t keep);

// Scalar losses; value shape [1].
Var mae_loss(const Var& pred, const Tensor& target);
Var mse_loss(const Var& pred, const Tensor& target);

void backward(const Var& loss);

}  // namespace flowcast::ad
