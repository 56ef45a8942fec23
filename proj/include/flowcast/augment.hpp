#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcast/autodiff.hpp"
#include "flowcast/kernels.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast {

kern::Unary parse_activation(const std::string& name);  // tanh | relu | identity

/// t1 learned linear layers mapping a reduced context vector [d_ctx] to the
/// per-hour feature columns of an auxiliary node. Layer i contributes column
/// i of the [d x t1] node feature block as act(W_i c + b_i). Parameters are
/// trained jointly with the forecaster loss.
struct ProjectionStack {
  int64_t d = 0;       // output rows per layer (= feature count of the graph)
  int64_t t1 = 0;      // layer count (= history length)
  int64_t d_ctx = 0;   // input dimension (reduced context vector)
  kern::Unary act = kern::Unary::tanh_;
  std::vector<Tensor> weights;  // t1 tensors [d x d_ctx]
  std::vector<Tensor> biases;   // t1 tensors [d]

  static ProjectionStack make(int64_t d, int64_t t1, int64_t d_ctx, kern::Unary act,
                              uint64_t seed);
  void validate() const;
};

/// Column i = act(W_i c + b_i); output is the auxiliary node's [d x t1]
/// feature block.
Tensor project_context(const std::vector<double>& c, const ProjectionStack& stack);

/// Tape version used inside training so gradients reach W_i, b_i.
/// c_batch: [batch x d_ctx] constant; returns per-layer columns [batch x d].
std::vector<ad::Var> project_context_batch(const ad::Var& c_batch,
                                           const std::vector<ad::Var>& weight_vars,
                                           const std::vector<ad::Var>& bias_vars,
                                           kern::Unary act);

enum class AuxScope { city, node };

struct AuxNodeSpec {
  AuxScope scope = AuxScope::city;
  int64_t target_grid = -1;  // node scope only
  void validate(int64_t n) const;
};

struct AugmentedSample {
  Tensor x_e;  // [(n+k) x d x t1]
  Tensor a_e;  // [(n+k) x (n+k)]
  Tensor y;    // [n x d x t2] — original nodes only
  std::vector<int64_t> aux_indices;
};

/// Appends k node feature blocks (each [d x t1]) after the original rows.
Tensor augment_features(const Tensor& x, const std::vector<Tensor>& blocks);

/// Expands the adjacency with one row/column per aux spec. City scope links
/// to every original node; node scope adds the single symmetric edge to its
/// target grid. Aux-aux entries and the aux diagonal stay zero.
Tensor augment_adjacency(const Tensor& a, const std::vector<AuxNodeSpec>& specs);

/// Bundles one window with its expanded tensors; blocks[i] is the projected
/// feature block of specs[i]. y stays restricted to the original nodes.
AugmentedSample make_augmented_sample(const Tensor& x, const Tensor& y, const Tensor& a,
                                      const std::vector<AuxNodeSpec>& specs,
                                      const std::vector<Tensor>& blocks);

}  // namespace flowcast
