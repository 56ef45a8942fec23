#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flowcast/augment.hpp"
#include "flowcast/autodiff.hpp"
#include "flowcast/core.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast {

/// Symmetric normalization with self-loops: D^{-1/2} (A + I) D^{-1/2}.
Tensor normalized_adjacency(const Tensor& a);

/// One propagation step: normalized_adjacency(a) @ h @ w. The row of an
/// isolated node reduces to its own linearly transformed features.
Tensor graph_propagate(const Tensor& h, const Tensor& a, const Tensor& w);

/// Per-feature z-score statistics from the training split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stdev;  // floored at 1e-12 -> 1.0
};
NormStats compute_norm_stats(const FlowSeries& train);

struct Hyperparams {
  int64_t hidden = 24;
  int64_t conv_kernel = 3;   // stconv temporal kernel
  double dropout = 0.0;      // on the penultimate representation, train only
  std::string proj_activation = "tanh";
};

struct ForwardMeta {
  int64_t anchor_hour = -1;  // first predicted hour; used by historical_average
  int64_t aux_count = 0;     // trailing rows of x that are auxiliary features
};

/// Common forecaster surface: raw counts in, raw counts out, same node count
/// out as in. Graph architectures are shape-polymorphic in the node count.
class Forecaster {
public:
  virtual ~Forecaster() = default;
  virtual std::string id() const = 0;
  virtual Tensor forward(const Tensor& x, const Tensor& a, const ForwardMeta& meta) = 0;
  virtual std::string checkpoint_json() const = 0;
  void save(const std::string& path) const;
};

std::unique_ptr<Forecaster> load_forecaster(const std::string& path);
std::unique_ptr<Forecaster> forecaster_from_json(const std::string& json_text);

/// Naive reference: every horizon repeats the last observed hour.
class PersistenceModel final : public Forecaster {
public:
  explicit PersistenceModel(int64_t t2 = 1) : t2_(t2) {}
  std::string id() const override { return "persistence"; }
  Tensor forward(const Tensor& x, const Tensor& a, const ForwardMeta& meta) override;
  std::string checkpoint_json() const override;

private:
  int64_t t2_;
};

/// Naive reference: per (node, feature, hour-of-week) mean of the training
/// split. Requires the anchor hour at prediction time.
class HistoricalAverageModel final : public Forecaster {
public:
  HistoricalAverageModel(const FlowSeries& train, int64_t t2);
  explicit HistoricalAverageModel(Tensor table, int64_t t2) : table_(std::move(table)), t2_(t2) {}
  std::string id() const override { return "historical_average"; }
  Tensor forward(const Tensor& x, const Tensor& a, const ForwardMeta& meta) override;
  std::string checkpoint_json() const override;

private:
  Tensor table_;  // [n x d x 168]
  int64_t t2_;
};

struct NamedParam {
  std::string name;
  Tensor value;
};

/// Batched input for the tape forward. frames hold NORMALIZED original-node
/// features; auxiliary features are produced in-tape from the context
/// vectors so the projection stacks receive gradients.
struct GraphBatch {
  int64_t batch = 0;
  int64_t n_base = 0;  // rows per sample in frames (n, or n+k when features are pre-augmented)
  std::vector<Tensor> frames;  // t1 tensors [(batch*n_base) x d]
  Tensor targets_raw;          // [(batch*keep) x (d*t2)]; empty when unused
  Tensor ctx_city;             // [batch x d_ctx_city] or empty
  Tensor ctx_node;             // [batch x d_ctx_node] or empty
};

struct TapeRun {
  ad::Var pred_raw;             // [(batch*keep) x (d*t2)]
  std::vector<ad::Var> params;  // leaf vars, order matches param_tensors()
};

/// Recurrent (gcrnn) and temporal-convolution (stconv) graph forecasters.
/// gcrnn: a GRU whose gate inputs pass through graph propagation, with a
/// linear readout over the final hidden state. stconv: temporal conv ->
/// graph propagation -> temporal conv, linear readout.
class GraphModel final : public Forecaster {
public:
  GraphModel(std::string arch, int64_t d, int64_t t1, int64_t t2, Hyperparams hp, uint64_t seed);

  std::string id() const override { return arch_; }
  int64_t t1() const { return t1_; }
  int64_t t2() const { return t2_; }
  int64_t d() const { return d_; }
  const Hyperparams& hyper() const { return hp_; }

  /// Adds a jointly trained projection stack; order of attachment fixes the
  /// aux-node order (call city before node).
  void attach_projection(AuxScope scope, int64_t d_ctx, uint64_t seed);
  bool has_projection(AuxScope scope) const;
  ProjectionStack projection(AuxScope scope) const;  // copy of the live parameters
  std::vector<AuxScope> aux_scopes() const;

  void set_norm_stats(NormStats ns) { norm_ = std::move(ns); }
  const NormStats& norm_stats() const { return norm_; }

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }

  /// Builds the tape over a batch. ahat must be the normalized adjacency of
  /// the augmented graph whose node count equals n_base + attached stacks
  /// (or n_base when ctx tensors are empty). keep = original node count kept
  /// for the loss; with_grad controls leaf flags. dropout_rng enables
  /// training-mode dropout.
  TapeRun run_tape(const GraphBatch& b, const Tensor& ahat, int64_t keep, bool with_grad,
                   std::mt19937_64* dropout_rng = nullptr);

  /// Single-sample spec-contract forward: x may already carry aux feature
  /// rows (meta.aux_count of them, unnormalized).
  Tensor forward(const Tensor& x, const Tensor& a, const ForwardMeta& meta) override;

  std::string checkpoint_json() const override;

private:
  void init_params(uint64_t seed);
  std::vector<ad::Var> arch_forward(const std::vector<ad::Var>& frames, const Tensor& ahat,
                                    int64_t batch, const std::vector<ad::Var>& pvars,
                                    std::mt19937_64* dropout_rng);

  std::string arch_;
  int64_t d_, t1_, t2_;
  Hyperparams hp_;
  uint64_t seed_;
  NormStats norm_;
  std::vector<NamedParam> params_;  // arch params, then city stack, then node stack
  int64_t arch_param_count_ = 0;
  bool has_city_ = false, has_node_ = false;
  int64_t city_ctx_dim_ = 0, node_ctx_dim_ = 0;
};

std::unique_ptr<Forecaster> make_forecaster(const std::string& arch, int64_t d, int64_t t1,
                                            int64_t t2, const Hyperparams& hp, uint64_t seed,
                                            const FlowSeries* train_split);

}  // namespace flowcast
