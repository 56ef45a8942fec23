#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/tensor.hpp"

namespace flowcast {

/// Hourly per-grid flow tensor. values is [n_grids x d_features x T_hours];
/// column k of the time axis covers the hour starting at start_hour + k.
/// Immutable by convention once built.
struct FlowSeries {
  Tensor values;                           // [n x d x T], counts per hour
  int64_t start_hour = 0;                  // hours since Unix epoch, UTC, hour-aligned
  std::vector<std::string> feature_names;  // size d

  int64_t n() const { return values.dim(0); }
  int64_t d() const { return values.dim(1); }
  int64_t hours() const { return values.dim(2); }
  int64_t end_hour() const { return start_hour + hours(); }  // exclusive

  // Enforces: nonnegative finite values, n,d,T >= 1, feature_names size d.
  void validate() const;
};

/// Regular lat/lng grid with a symmetric 0/1 adjacency over its cells.
/// grid_origin is the south-west corner; cells are indexed row-major with
/// row 0 at the southern edge.
struct GraphSpec {
  Tensor adjacency;  // [n x n], 0/1, symmetric, zero diagonal
  double origin_lat = 0.0;
  double origin_lng = 0.0;
  double cell_size_m = 1000.0;
  int64_t n_rows = 1;
  int64_t n_cols = 1;
  std::string scheme = "rook4";  // adjacency construction rule

  int64_t n() const { return n_rows * n_cols; }
  void validate() const;
};

struct WindowSpec {
  int64_t t1 = 6;      // history hours
  int64_t t2 = 1;      // horizon hours
  int64_t stride = 1;  // hours between consecutive samples

  void validate() const;
};

/// One training/evaluation window. x and y are contiguous slices of the
/// owning FlowSeries with y immediately after x; anchor_hour is the first
/// predicted hour.
struct Sample {
  Tensor x;  // [n x d x t1]
  Tensor y;  // [n x d x t2]
  int64_t anchor_hour = 0;
};

std::vector<Sample> make_windows(const FlowSeries& series, const WindowSpec& spec);

/// Mean absolute error over every (node, feature, horizon) entry. If
/// node_mask is given, only the listed node rows contribute. Tensors must
/// have identical shape with axis 0 = node.
double mae(const Tensor& y_true, const Tensor& y_pred,
           const std::vector<int64_t>* node_mask = nullptr);
double rmse(const Tensor& y_true, const Tensor& y_pred,
            const std::vector<int64_t>* node_mask = nullptr);

/// Streaming metric accumulator used by evaluation loops; sums are taken in
/// deterministic sample order.
struct MetricAccumulator {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  int64_t count = 0;

  void add(const Tensor& y_true, const Tensor& y_pred, const std::vector<int64_t>* node_mask);
  double mae() const;
  double rmse() const;
};

// FlowSeries directory format: values.f64 (little-endian float64 in
// [n][d][T] order) + meta.json sidecar. Round-trips are bit exact.
void save_flow_series(const std::string& dir, const FlowSeries& fs, const GraphSpec& grid);
void load_flow_series(const std::string& dir, FlowSeries& fs, GraphSpec& grid);

}  // namespace flowcast
