#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "flowcast/context.hpp"
#include "flowcast/core.hpp"
#include "flowcast/ingest.hpp"
#include "flowcast/models.hpp"
#include "flowcast/pca.hpp"

namespace flowcast {

enum class AugMode { none, city, node, both };
std::string aug_mode_name(AugMode m);
AugMode parse_aug_mode(const std::string& s);

struct OptimizerConfig {
  double lr = 0.01;
  int64_t batch_size = 64;
  int64_t max_epochs = 25;
  int64_t patience = 5;       // early stopping on validation all-regions MAE
  std::string loss = "mae";   // or "mse"
};

struct ExperimentConfig {
  std::string model_id = "gcrnn";
  Hyperparams hyper;
  WindowSpec window;
  AugMode aug = AugMode::node;
  std::vector<AugMode> compare_variants;  // empty -> {aug}
  int64_t designated_grid = 0;
  OptimizerConfig opt;
  uint64_t seed = 42;
  int64_t embed_dim = 64;   // offline backend
  uint64_t embed_seed = 0;
  double variance_target = 0.95;
  std::string cache_dir;    // optional embedding cache directory

  std::string canonical_json() const;
  std::string config_hash() const;  // sha256 of canonical_json
};

/// Everything one experiment consumes: the series, its graph, the context
/// inputs and the chronological split.
struct DataBundle {
  FlowSeries series;
  GraphSpec grid;
  std::map<int64_t, CityDayInput> city_days;
  std::vector<EventRecord> events;
  SplitSpec split;
};

/// Per-window reduced context vectors. City vectors vary per (day, hour of
/// prediction); node vectors are per event day of the designated grid. PCA
/// models are fit on the training date range only and applied elsewhere.
class ContextProvider {
public:
  static ContextProvider build(const DataBundle& data, int64_t designated_grid,
                               EmbeddingBackend& backend, double variance_target);

  const std::vector<double>& city_vec(int64_t anchor_hour) const;
  const std::vector<double>& node_vec(int64_t anchor_hour) const;
  int64_t city_dim() const { return city_pca_.d_reduced; }
  int64_t node_dim() const { return node_pca_.d_reduced; }
  const std::set<int64_t>& event_days() const { return event_days_; }
  const PCAModel& city_pca() const { return city_pca_; }
  const PCAModel& node_pca() const { return node_pca_; }
  /// Validated source records (city per prediction hour, node per day) with
  /// their pre-reduction embeddings.
  const std::vector<ContextRecord>& records() const { return records_; }

private:
  std::map<int64_t, std::vector<double>> city_cache_;  // key = day*24 + hour
  std::map<int64_t, std::vector<double>> node_cache_;  // key = day
  std::vector<ContextRecord> records_;
  std::set<int64_t> event_days_;
  PCAModel city_pca_, node_pca_;
};

/// Lists every (scope, text) pair an experiment over this bundle embeds;
/// shared by the embed subcommand so cache warm-up is exact.
std::vector<std::pair<ContextScope, std::string>> enumerate_context_texts(
    const DataBundle& data, int64_t designated_grid);

struct EpochLog {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
};

struct TrainResult {
  std::unique_ptr<Forecaster> model;
  std::vector<EpochLog> history;
  int64_t best_epoch = -1;
};

/// Trains one model variant. ctx may be null for AugMode::none or naive
/// baselines. Deterministic given the seed. Throws on divergence.
TrainResult train(const ExperimentConfig& cfg, AugMode aug, const DataBundle& data,
                  const ContextProvider* ctx);

struct EvalRow {
  std::string model;
  std::string variant;
  double mae_all = 0.0, rmse_all = 0.0;
  double mae_grid = 0.0, rmse_grid = 0.0;
  bool has_event = false;
  double mae_event_days = 0.0, rmse_event_days = 0.0;  // designated grid, event-day windows
  bool has_nonevent = false;
  double mae_all_nonevent = 0.0, rmse_all_nonevent = 0.0;
};

/// Test-split evaluation on raw counts. Event-day metrics are masked to the
/// designated grid over windows anchored inside an event day.
EvalRow evaluate(Forecaster& model, const std::vector<Sample>& test_samples,
                 const Tensor& adjacency, int64_t designated_grid,
                 const std::set<int64_t>& event_days, const ContextProvider* ctx, AugMode aug);

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string config_hash;
  uint64_t seed = 0;
  std::string split_summary;  // provenance: the day ranges metrics were computed on
  std::map<std::string, std::vector<EpochLog>> curves;  // per variant
  std::vector<std::string> notes;

  std::string to_csv() const;
  std::string to_json(const ExperimentConfig& cfg) const;
};

/// Trains and evaluates the unaugmented model plus each configured augmented
/// variant under one seed and one set of hyperparameters.
EvalReport run_comparison(const ExperimentConfig& cfg, const DataBundle& data);

struct SynthEvent {
  int64_t day = 0;  // relative to the synthetic start day
  int64_t grid = 0;
  double multiplier = 2.5;
};

struct SynthSpec {
  int64_t n_rows = 4, n_cols = 4;
  int64_t days = 60;
  int64_t train_days = 42, val_days = 6, test_days = 12;
  std::vector<double> base_profile;  // 24 entries; default commuter shape
  std::vector<double> week_factor;   // 7 entries Mon..Sun
  std::vector<SynthEvent> events;    // default: 12 event days at one grid
  int64_t designated_grid = 5;
  double noise_level = 0.1;  // noise std as a fraction of the signal
  uint64_t seed = 1;
  int64_t start_day = 19723;  // 2024-01-01, a Monday

  static SynthSpec defaults();
  void validate() const;
};

/// Deterministic synthetic benchmark: diurnal/weekly pattern, planted event
/// days at one grid, matching city/node context streams.
DataBundle synth_generate(const SynthSpec& spec);

/// Writes the sliced series as CSV plus a deterministic SVG line chart.
void plot_flows(const FlowSeries& series, const std::vector<int64_t>& grids, int64_t day_start,
                int64_t day_end, const std::string& csv_path, const std::string& svg_path);

// Shortest round-trip decimal formatting used by every report writer.
std::string format_double(double v);

}  // namespace flowcast
