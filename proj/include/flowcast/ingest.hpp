#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/core.hpp"

namespace flowcast {

struct TripRecord {
  int64_t started_at = 0;  // seconds since epoch, UTC
  int64_t ended_at = 0;
  double start_lat = 0.0, start_lng = 0.0;
  double end_lat = 0.0, end_lng = 0.0;
};

/// Chronological, non-overlapping train/val/test ranges in whole days
/// (inclusive day indices since the epoch).
struct SplitSpec {
  int64_t train_start = 0, train_end = 0;
  int64_t val_start = 0, val_end = 0;
  int64_t test_start = 0, test_end = 0;

  void validate() const;
  // 14/2/4-week chronological split anchored at the given first day.
  static SplitSpec weeks_14_2_4(int64_t first_day);
  // Whole-day fractional split of [first_day, first_day + total_days).
  static SplitSpec fractions(int64_t first_day, int64_t total_days, double train_frac,
                             double val_frac);
};

constexpr int64_t kOutOfBounds = -1;

/// Maps a lat/lng point to a row-major cell index of the grid, or
/// kOutOfBounds. Equirectangular projection around the grid origin (the
/// south-west corner); cell intervals are half-open [edge, edge + size).
int64_t assign_grid(double lat, double lng, const GraphSpec& grid);

struct IngestReport {
  int64_t total = 0;        // CSV data rows seen
  int64_t kept = 0;         // counted legs (pickups + dropoffs)
  int64_t kept_pickups = 0;
  int64_t kept_dropoffs = 0;
  int64_t out_of_bounds = 0;  // legs dropped: outside the grid
  int64_t out_of_period = 0;  // legs dropped: outside the aggregation period
  int64_t unparseable = 0;    // rows skipped entirely
  bool skip_warning = false;  // >1% of rows unparseable

  std::string to_json() const;
};

/// Counts trip legs into an hourly per-grid tensor. Feature 0 ("pickup")
/// buckets started_at by hour at the start point; feature 1 ("dropoff")
/// likewise for ended_at at the end point. Legs are counted independently.
/// period is [start_hour, end_hour) in hours since epoch.
FlowSeries aggregate_flows(const std::vector<TripRecord>& trips, const GraphSpec& grid,
                           int64_t start_hour, int64_t end_hour, IngestReport* report = nullptr);

/// Streaming CSV ingestion. Header must contain started_at, ended_at,
/// start_lat, start_lng, end_lat, end_lng (extra columns ignored). Timestamps
/// are "YYYY-MM-DD HH:MM:SS" local to the dataset; tz_offset_minutes converts
/// them to UTC on read. If start/end hour are unset (0,0), the period is the
/// hour-aligned span of the parsed records.
FlowSeries ingest_csv(const std::string& csv_path, const GraphSpec& grid, IngestReport& report,
                      int64_t start_hour = 0, int64_t end_hour = 0,
                      int64_t tz_offset_minutes = 0);

/// rook-4 connects lateral neighbors, queen-8 adds diagonals. Symmetric 0/1,
/// zero diagonal.
Tensor build_adjacency(const GraphSpec& grid, const std::string& scheme);

/// Slices a series into the three split ranges (whole days, inclusive).
void split_series(const FlowSeries& series, const SplitSpec& split, FlowSeries& train,
                  FlowSeries& val, FlowSeries& test);

}  // namespace flowcast
