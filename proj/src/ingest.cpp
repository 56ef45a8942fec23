#include "flowcast/ingest.hpp"

#include <omp.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "flowcast/timeutil.hpp"
#include "json.hpp"

namespace flowcast {

void SplitSpec::validate() const {
  if (train_end < train_start || val_end < val_start || test_end < test_start)
    throw std::invalid_argument("SplitSpec: each range must be chronological");
  if (val_start <= train_end || test_start <= val_end)
    throw std::invalid_argument("SplitSpec: ranges must be chronological and non-overlapping");
}

SplitSpec SplitSpec::weeks_14_2_4(int64_t first_day) {
  SplitSpec s;
  s.train_start = first_day;
  s.train_end = first_day + 98 - 1;
  s.val_start = s.train_end + 1;
  s.val_end = s.val_start + 14 - 1;
  s.test_start = s.val_end + 1;
  s.test_end = s.test_start + 28 - 1;
  return s;
}

SplitSpec SplitSpec::fractions(int64_t first_day, int64_t total_days, double train_frac,
                               double val_frac) {
  if (total_days < 3) throw std::invalid_argument("SplitSpec::fractions: need >= 3 days");
  int64_t tr = static_cast<int64_t>(std::floor(total_days * train_frac));
  int64_t va = static_cast<int64_t>(std::floor(total_days * val_frac));
  if (tr < 1) tr = 1;
  if (va < 1) va = 1;
  if (tr + va >= total_days) tr = total_days - va - 1;
  SplitSpec s;
  s.train_start = first_day;
  s.train_end = first_day + tr - 1;
  s.val_start = s.train_end + 1;
  s.val_end = s.val_start + va - 1;
  s.test_start = s.val_end + 1;
  s.test_end = first_day + total_days - 1;
  s.validate();
  return s;
}

namespace {
constexpr double kEarthRadiusM = 6371000.0;
constexpr double kDegToRad = 0.017453292519943295;
}  // namespace

int64_t assign_grid(double lat, double lng, const GraphSpec& grid) {
  if (!std::isfinite(lat) || !std::isfinite(lng)) return kOutOfBounds;
  const double y_m = (lat - grid.origin_lat) * kDegToRad * kEarthRadiusM;
  const double x_m =
      (lng - grid.origin_lng) * kDegToRad * kEarthRadiusM * std::cos(grid.origin_lat * kDegToRad);
  const double col_f = std::floor(x_m / grid.cell_size_m);
  const double row_f = std::floor(y_m / grid.cell_size_m);
  if (row_f < 0 || col_f < 0 || row_f >= static_cast<double>(grid.n_rows) ||
      col_f >= static_cast<double>(grid.n_cols))
    return kOutOfBounds;
  return static_cast<int64_t>(row_f) * grid.n_cols + static_cast<int64_t>(col_f);
}

std::string IngestReport::to_json() const {
  nlohmann::json j;
  j["total"] = total;
  j["kept"] = kept;
  j["kept_pickups"] = kept_pickups;
  j["kept_dropoffs"] = kept_dropoffs;
  j["out_of_bounds"] = out_of_bounds;
  j["out_of_period"] = out_of_period;
  j["unparseable"] = unparseable;
  j["skip_warning"] = skip_warning;
  return j.dump(2);
}

FlowSeries aggregate_flows(const std::vector<TripRecord>& trips, const GraphSpec& grid,
                           int64_t start_hour, int64_t end_hour, IngestReport* report) {
  if (end_hour <= start_hour) throw std::invalid_argument("aggregate_flows: empty period");
  const int64_t n = grid.n();
  const int64_t T = end_hour - start_hour;
  FlowSeries fs;
  fs.values = Tensor({n, 2, T});
  fs.start_hour = start_hour;
  fs.feature_names = {"pickup", "dropoff"};

  IngestReport local;
  // Sharded counting: each shard owns a partial tensor, merged in shard
  // order so the result is independent of thread scheduling.
  const int64_t n_trips = static_cast<int64_t>(trips.size());
  const int shards = std::max(1, std::min(omp_get_max_threads(), 8));
  const int64_t chunk = (n_trips + shards - 1) / std::max<int64_t>(shards, 1);
  std::vector<Tensor> partial(static_cast<size_t>(shards));
  std::vector<IngestReport> preport(static_cast<size_t>(shards));
  for (auto& p : partial) p = Tensor({n, 2, T});

#pragma omp parallel for schedule(static, 1)
  for (int s = 0; s < shards; ++s) {
    Tensor& acc = partial[static_cast<size_t>(s)];
    IngestReport& rep = preport[static_cast<size_t>(s)];
    const int64_t lo = s * chunk;
    const int64_t hi = std::min(n_trips, lo + chunk);
    for (int64_t idx = lo; idx < hi; ++idx) {
      const TripRecord& t = trips[static_cast<size_t>(idx)];
      // pickup leg
      {
        const int64_t h = t.started_at >= 0 ? t.started_at / 3600 : (t.started_at - 3599) / 3600;
        if (h < start_hour || h >= end_hour) {
          ++rep.out_of_period;
        } else {
          const int64_t g = assign_grid(t.start_lat, t.start_lng, grid);
          if (g == kOutOfBounds) {
            ++rep.out_of_bounds;
          } else {
            acc(g, 0, h - start_hour) += 1.0;
            ++rep.kept_pickups;
          }
        }
      }
      // dropoff leg
      {
        const int64_t h = t.ended_at >= 0 ? t.ended_at / 3600 : (t.ended_at - 3599) / 3600;
        if (h < start_hour || h >= end_hour) {
          ++rep.out_of_period;
        } else {
          const int64_t g = assign_grid(t.end_lat, t.end_lng, grid);
          if (g == kOutOfBounds) {
            ++rep.out_of_bounds;
          } else {
            acc(g, 1, h - start_hour) += 1.0;
            ++rep.kept_dropoffs;
          }
        }
      }
    }
  }

  for (int s = 0; s < shards; ++s) {
    const Tensor& p = partial[static_cast<size_t>(s)];
    for (int64_t i = 0; i < p.numel(); ++i) fs.values(i) += p(i);
    local.kept_pickups += preport[static_cast<size_t>(s)].kept_pickups;
    local.kept_dropoffs += preport[static_cast<size_t>(s)].kept_dropoffs;
    local.out_of_bounds += preport[static_cast<size_t>(s)].out_of_bounds;
    local.out_of_period += preport[static_cast<size_t>(s)].out_of_period;
  }
  local.total = n_trips;
  local.kept = local.kept_pickups + local.kept_dropoffs;
  if (report) {
    report->total += local.total;
    report->kept += local.kept;
    report->kept_pickups += local.kept_pickups;
    report->kept_dropoffs += local.kept_dropoffs;
    report->out_of_bounds += local.out_of_bounds;
    report->out_of_period += local.out_of_period;
  }
  return fs;
}

namespace {

// Minimal CSV splitter with double-quote handling.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

FlowSeries ingest_csv(const std::string& csv_path, const GraphSpec& grid, IngestReport& report,
                      int64_t start_hour, int64_t end_hour, int64_t tz_offset_minutes) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open trips file: " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trips file: " + csv_path);

  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int64_t>(i);
    throw std::runtime_error("trips file missing column '" + name + "'");
  };
  const int64_t c_start = col("started_at"), c_end = col("ended_at");
  const int64_t c_slat = col("start_lat"), c_slng = col("start_lng");
  const int64_t c_elat = col("end_lat"), c_elng = col("end_lng");
  const int64_t max_col = std::max({c_start, c_end, c_slat, c_slng, c_elat, c_elng});

  const int64_t tz_shift = tz_offset_minutes * 60;
  std::vector<TripRecord> trips;
  int64_t unparseable = 0, total = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++total;
    const auto f = split_csv_line(line);
    TripRecord t;
    int64_t s0, s1;
    if (static_cast<int64_t>(f.size()) <= max_col ||
        !timeutil::try_parse_datetime(f[static_cast<size_t>(c_start)], s0) ||
        !timeutil::try_parse_datetime(f[static_cast<size_t>(c_end)], s1) ||
        !parse_double(f[static_cast<size_t>(c_slat)], t.start_lat) ||
        !parse_double(f[static_cast<size_t>(c_slng)], t.start_lng) ||
        !parse_double(f[static_cast<size_t>(c_elat)], t.end_lat) ||
        !parse_double(f[static_cast<size_t>(c_elng)], t.end_lng) || s1 < s0) {
      ++unparseable;
      continue;
    }
    t.started_at = s0 - tz_shift;
    t.ended_at = s1 - tz_shift;
    trips.push_back(t);
  }

  if (trips.empty()) throw std::runtime_error("no parseable trips in " + csv_path);

  if (end_hour <= start_hour) {
    int64_t lo = trips[0].started_at, hi = trips[0].ended_at;
    for (const auto& t : trips) {
      lo = std::min(lo, t.started_at);
      hi = std::max(hi, t.ended_at);
    }
    start_hour = lo >= 0 ? lo / 3600 : (lo - 3599) / 3600;
    end_hour = (hi >= 0 ? hi / 3600 : (hi - 3599) / 3600) + 1;
  }

  FlowSeries fs = aggregate_flows(trips, grid, start_hour, end_hour, &report);
  report.total = total;
  report.unparseable = unparseable;
  report.skip_warning = total > 0 && unparseable * 100 > total;
  return fs;
}

Tensor build_adjacency(const GraphSpec& grid, const std::string& scheme) {
  if (grid.n_rows < 1 || grid.n_cols < 1) throw std::invalid_argument("build_adjacency: empty grid");
  const bool queen = scheme == "queen8";
  if (!queen && scheme != "rook4")
    throw std::invalid_argument("build_adjacency: unknown scheme '" + scheme + "'");
  const int64_t R = grid.n_rows, C = grid.n_cols, n = R * C;
  Tensor a({n, n});
  for (int64_t r = 0; r < R; ++r)
    for (int64_t c = 0; c < C; ++c) {
      const int64_t i = r * C + c;
      for (int64_t dr = -1; dr <= 1; ++dr)
        for (int64_t dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (!queen && dr != 0 && dc != 0) continue;
          const int64_t rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= R || cc >= C) continue;
          a(i, rr * C + cc) = 1.0;
        }
    }
  return a;
}

void split_series(const FlowSeries& series, const SplitSpec& split, FlowSeries& train,
                  FlowSeries& val, FlowSeries& test) {
  split.validate();
  if (series.start_hour % 24 != 0)
    throw std::invalid_argument("split_series: series must start on a day boundary");
  const int64_t first_day = series.start_hour / 24;
  const int64_t last_day_excl = (series.start_hour + series.hours()) / 24;
  auto slice = [&](int64_t day_start, int64_t day_end) {
    if (day_start < first_day || day_end >= last_day_excl)
      throw std::invalid_argument("split_series: range outside series period");
    const int64_t h0 = day_start * 24 - series.start_hour;
    const int64_t hours = (day_end - day_start + 1) * 24;
    FlowSeries out;
    out.start_hour = day_start * 24;
    out.feature_names = series.feature_names;
    out.values = Tensor({series.n(), series.d(), hours});
    for (int64_t i = 0; i < series.n(); ++i)
      for (int64_t f = 0; f < series.d(); ++f)
        for (int64_t t = 0; t < hours; ++t) out.values(i, f, t) = series.values(i, f, h0 + t);
    return out;
  };
  train = slice(split.train_start, split.train_end);
  val = slice(split.val_start, split.val_end);
  test = slice(split.test_start, split.test_end);
}

}  // namespace flowcast
