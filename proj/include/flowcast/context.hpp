#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace flowcast {

enum class ContextScope { city, node };

/// Timestamped textual context plus its embedding once computed. valid_from /
/// valid_to are hours since epoch (half-open).
struct ContextRecord {
  ContextScope scope = ContextScope::city;
  int64_t target_grid = -1;  // node scope only
  int64_t valid_from = 0;
  int64_t valid_to = 0;
  std::string text;
  std::vector<double> embedding;

  void validate() const;
};

struct WeatherDay {
  double precip_mm = 0.0;
  double aqi = 0.0;
  double temp_min_c = 0.0;
  double temp_max_c = 0.0;
  std::string condition = "clear";
};

struct CalendarDay {
  std::optional<std::string> holiday_name;
};

struct EventRecord {
  int64_t day = 0;  // day index since epoch
  int64_t grid = -1;
  std::string name;
  std::string venue;
  std::string start_time;  // "HH:MM"
  std::string end_time;
};

/// Daily city-level sentence block in the fixed template; deterministic.
std::string compose_city_text(int64_t day_index, const WeatherDay& weather,
                              const CalendarDay& calendar);
/// Appends the per-window prediction hour sentence.
std::string with_prediction_hour(const std::string& city_text, int64_t hour_of_day);

/// Node-level text naming venue, event and times; events must be
/// chronological. Empty list yields the canonical no-event sentence.
std::string compose_node_text(int64_t grid, const std::vector<EventRecord>& events);

// ---------------------------------------------------------------------------

class EmbeddingBackend {
public:
  virtual ~EmbeddingBackend() = default;
  /// Stable identity string; part of the cache key.
  virtual std::string identity() const = 0;
  /// Fixed embedding dimension, or 0 if unknown until the first call.
  virtual int64_t dim() const = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

/// Deterministic offline stand-in: seeds mt19937_64 from a stable 64-bit
/// hash of (seed, text) and emits a unit-norm vector. Bitwise reproducible
/// across processes and platforms (no transcendental functions involved).
class OfflineBackend final : public EmbeddingBackend {
public:
  OfflineBackend(int64_t dim, uint64_t seed = 0);
  std::string identity() const override;
  int64_t dim() const override { return dim_; }
  std::vector<double> embed(const std::string& text) override;

private:
  int64_t dim_;
  uint64_t seed_;
};

struct RemoteBackendConfig {
  std::string base_url = "https://api.example.com";  // scheme://host[:port]
  std::string path = "/v1/embeddings";
  std::string model = "text-embedding-3-small";
  std::string token_env = "FLOWCAST_EMBED_TOKEN";
  int max_attempts = 4;
  int backoff_ms = 500;       // doubled per retry
  int max_in_flight = 2;      // bounded concurrency for callers embedding in parallel
  int timeout_s = 30;
};

/// HTTP client for an external embedding service: POST {input:[texts],
/// model:name} -> {data:[{embedding:[...]}]}. Not exercised by tests.
class RemoteBackend final : public EmbeddingBackend {
public:
  explicit RemoteBackend(RemoteBackendConfig cfg);
  ~RemoteBackend() override;
  std::string identity() const override;
  int64_t dim() const override { return dim_; }
  std::vector<double> embed(const std::string& text) override;

private:
  RemoteBackendConfig cfg_;
  std::string token_;
  int64_t dim_ = 0;  // fixed after first response
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Directory cache of {sha256(identity + text)}.json entries wrapping an
/// inner backend. Readers are lock-free on disk; writers go through
/// write-temp-then-rename so a failed write never corrupts an entry.
class CachedBackend final : public EmbeddingBackend {
public:
  CachedBackend(std::shared_ptr<EmbeddingBackend> inner, std::string cache_dir);
  std::string identity() const override { return inner_->identity(); }
  int64_t dim() const override { return inner_->dim(); }
  std::vector<double> embed(const std::string& text) override;

  int64_t hits() const { return hits_; }
  int64_t misses() const { return misses_; }

private:
  std::string key(const std::string& text) const;
  std::shared_ptr<EmbeddingBackend> inner_;
  std::string dir_;
  std::mutex write_mu_;
  int64_t hits_ = 0;
  int64_t misses_ = 0;
  int64_t fixed_dim_ = 0;  // drift guard across cache + backend
};

// JSONL inputs. One object per line; blank lines ignored.
// city: {"date":"YYYY-MM-DD","precip_mm":..,"aqi":..,"temp_min_c":..,
//        "temp_max_c":..,"condition":"..","holiday":".."?}
// events: {"date":"YYYY-MM-DD","grid":..,"name":"..","venue":"..",
//          "start_time":"HH:MM","end_time":"HH:MM"}
struct CityDayInput {
  WeatherDay weather;
  CalendarDay calendar;
};
std::map<int64_t, CityDayInput> load_city_jsonl(const std::string& path);
std::vector<EventRecord> load_events_jsonl(const std::string& path);
void save_city_jsonl(const std::string& path, const std::map<int64_t, CityDayInput>& days);
void save_events_jsonl(const std::string& path, const std::vector<EventRecord>& events);

}  // namespace flowcast
