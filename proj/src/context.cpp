#include "flowcast/context.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "flowcast/rng.hpp"
#include "flowcast/sha256.hpp"
#include "flowcast/timeutil.hpp"
#include "json.hpp"

// httplib pulls in a lot; keep it confined to this translation unit.
#include "httplib.h"

namespace flowcast {

void ContextRecord::validate() const {
  if (valid_from >= valid_to) throw std::invalid_argument("ContextRecord: empty validity window");
  if (scope == ContextScope::node && target_grid < 0)
    throw std::invalid_argument("ContextRecord: node scope requires target_grid");
}

namespace {

std::string format_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::string compose_city_text(int64_t day_index, const WeatherDay& weather,
                              const CalendarDay& calendar) {
  if (!std::isfinite(weather.precip_mm) || !std::isfinite(weather.aqi) ||
      !std::isfinite(weather.temp_min_c) || !std::isfinite(weather.temp_max_c))
    throw std::invalid_argument("compose_city_text: weather fields must be finite");
  std::string s = "Today is " + timeutil::human_date(day_index) + ", with ";
  s += weather.precip_mm == 0.0 ? "zero precipitation"
                                : "precipitation of " + format_number(weather.precip_mm) +
                                      " millimeters";
  s += ", ";
  s += weather.aqi == 0.0 ? "zero air quality index"
                          : "an air quality index of " + format_number(weather.aqi);
  s += ", and a temperature ranging from " + format_number(weather.temp_min_c) + " to " +
       format_number(weather.temp_max_c) + " degrees Celsius.";
  if (!weather.condition.empty()) s += " The weather is " + weather.condition + ".";
  s += " Moreover, today is " + timeutil::weekday_name(day_index) + ".";
  if (calendar.holiday_name && !calendar.holiday_name->empty())
    s += " Today is the " + *calendar.holiday_name + " holiday.";
  return s;
}

std::string with_prediction_hour(const std::string& city_text, int64_t hour_of_day) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), " The hour of prediction is %02lld:00.",
                static_cast<long long>(hour_of_day));
  return city_text + buf;
}

std::string compose_node_text(int64_t grid, const std::vector<EventRecord>& events) {
  std::string s = "This is grid " + std::to_string(grid) + ".";
  if (events.empty()) return s + " There are no scheduled events at this location today.";
  for (size_t i = 1; i < events.size(); ++i)
    if (events[i].start_time < events[i - 1].start_time)
      throw std::invalid_argument("compose_node_text: events must be chronological");
  for (const auto& e : events)
    s += " " + e.venue + " hosts " + e.name + " from " + e.start_time + " to " + e.end_time + ".";
  return s;
}

// --------------------------------------------------------------------------
// Offline backend

OfflineBackend::OfflineBackend(int64_t dim, uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw std::invalid_argument("OfflineBackend: dim must be >= 1");
}

std::string OfflineBackend::identity() const {
  return "offline:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
}

std::vector<double> OfflineBackend::embed(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("embed: empty text");
  char seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>(seed_ >> (8 * i));
  for (uint64_t bump = 0;; ++bump) {
    Sha256 h;
    h.update(seed_bytes, 8);
    h.update(text);
    if (bump > 0) h.update(&bump, sizeof(bump));
    uint8_t dgst[32];
    h.digest(dgst);
    uint64_t s = 0;
    for (int i = 0; i < 8; ++i) s |= uint64_t(dgst[i]) << (8 * i);
    std::mt19937_64 g(s);
    std::vector<double> v(static_cast<size_t>(dim_));
    double sq = 0.0;
    for (auto& x : v) {
      x = uniform_pm1(g);
      sq += x * x;
    }
    if (sq == 0.0) continue;  // astronomically unlikely; redraw
    const double norm = std::sqrt(sq);
    for (auto& x : v) x /= norm;
    return v;
  }
}

// --------------------------------------------------------------------------
// Remote backend

struct RemoteBackend::Impl {
  std::unique_ptr<httplib::Client> client;
  std::counting_semaphore<64> slots;
  explicit Impl(int max_in_flight) : slots(std::max(1, max_in_flight)) {}
};

RemoteBackend::RemoteBackend(RemoteBackendConfig cfg)
    : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>(cfg_.max_in_flight)) {
  const char* tok = std::getenv(cfg_.token_env.c_str());
  if (!tok || !*tok)
    throw std::runtime_error("remote embedding backend: credential env var " + cfg_.token_env +
                             " is not set");
  token_ = tok;
  impl_->client = std::make_unique<httplib::Client>(cfg_.base_url);
  impl_->client->set_connection_timeout(cfg_.timeout_s);
  impl_->client->set_read_timeout(cfg_.timeout_s);
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::identity() const { return "remote:" + cfg_.base_url + ":" + cfg_.model; }

std::vector<double> RemoteBackend::embed(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("embed: empty text");
  nlohmann::json body;
  body["input"] = std::vector<std::string>{text};
  body["model"] = cfg_.model;
  const std::string payload = body.dump();

  httplib::Headers headers{{"Authorization", "Bearer " + token_}};
  std::string last_error;
  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
    auto res = impl_->client->Post(cfg_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("embedding backend " + identity() + " failed: http " +
                               std::to_string(res->status) + " " + res->body);
    nlohmann::json j = nlohmann::json::parse(res->body);
    auto vec = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    if (vec.empty()) throw std::runtime_error("embedding backend " + identity() + ": empty vector");
    if (dim_ == 0) dim_ = static_cast<int64_t>(vec.size());
    if (dim_ != static_cast<int64_t>(vec.size()))
      throw std::runtime_error("embedding backend " + identity() + ": dimension drift (" +
                               std::to_string(dim_) + " -> " + std::to_string(vec.size()) + ")");
    return vec;
  }
  throw std::runtime_error("embedding backend " + identity() + " unreachable after " +
                           std::to_string(cfg_.max_attempts) + " attempts; last: " + last_error);
}

// --------------------------------------------------------------------------
// Cache

CachedBackend::CachedBackend(std::shared_ptr<EmbeddingBackend> inner, std::string cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
  std::filesystem::create_directories(dir_);
}

std::string CachedBackend::key(const std::string& text) const {
  Sha256 h;
  h.update(inner_->identity());
  h.update("\0", 1);
  h.update(text);
  return h.hex_digest();
}

std::vector<double> CachedBackend::embed(const std::string& text) {
  const auto path = std::filesystem::path(dir_) / (key(text) + ".json");
  {
    std::ifstream in(path);
    if (in) {
      nlohmann::json j = nlohmann::json::parse(in);
      auto vec = j.at("vector").get<std::vector<double>>();
      const int64_t d = j.at("dim").get<int64_t>();
      if (d != static_cast<int64_t>(vec.size()))
        throw std::runtime_error("corrupt cache entry " + path.string());
      if (fixed_dim_ == 0) fixed_dim_ = d;
      if (fixed_dim_ != d)
        throw std::runtime_error("embedding dimension drift in cache: " + std::to_string(fixed_dim_) +
                                 " -> " + std::to_string(d));
      ++hits_;
      return vec;
    }
  }
  auto vec = inner_->embed(text);
  if (fixed_dim_ == 0) fixed_dim_ = static_cast<int64_t>(vec.size());
  if (fixed_dim_ != static_cast<int64_t>(vec.size()))
    throw std::runtime_error("embedding dimension drift from backend " + inner_->identity());
  ++misses_;

  nlohmann::json j;
  j["text"] = text;
  j["model"] = inner_->identity();
  j["dim"] = vec.size();
  j["vector"] = vec;
  {
    std::lock_guard<std::mutex> lock(write_mu_);
    const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache entry " + tmp);
    out << j.dump() << "\n";
    out.close();
    std::filesystem::rename(tmp, path);
  }
  return vec;
}

// --------------------------------------------------------------------------
// JSONL IO

std::map<int64_t, CityDayInput> load_city_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open city context file: " + path);
  std::map<int64_t, CityDayInput> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    CityDayInput d;
    d.weather.precip_mm = j.value("precip_mm", 0.0);
    d.weather.aqi = j.value("aqi", 0.0);
    d.weather.temp_min_c = j.value("temp_min_c", 0.0);
    d.weather.temp_max_c = j.value("temp_max_c", 0.0);
    d.weather.condition = j.value("condition", std::string("clear"));
    if (j.contains("holiday") && !j["holiday"].is_null())
      d.calendar.holiday_name = j["holiday"].get<std::string>();
    out[timeutil::parse_date(j.at("date").get<std::string>())] = d;
  }
  return out;
}

std::vector<EventRecord> load_events_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open events file: " + path);
  std::vector<EventRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    EventRecord e;
    e.day = timeutil::parse_date(j.at("date").get<std::string>());
    e.grid = j.at("grid").get<int64_t>();
    e.name = j.at("name").get<std::string>();
    e.venue = j.at("venue").get<std::string>();
    e.start_time = j.at("start_time").get<std::string>();
    e.end_time = j.at("end_time").get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

void save_city_jsonl(const std::string& path, const std::map<int64_t, CityDayInput>& days) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [day, d] : days) {
    nlohmann::json j;
    j["date"] = timeutil::format_day(day);
    j["precip_mm"] = d.weather.precip_mm;
    j["aqi"] = d.weather.aqi;
    j["temp_min_c"] = d.weather.temp_min_c;
    j["temp_max_c"] = d.weather.temp_max_c;
    j["condition"] = d.weather.condition;
    if (d.calendar.holiday_name) j["holiday"] = *d.calendar.holiday_name;
    out << j.dump() << "\n";
  }
}

void save_events_jsonl(const std::string& path, const std::vector<EventRecord>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& e : events) {
    nlohmann::json j;
    j["date"] = timeutil::format_day(e.day);
    j["grid"] = e.grid;
    j["name"] = e.name;
    j["venue"] = e.venue;
    j["start_time"] = e.start_time;
    j["end_time"] = e.end_time;
    out << j.dump() << "\n";
  }
}

}  // namespace flowcast
