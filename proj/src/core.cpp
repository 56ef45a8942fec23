#include "flowcast/core.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "flowcast/ingest.hpp"
#include "flowcast/timeutil.hpp"
#include "json.hpp"

namespace flowcast {

void FlowSeries::validate() const {
  if (values.rank() != 3) throw std::invalid_argument("FlowSeries: values must be rank 3");
  if (n() < 1 || d() < 1 || hours() < 1)
    throw std::invalid_argument("FlowSeries: n, d and T must all be >= 1");
  if (static_cast<int64_t>(feature_names.size()) != d())
    throw std::invalid_argument("FlowSeries: feature_names size != d");
  for (int64_t i = 0; i < values.numel(); ++i) {
    const double v = values(i);
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("FlowSeries: values must be finite and >= 0");
  }
}

void GraphSpec::validate() const {
  if (n_rows < 1 || n_cols < 1) throw std::invalid_argument("GraphSpec: empty grid");
  if (adjacency.rank() != 2 || adjacency.dim(0) != n() || adjacency.dim(1) != n())
    throw std::invalid_argument("GraphSpec: adjacency must be n x n");
  for (int64_t i = 0; i < n(); ++i) {
    if (adjacency(i, i) != 0.0) throw std::invalid_argument("GraphSpec: nonzero diagonal");
    for (int64_t j = 0; j < n(); ++j) {
      const double v = adjacency(i, j);
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("GraphSpec: entries must be 0/1");
      if (v != adjacency(j, i)) throw std::invalid_argument("GraphSpec: adjacency not symmetric");
    }
  }
}

void WindowSpec::validate() const {
  if (t1 < 1 || t2 < 1 || stride < 1)
    throw std::invalid_argument("WindowSpec: t1, t2 and stride must all be >= 1");
}

std::vector<Sample> make_windows(const FlowSeries& series, const WindowSpec& spec) {
  spec.validate();
  const int64_t n = series.n(), d = series.d(), T = series.hours();
  if (T < spec.t1 + spec.t2)
    throw std::invalid_argument("make_windows: insufficient history (T=" + std::to_string(T) +
                                ", need >= " + std::to_string(spec.t1 + spec.t2) + ")");
  const int64_t count = (T - spec.t1 - spec.t2) / spec.stride + 1;
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(count));
  for (int64_t s = 0; s < count; ++s) {
    const int64_t k = s * spec.stride;
    Sample smp;
    smp.x = Tensor({n, d, spec.t1});
    smp.y = Tensor({n, d, spec.t2});
    smp.anchor_hour = series.start_hour + k + spec.t1;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t f = 0; f < d; ++f) {
        for (int64_t t = 0; t < spec.t1; ++t) smp.x(i, f, t) = series.values(i, f, k + t);
        for (int64_t t = 0; t < spec.t2; ++t) smp.y(i, f, t) = series.values(i, f, k + spec.t1 + t);
      }
    out.push_back(std::move(smp));
  }
  return out;
}

namespace {

void check_metric_args(const Tensor& y_true, const Tensor& y_pred,
                       const std::vector<int64_t>* node_mask) {
  if (!y_true.same_shape(y_pred))
    throw std::invalid_argument("metrics: shape mismatch " + y_true.shape_str() + " vs " +
                                y_pred.shape_str());
  if (y_true.rank() < 1) throw std::invalid_argument("metrics: empty tensor");
  if (node_mask) {
    const int64_t n = y_true.dim(0);
    for (int64_t idx : *node_mask)
      if (idx < 0 || idx >= n) throw std::invalid_argument("metrics: mask index out of range");
  }
}

}  // namespace

void MetricAccumulator::add(const Tensor& y_true, const Tensor& y_pred,
                            const std::vector<int64_t>* node_mask) {
  check_metric_args(y_true, y_pred, node_mask);
  const int64_t n = y_true.dim(0);
  const int64_t per_node = y_true.numel() / n;
  auto add_node = [&](int64_t i) {
    const double* t = y_true.data() + i * per_node;
    const double* p = y_pred.data() + i * per_node;
    for (int64_t j = 0; j < per_node; ++j) {
      const double diff = t[j] - p[j];
      abs_sum += std::fabs(diff);
      sq_sum += diff * diff;
    }
    count += per_node;
  };
  if (node_mask) {
    for (int64_t i : *node_mask) add_node(i);
  } else {
    for (int64_t i = 0; i < n; ++i) add_node(i);
  }
}

double MetricAccumulator::mae() const {
  if (count == 0) throw std::runtime_error("metrics: no entries accumulated");
  return abs_sum / static_cast<double>(count);
}

double MetricAccumulator::rmse() const {
  if (count == 0) throw std::runtime_error("metrics: no entries accumulated");
  return std::sqrt(sq_sum / static_cast<double>(count));
}

double mae(const Tensor& y_true, const Tensor& y_pred, const std::vector<int64_t>* node_mask) {
  MetricAccumulator acc;
  acc.add(y_true, y_pred, node_mask);
  return acc.mae();
}

double rmse(const Tensor& y_true, const Tensor& y_pred, const std::vector<int64_t>* node_mask) {
  MetricAccumulator acc;
  acc.add(y_true, y_pred, node_mask);
  return acc.rmse();
}

static_assert(std::endian::native == std::endian::little,
              "values.f64 is little-endian; big-endian hosts need byte swaps");

void save_flow_series(const std::string& dir, const FlowSeries& fs, const GraphSpec& grid) {
  fs.validate();
  grid.validate();
  namespace fsys = std::filesystem;
  fsys::create_directories(dir);

  {
    std::ofstream bin(fsys::path(dir) / "values.f64", std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot write " + dir + "/values.f64");
    bin.write(reinterpret_cast<const char*>(fs.values.data()),
              static_cast<std::streamsize>(fs.values.numel() * sizeof(double)));
    if (!bin) throw std::runtime_error("short write to " + dir + "/values.f64");
  }

  nlohmann::json meta;
  meta["start_time"] = timeutil::format_hour(fs.start_hour);
  meta["feature_names"] = fs.feature_names;
  meta["n"] = fs.n();
  meta["d"] = fs.d();
  meta["T"] = fs.hours();
  meta["grid"] = {{"origin_lat", grid.origin_lat}, {"origin_lng", grid.origin_lng},
                  {"cell_size_m", grid.cell_size_m}, {"n_rows", grid.n_rows},
                  {"n_cols", grid.n_cols},          {"adjacency_scheme", grid.scheme}};
  std::ofstream js(fsys::path(dir) / "meta.json", std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write " + dir + "/meta.json");
  js << meta.dump(2) << "\n";
}

void load_flow_series(const std::string& dir, FlowSeries& fs, GraphSpec& grid) {
  namespace fsys = std::filesystem;
  std::ifstream js(fsys::path(dir) / "meta.json");
  if (!js) throw std::runtime_error("cannot read " + dir + "/meta.json");
  nlohmann::json meta = nlohmann::json::parse(js);

  const int64_t n = meta.at("n").get<int64_t>();
  const int64_t d = meta.at("d").get<int64_t>();
  const int64_t T = meta.at("T").get<int64_t>();
  fs.start_hour = timeutil::parse_datetime(meta.at("start_time").get<std::string>()) / 3600;
  fs.feature_names = meta.at("feature_names").get<std::vector<std::string>>();

  fs.values = Tensor({n, d, T});
  std::ifstream bin(fsys::path(dir) / "values.f64", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + dir + "/values.f64");
  bin.read(reinterpret_cast<char*>(fs.values.data()),
           static_cast<std::streamsize>(fs.values.numel() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(fs.values.numel() * sizeof(double)))
    throw std::runtime_error("truncated " + dir + "/values.f64");

  const auto& g = meta.at("grid");
  grid.origin_lat = g.at("origin_lat").get<double>();
  grid.origin_lng = g.at("origin_lng").get<double>();
  grid.cell_size_m = g.at("cell_size_m").get<double>();
  grid.n_rows = g.at("n_rows").get<int64_t>();
  grid.n_cols = g.at("n_cols").get<int64_t>();
  grid.scheme = g.at("adjacency_scheme").get<std::string>();
  grid.adjacency = build_adjacency(grid, grid.scheme);

  fs.validate();
  grid.validate();
}

}  // namespace flowcast
