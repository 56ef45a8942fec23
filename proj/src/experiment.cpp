#include "flowcast/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "flowcast/rng.hpp"
#include "flowcast/sha256.hpp"
#include "flowcast/timeutil.hpp"
#include "json.hpp"

namespace flowcast {

std::string aug_mode_name(AugMode m) {
  switch (m) {
    case AugMode::none: return "none";
    case AugMode::city: return "city";
    case AugMode::node: return "node";
    case AugMode::both: return "both";
  }
  return "none";
}

AugMode parse_aug_mode(const std::string& s) {
  if (s == "none") return AugMode::none;
  if (s == "city") return AugMode::city;
  if (s == "node") return AugMode::node;
  if (s == "both") return AugMode::both;
  throw std::invalid_argument("unknown augmentation mode '" + s + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, p);
}

std::string ExperimentConfig::canonical_json() const {
  nlohmann::json j;
  j["model_id"] = model_id;
  j["hyper"] = {{"hidden", hyper.hidden},
                {"conv_kernel", hyper.conv_kernel},
                {"dropout", hyper.dropout},
                {"proj_activation", hyper.proj_activation}};
  j["window"] = {{"t1", window.t1}, {"t2", window.t2}, {"stride", window.stride}};
  j["aug"] = aug_mode_name(aug);
  std::vector<std::string> variants;
  for (AugMode m : compare_variants) variants.push_back(aug_mode_name(m));
  j["compare_variants"] = variants;
  j["designated_grid"] = designated_grid;
  j["opt"] = {{"lr", opt.lr},
              {"batch_size", opt.batch_size},
              {"max_epochs", opt.max_epochs},
              {"patience", opt.patience},
              {"loss", opt.loss}};
  j["seed"] = seed;
  j["embed_dim"] = embed_dim;
  j["embed_seed"] = embed_seed;
  j["variance_target"] = variance_target;
  return j.dump();
}

std::string ExperimentConfig::config_hash() const { return sha256_hex(canonical_json()); }

// --------------------------------------------------------------------------
// Context provider

std::vector<std::pair<ContextScope, std::string>> enumerate_context_texts(
    const DataBundle& data, int64_t designated_grid) {
  std::vector<std::pair<ContextScope, std::string>> out;
  const int64_t first_day = data.series.start_hour / 24;
  const int64_t last_day = (data.series.start_hour + data.series.hours() - 1) / 24;
  for (int64_t day = first_day; day <= last_day; ++day) {
    CityDayInput in;
    if (auto it = data.city_days.find(day); it != data.city_days.end()) in = it->second;
    const std::string base = compose_city_text(day, in.weather, in.calendar);
    for (int64_t hour = 0; hour < 24; ++hour)
      out.emplace_back(ContextScope::city, with_prediction_hour(base, hour));
  }
  for (int64_t day = first_day; day <= last_day; ++day) {
    std::vector<EventRecord> todays;
    for (const auto& e : data.events)
      if (e.day == day && e.grid == designated_grid) todays.push_back(e);
    std::stable_sort(todays.begin(), todays.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                       return a.start_time < b.start_time;
                     });
    out.emplace_back(ContextScope::node, compose_node_text(designated_grid, todays));
  }
  return out;
}

ContextProvider ContextProvider::build(const DataBundle& data, int64_t designated_grid,
                                       EmbeddingBackend& backend, double variance_target) {
  ContextProvider p;
  const int64_t first_day = data.series.start_hour / 24;
  const int64_t last_day = (data.series.start_hour + data.series.hours() - 1) / 24;
  const int64_t train_lo = data.split.train_start, train_hi = data.split.train_end;

  // City: one text per (day, prediction hour).
  std::map<int64_t, std::vector<double>> city_raw;
  for (int64_t day = first_day; day <= last_day; ++day) {
    CityDayInput in;
    if (auto it = data.city_days.find(day); it != data.city_days.end()) in = it->second;
    const std::string base = compose_city_text(day, in.weather, in.calendar);
    for (int64_t hour = 0; hour < 24; ++hour) {
      ContextRecord rec;
      rec.scope = ContextScope::city;
      rec.valid_from = day * 24 + hour;
      rec.valid_to = day * 24 + hour + 1;
      rec.text = with_prediction_hour(base, hour);
      rec.embedding = backend.embed(rec.text);
      rec.validate();
      city_raw[day * 24 + hour] = rec.embedding;
      p.records_.push_back(std::move(rec));
    }
  }
  {
    std::vector<const std::vector<double>*> train_rows;
    for (const auto& [key, vec] : city_raw) {
      const int64_t day = key / 24;
      if (day >= train_lo && day <= train_hi) train_rows.push_back(&vec);
    }
    if (train_rows.size() < 2)
      throw std::runtime_error("ContextProvider: need >= 2 training rows of city context");
    const int64_t dc = static_cast<int64_t>(train_rows[0]->size());
    Tensor m({static_cast<int64_t>(train_rows.size()), dc});
    for (size_t i = 0; i < train_rows.size(); ++i)
      for (int64_t j = 0; j < dc; ++j)
        m(static_cast<int64_t>(i), j) = (*train_rows[i])[static_cast<size_t>(j)];
    p.city_pca_ = fit_pca(m, variance_target);
  }
  for (const auto& [key, vec] : city_raw) p.city_cache_[key] = p.city_pca_.transform(vec);

  // Node: one text per day for the designated grid.
  std::map<int64_t, std::vector<double>> node_raw;
  for (int64_t day = first_day; day <= last_day; ++day) {
    std::vector<EventRecord> todays;
    for (const auto& e : data.events)
      if (e.day == day && e.grid == designated_grid) todays.push_back(e);
    std::stable_sort(todays.begin(), todays.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                       return a.start_time < b.start_time;
                     });
    if (!todays.empty()) p.event_days_.insert(day);
    ContextRecord rec;
    rec.scope = ContextScope::node;
    rec.target_grid = designated_grid;
    rec.valid_from = day * 24;
    rec.valid_to = (day + 1) * 24;
    rec.text = compose_node_text(designated_grid, todays);
    rec.embedding = backend.embed(rec.text);
    rec.validate();
    node_raw[day] = rec.embedding;
    p.records_.push_back(std::move(rec));
  }
  {
    std::vector<const std::vector<double>*> train_rows;
    for (const auto& [day, vec] : node_raw)
      if (day >= train_lo && day <= train_hi) train_rows.push_back(&vec);
    if (train_rows.size() < 2)
      throw std::runtime_error("ContextProvider: need >= 2 training days of node context");
    const int64_t dc = static_cast<int64_t>(train_rows[0]->size());
    Tensor m({static_cast<int64_t>(train_rows.size()), dc});
    for (size_t i = 0; i < train_rows.size(); ++i)
      for (int64_t j = 0; j < dc; ++j)
        m(static_cast<int64_t>(i), j) = (*train_rows[i])[static_cast<size_t>(j)];
    p.node_pca_ = fit_pca(m, variance_target);
  }
  for (const auto& [day, vec] : node_raw) p.node_cache_[day] = p.node_pca_.transform(vec);
  return p;
}

const std::vector<double>& ContextProvider::city_vec(int64_t anchor_hour) const {
  const int64_t key = timeutil::day_of_hour(anchor_hour) * 24 + timeutil::hour_of_day(anchor_hour);
  auto it = city_cache_.find(key);
  if (it == city_cache_.end())
    throw std::out_of_range("ContextProvider: no city context for hour " +
                            timeutil::format_hour(anchor_hour));
  return it->second;
}

const std::vector<double>& ContextProvider::node_vec(int64_t anchor_hour) const {
  auto it = node_cache_.find(timeutil::day_of_hour(anchor_hour));
  if (it == node_cache_.end())
    throw std::out_of_range("ContextProvider: no node context for hour " +
                            timeutil::format_hour(anchor_hour));
  return it->second;
}

// --------------------------------------------------------------------------
// Batching helpers

namespace {

bool wants_city(AugMode m) { return m == AugMode::city || m == AugMode::both; }
bool wants_node(AugMode m) { return m == AugMode::node || m == AugMode::both; }

std::vector<AuxNodeSpec> aux_specs_for(AugMode aug, int64_t designated_grid) {
  std::vector<AuxNodeSpec> specs;
  if (wants_city(aug)) specs.push_back({AuxScope::city, -1});
  if (wants_node(aug)) specs.push_back({AuxScope::node, designated_grid});
  return specs;
}

GraphBatch assemble_batch(const std::vector<Sample>& samples, const std::vector<int64_t>& idxs,
                          int64_t lo, int64_t hi, const NormStats& norm, int64_t t1, int64_t t2,
                          bool with_targets, const ContextProvider* ctx, AugMode aug) {
  const int64_t B = hi - lo;
  const int64_t n = samples[0].x.dim(0);
  const int64_t d = samples[0].x.dim(1);
  GraphBatch b;
  b.batch = B;
  b.n_base = n;
  b.frames.reserve(static_cast<size_t>(t1));
  for (int64_t t = 0; t < t1; ++t) {
    Tensor f({B * n, d});
    for (int64_t k = 0; k < B; ++k) {
      const Sample& s = samples[static_cast<size_t>(idxs[static_cast<size_t>(lo + k)])];
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < d; ++c)
          f(k * n + i, c) = (s.x(i, c, t) - norm.mean[static_cast<size_t>(c)]) /
                            norm.stdev[static_cast<size_t>(c)];
    }
    b.frames.push_back(std::move(f));
  }
  if (with_targets) {
    b.targets_raw = Tensor({B * n, d * t2});
    for (int64_t k = 0; k < B; ++k) {
      const Sample& s = samples[static_cast<size_t>(idxs[static_cast<size_t>(lo + k)])];
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < d; ++c)
          for (int64_t t = 0; t < t2; ++t) b.targets_raw(k * n + i, c * t2 + t) = s.y(i, c, t);
    }
  }
  if (wants_city(aug)) {
    if (!ctx) throw std::invalid_argument("assemble_batch: city augmentation needs context");
    const int64_t dc = ctx->city_dim();
    b.ctx_city = Tensor({B, dc});
    for (int64_t k = 0; k < B; ++k) {
      const auto& v =
          ctx->city_vec(samples[static_cast<size_t>(idxs[static_cast<size_t>(lo + k)])].anchor_hour);
      for (int64_t j = 0; j < dc; ++j) b.ctx_city(k, j) = v[static_cast<size_t>(j)];
    }
  }
  if (wants_node(aug)) {
    if (!ctx) throw std::invalid_argument("assemble_batch: node augmentation needs context");
    const int64_t dc = ctx->node_dim();
    b.ctx_node = Tensor({B, dc});
    for (int64_t k = 0; k < B; ++k) {
      const auto& v =
          ctx->node_vec(samples[static_cast<size_t>(idxs[static_cast<size_t>(lo + k)])].anchor_hour);
      for (int64_t j = 0; j < dc; ++j) b.ctx_node(k, j) = v[static_cast<size_t>(j)];
    }
  }
  return b;
}

std::vector<Tensor> predict_block(GraphModel& m, const std::vector<Sample>& samples,
                                  const std::vector<int64_t>& idxs, const Tensor& ahat,
                                  const ContextProvider* ctx, AugMode aug) {
  const int64_t n = samples.empty() ? 0 : samples[0].x.dim(0);
  const int64_t d = m.d(), t2 = m.t2();
  std::vector<Tensor> preds;
  preds.reserve(idxs.size());
  const int64_t block = 256;
  for (int64_t lo = 0; lo < static_cast<int64_t>(idxs.size()); lo += block) {
    const int64_t hi = std::min<int64_t>(static_cast<int64_t>(idxs.size()), lo + block);
    GraphBatch b =
        assemble_batch(samples, idxs, lo, hi, m.norm_stats(), m.t1(), t2, false, ctx, aug);
    TapeRun run = m.run_tape(b, ahat, n, false);
    for (int64_t k = 0; k < hi - lo; ++k) {
      Tensor y({n, d, t2});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < d; ++c)
          for (int64_t t = 0; t < t2; ++t) y(i, c, t) = run.pred_raw->val(k * n + i, c * t2 + t);
      preds.push_back(std::move(y));
    }
  }
  return preds;
}

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t t = 0;

  void init(const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
      m.emplace_back(p.value.shape());
      v.emplace_back(p.value.shape());
    }
  }

  void step(std::vector<NamedParam>& params, const std::vector<ad::Var>& leaves, double lr) {
    ++t;
    const double b1c = 1.0 - std::pow(0.9, static_cast<double>(t));
    const double b2c = 1.0 - std::pow(0.999, static_cast<double>(t));
    for (size_t p = 0; p < params.size(); ++p) {
      Tensor& theta = params[p].value;
      const Tensor& g = leaves[p]->grad;
      Tensor& mp = m[p];
      Tensor& vp = v[p];
      for (int64_t i = 0; i < theta.numel(); ++i) {
        const double gi = g(i);
        mp(i) = 0.9 * mp(i) + 0.1 * gi;
        vp(i) = 0.999 * vp(i) + 0.001 * gi * gi;
        theta(i) -= lr * (mp(i) / b1c) / (std::sqrt(vp(i) / b2c) + 1e-8);
      }
    }
  }
};

}  // namespace

// --------------------------------------------------------------------------
// Training

TrainResult train(const ExperimentConfig& cfg, AugMode aug, const DataBundle& data,
                  const ContextProvider* ctx) {
  data.split.validate();
  FlowSeries train_fs, val_fs, test_fs;
  split_series(data.series, data.split, train_fs, val_fs, test_fs);

  TrainResult result;
  const bool naive = cfg.model_id == "persistence" || cfg.model_id == "historical_average";
  if (naive) {
    if (aug != AugMode::none)
      throw std::invalid_argument("augmentation requires a graph model, got " + cfg.model_id);
    result.model = make_forecaster(cfg.model_id, data.series.d(), cfg.window.t1, cfg.window.t2,
                                   cfg.hyper, cfg.seed, &train_fs);
    return result;
  }

  const auto train_samples = make_windows(train_fs, cfg.window);
  const auto val_samples = make_windows(val_fs, cfg.window);
  const NormStats norm = compute_norm_stats(train_fs);

  auto model = std::make_unique<GraphModel>(cfg.model_id, data.series.d(), cfg.window.t1,
                                            cfg.window.t2, cfg.hyper, cfg.seed);
  model->set_norm_stats(norm);
  if (wants_city(aug)) {
    if (!ctx) throw std::invalid_argument("train: city augmentation needs a context provider");
    model->attach_projection(AuxScope::city, ctx->city_dim(), cfg.seed + 101);
  }
  if (wants_node(aug)) {
    if (!ctx) throw std::invalid_argument("train: node augmentation needs a context provider");
    model->attach_projection(AuxScope::node, ctx->node_dim(), cfg.seed + 202);
  }

  const auto specs = aux_specs_for(aug, cfg.designated_grid);
  const Tensor ahat = normalized_adjacency(augment_adjacency(data.grid.adjacency, specs));

  AdamState adam;
  adam.init(model->params());

  const bool use_mse = cfg.opt.loss == "mse";
  if (!use_mse && cfg.opt.loss != "mae")
    throw std::invalid_argument("unknown training loss '" + cfg.opt.loss + "'");

  std::vector<int64_t> train_idx(train_samples.size());
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::vector<int64_t> val_idx(val_samples.size());
  std::iota(val_idx.begin(), val_idx.end(), 0);

  const int64_t n = data.series.n();
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;
  int64_t since_best = 0;

  std::mt19937_64 dropout_rng(cfg.seed ^ 0x5deece66dULL);
  for (int64_t epoch = 1; epoch <= cfg.opt.max_epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(epoch));
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);

    double loss_sum = 0.0;
    int64_t loss_count = 0;
    for (int64_t lo = 0; lo < static_cast<int64_t>(train_idx.size()); lo += cfg.opt.batch_size) {
      const int64_t hi =
          std::min<int64_t>(static_cast<int64_t>(train_idx.size()), lo + cfg.opt.batch_size);
      GraphBatch b = assemble_batch(train_samples, train_idx, lo, hi, norm, cfg.window.t1,
                                    cfg.window.t2, true, ctx, aug);
      TapeRun run =
          model->run_tape(b, ahat, n, true, cfg.hyper.dropout > 0.0 ? &dropout_rng : nullptr);
      ad::Var loss = use_mse ? ad::mse_loss(run.pred_raw, b.targets_raw)
                             : ad::mae_loss(run.pred_raw, b.targets_raw);
      const double loss_val = loss->val(0);
      if (!std::isfinite(loss_val))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + " (model " + cfg.model_id + ", aug " +
                                 aug_mode_name(aug) + ")");
      ad::backward(loss);
      adam.step(model->params(), run.params, cfg.opt.lr);
      loss_sum += loss_val * static_cast<double>(hi - lo);
      loss_count += hi - lo;
    }

    MetricAccumulator val_acc;
    const auto preds = predict_block(*model, val_samples, val_idx, ahat, ctx, aug);
    for (size_t i = 0; i < val_samples.size(); ++i) val_acc.add(val_samples[i].y, preds[i], nullptr);
    const double val_mae = val_acc.mae();

    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(std::max<int64_t>(1, loss_count)), val_mae});

    if (val_mae < best_val - 1e-12) {
      best_val = val_mae;
      result.best_epoch = epoch;
      best_params.clear();
      for (const auto& p : model->params()) best_params.push_back(p.value);
      since_best = 0;
    } else if (++since_best >= cfg.opt.patience) {
      break;
    }
  }

  if (!best_params.empty()) {
    auto& params = model->params();
    for (size_t i = 0; i < params.size(); ++i) params[i].value = best_params[i];
  }
  result.model = std::move(model);
  return result;
}

// --------------------------------------------------------------------------
// Evaluation

EvalRow evaluate(Forecaster& model, const std::vector<Sample>& test_samples,
                 const Tensor& adjacency, int64_t designated_grid,
                 const std::set<int64_t>& event_days, const ContextProvider* ctx, AugMode aug) {
  if (test_samples.empty()) throw std::invalid_argument("evaluate: empty test set");
  const int64_t n = test_samples[0].x.dim(0);
  if (designated_grid < 0 || designated_grid >= n)
    throw std::invalid_argument("evaluate: designated grid out of range");

  std::vector<Tensor> preds;
  if (auto* gm = dynamic_cast<GraphModel*>(&model)) {
    const auto specs = aux_specs_for(aug, designated_grid);
    const Tensor ahat = normalized_adjacency(augment_adjacency(adjacency, specs));
    std::vector<int64_t> idxs(test_samples.size());
    std::iota(idxs.begin(), idxs.end(), 0);
    preds = predict_block(*gm, test_samples, idxs, ahat, ctx, aug);
  } else {
    preds.reserve(test_samples.size());
    for (const auto& s : test_samples) {
      ForwardMeta meta;
      meta.anchor_hour = s.anchor_hour;
      preds.push_back(model.forward(s.x, adjacency, meta));
    }
  }

  const std::vector<int64_t> grid_mask{designated_grid};
  MetricAccumulator all, grid, event, nonevent;
  for (size_t i = 0; i < test_samples.size(); ++i) {
    const Sample& s = test_samples[i];
    all.add(s.y, preds[i], nullptr);
    grid.add(s.y, preds[i], &grid_mask);
    if (event_days.count(timeutil::day_of_hour(s.anchor_hour))) {
      event.add(s.y, preds[i], &grid_mask);
    } else {
      nonevent.add(s.y, preds[i], nullptr);
    }
  }

  EvalRow row;
  row.model = model.id();
  row.variant = aug_mode_name(aug);
  row.mae_all = all.mae();
  row.rmse_all = all.rmse();
  row.mae_grid = grid.mae();
  row.rmse_grid = grid.rmse();
  if (event.count > 0) {
    row.has_event = true;
    row.mae_event_days = event.mae();
    row.rmse_event_days = event.rmse();
  }
  if (nonevent.count > 0) {
    row.has_nonevent = true;
    row.mae_all_nonevent = nonevent.mae();
    row.rmse_all_nonevent = nonevent.rmse();
  }
  return row;
}

// --------------------------------------------------------------------------
// Report

std::string EvalReport::to_csv() const {
  std::string s =
      "model,variant,mae_all,rmse_all,mae_grid,rmse_grid,mae_event_days,rmse_event_days\n";
  for (const auto& r : rows) {
    s += r.model + "," + r.variant + "," + format_double(r.mae_all) + "," +
         format_double(r.rmse_all) + "," + format_double(r.mae_grid) + "," +
         format_double(r.rmse_grid) + ",";
    s += r.has_event ? format_double(r.mae_event_days) : "";
    s += ",";
    s += r.has_event ? format_double(r.rmse_event_days) : "";
    s += "\n";
  }
  return s;
}

std::string EvalReport::to_json(const ExperimentConfig& cfg) const {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(cfg.canonical_json());
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["split"] = split_summary;
  j["notes"] = notes;
  nlohmann::json rws = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json rj;
    rj["model"] = r.model;
    rj["variant"] = r.variant;
    rj["mae_all"] = r.mae_all;
    rj["rmse_all"] = r.rmse_all;
    rj["mae_grid"] = r.mae_grid;
    rj["rmse_grid"] = r.rmse_grid;
    if (r.has_event) {
      rj["mae_event_days"] = r.mae_event_days;
      rj["rmse_event_days"] = r.rmse_event_days;
    }
    if (r.has_nonevent) {
      rj["mae_all_nonevent"] = r.mae_all_nonevent;
      rj["rmse_all_nonevent"] = r.rmse_all_nonevent;
    }
    rws.push_back(rj);
  }
  j["rows"] = rws;
  nlohmann::json curves_json = nlohmann::json::object();
  for (const auto& [variant, hist] : curves) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : hist)
      arr.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_mae", e.val_mae}});
    curves_json[variant] = arr;
  }
  j["curves"] = curves_json;
  return j.dump(2);
}

EvalReport run_comparison(const ExperimentConfig& cfg, const DataBundle& data) {
  std::vector<AugMode> variants = cfg.compare_variants;
  if (variants.empty()) variants = {cfg.aug};

  bool needs_ctx = false;
  for (AugMode v : variants)
    if (v != AugMode::none) needs_ctx = true;

  std::shared_ptr<EmbeddingBackend> backend =
      std::make_shared<OfflineBackend>(cfg.embed_dim, cfg.embed_seed);
  if (!cfg.cache_dir.empty()) backend = std::make_shared<CachedBackend>(backend, cfg.cache_dir);

  std::optional<ContextProvider> ctx;
  std::set<int64_t> event_days;
  for (const auto& e : data.events)
    if (e.grid == cfg.designated_grid) event_days.insert(e.day);
  if (needs_ctx) {
    ctx = ContextProvider::build(data, cfg.designated_grid, *backend, cfg.variance_target);
    event_days = ctx->event_days();
  }

  FlowSeries train_fs, val_fs, test_fs;
  split_series(data.series, data.split, train_fs, val_fs, test_fs);
  const auto test_samples = make_windows(test_fs, cfg.window);

  EvalReport report;
  report.config_hash = cfg.config_hash();
  report.seed = cfg.seed;
  report.split_summary = "train " + timeutil::format_day(data.split.train_start) + ".." +
                         timeutil::format_day(data.split.train_end) + ", val " +
                         timeutil::format_day(data.split.val_start) + ".." +
                         timeutil::format_day(data.split.val_end) + ", test " +
                         timeutil::format_day(data.split.test_start) + ".." +
                         timeutil::format_day(data.split.test_end);
  report.notes = {
      "metrics are computed on raw counts",
      "metrics average over every (node, feature, horizon) entry",
      "normalization statistics, PCA and early stopping use the train/val splits only",
      "event-day metrics cover test windows anchored inside an event day, masked to the "
      "designated grid"};

  auto run_variant = [&](AugMode aug, const std::string& variant_name) {
    TrainResult tr = train(cfg, aug, data, ctx ? &*ctx : nullptr);
    EvalRow row = evaluate(*tr.model, test_samples, data.grid.adjacency, cfg.designated_grid,
                           event_days, ctx ? &*ctx : nullptr, aug);
    row.variant = variant_name;
    report.rows.push_back(row);
    report.curves[variant_name] = tr.history;
  };

  run_variant(AugMode::none, "original");
  for (AugMode v : variants) run_variant(v, aug_mode_name(v));
  return report;
}

// --------------------------------------------------------------------------
// Synthetic benchmark

SynthSpec SynthSpec::defaults() {
  SynthSpec s;
  s.base_profile = {2, 1, 1, 1, 1, 2, 4, 8, 12, 10, 8, 7, 7, 8, 9, 10, 12, 14, 12, 9, 6, 4, 3, 2};
  for (auto& v : s.base_profile) v *= 2.0;
  s.week_factor = {1.0, 1.0, 1.0, 1.0, 1.0, 0.75, 0.6};
  // 8 event days inside the training range, 4 inside the test range.
  for (int64_t day : {2, 7, 12, 17, 22, 27, 32, 37, 49, 52, 55, 58})
    s.events.push_back({day, s.designated_grid, 2.5});
  return s;
}

void SynthSpec::validate() const {
  if (n_rows < 1 || n_cols < 1 || days < 3) throw std::invalid_argument("SynthSpec: too small");
  if (train_days + val_days + test_days != days)
    throw std::invalid_argument("SynthSpec: split days must sum to total days");
  if (base_profile.size() != 24 || week_factor.size() != 7)
    throw std::invalid_argument("SynthSpec: base_profile needs 24 entries, week_factor 7");
  if (noise_level < 0.0) throw std::invalid_argument("SynthSpec: negative noise");
  for (const auto& e : events) {
    if (e.multiplier <= 0.0) throw std::invalid_argument("SynthSpec: multiplier must be > 0");
    if (e.day < 0 || e.day >= days || e.grid < 0 || e.grid >= n_rows * n_cols)
      throw std::invalid_argument("SynthSpec: event outside grid/date range");
  }
}

DataBundle synth_generate(const SynthSpec& spec) {
  spec.validate();
  DataBundle data;
  data.grid.n_rows = spec.n_rows;
  data.grid.n_cols = spec.n_cols;
  data.grid.origin_lat = 40.65;
  data.grid.origin_lng = -74.0;
  data.grid.cell_size_m = 1000.0;
  data.grid.scheme = "rook4";
  data.grid.adjacency = build_adjacency(data.grid, data.grid.scheme);

  const int64_t n = spec.n_rows * spec.n_cols;
  const int64_t T = spec.days * 24;
  data.series.start_hour = spec.start_day * 24;
  data.series.feature_names = {"pickup", "dropoff"};
  data.series.values = Tensor({n, 2, T});

  std::map<int64_t, double> event_mult;  // day*n + grid -> multiplier
  for (const auto& e : spec.events) event_mult[e.day * n + e.grid] = e.multiplier;

  std::mt19937_64 rng(spec.seed);
  for (int64_t g = 0; g < n; ++g)
    for (int64_t f = 0; f < 2; ++f)
      for (int64_t t = 0; t < T; ++t) {
        const int64_t day = t / 24;
        const int64_t hod = (t % 24 + (f == 1 ? 23 : 0)) % 24;  // dropoff lags pickup by an hour
        const int weekday = timeutil::weekday_from_day(spec.start_day + day);
        double signal = spec.base_profile[static_cast<size_t>(hod)] *
                        spec.week_factor[static_cast<size_t>(weekday)];
        if (auto it = event_mult.find(day * n + g); it != event_mult.end()) signal *= it->second;
        double v = signal;
        if (spec.noise_level > 0.0) v = signal * (1.0 + spec.noise_level * gauss(rng));
        data.series.values(g, f, t) = std::max(0.0, v);
      }

  for (int64_t day = 0; day < spec.days; ++day) {
    CityDayInput in;
    in.weather = {0.0, 0.0, 15.0, 25.0, "clear"};
    data.city_days[spec.start_day + day] = in;
  }
  for (const auto& e : spec.events) {
    EventRecord r;
    r.day = spec.start_day + e.day;
    r.grid = e.grid;
    r.name = "an evening showcase";
    r.venue = "Synthetic Arena";
    r.start_time = "18:00";
    r.end_time = "22:00";
    data.events.push_back(r);
  }

  data.split.train_start = spec.start_day;
  data.split.train_end = spec.start_day + spec.train_days - 1;
  data.split.val_start = data.split.train_end + 1;
  data.split.val_end = data.split.val_start + spec.val_days - 1;
  data.split.test_start = data.split.val_end + 1;
  data.split.test_end = spec.start_day + spec.days - 1;
  return data;
}

// --------------------------------------------------------------------------
// Plotting

void plot_flows(const FlowSeries& series, const std::vector<int64_t>& grids, int64_t day_start,
                int64_t day_end, const std::string& csv_path, const std::string& svg_path) {
  if (grids.empty()) throw std::invalid_argument("plot_flows: no grids requested");
  if (day_end < day_start) throw std::invalid_argument("plot_flows: empty day range");
  const int64_t first_day = series.start_hour / 24;
  const int64_t last_day = (series.start_hour + series.hours()) / 24 - 1;
  if (day_start < first_day || day_end > last_day)
    throw std::invalid_argument("plot_flows: day range outside series");
  for (int64_t g : grids)
    if (g < 0 || g >= series.n())
      throw std::invalid_argument("plot_flows: grid index out of range");

  const int64_t h0 = day_start * 24 - series.start_hour;
  const int64_t hours = (day_end - day_start + 1) * 24;

  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "time,grid,feature,value\n";
  double vmax = 1.0;
  for (int64_t g : grids)
    for (int64_t f = 0; f < series.d(); ++f)
      for (int64_t t = 0; t < hours; ++t) {
        const double v = series.values(g, f, h0 + t);
        vmax = std::max(vmax, v);
        csv << timeutil::format_hour(series.start_hour + h0 + t) << "," << g << ","
            << series.feature_names[static_cast<size_t>(f)] << "," << format_double(v) << "\n";
      }

  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const double W = 960.0, H = 400.0, mx = 50.0, my = 30.0;
  std::ofstream svg(svg_path, std::ios::trunc);
  if (!svg) throw std::runtime_error("cannot write " + svg_path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"50\" y1=\"370\" x2=\"930\" y2=\"370\" stroke=\"black\"/>\n";
  svg << "<line x1=\"50\" y1=\"30\" x2=\"50\" y2=\"370\" stroke=\"black\"/>\n";
  int color = 0;
  char buf[64];
  for (int64_t g : grids)
    for (int64_t f = 0; f < series.d(); ++f) {
      svg << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 8] << "\" points=\"";
      for (int64_t t = 0; t < hours; ++t) {
        const double x = mx + (W - 2 * mx) * static_cast<double>(t) /
                                  static_cast<double>(std::max<int64_t>(1, hours - 1));
        const double y = (H - my) - (H - 2 * my) * series.values(g, f, h0 + t) / vmax;
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
        svg << buf;
      }
      svg << "\"/>\n";
      svg << "<text x=\"" << 60 + 160 * color << "\" y=\"20\" fill=\"" << kPalette[color % 8]
          << "\" font-size=\"12\">grid " << g << " "
          << series.feature_names[static_cast<size_t>(f)] << "</text>\n";
      ++color;
    }
  svg << "</svg>\n";
}

}  // namespace flowcast
