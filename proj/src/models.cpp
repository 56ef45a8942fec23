#include "flowcast/models.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "flowcast/rng.hpp"
#include "flowcast/timeutil.hpp"
#include "json.hpp"

namespace flowcast {

Tensor normalized_adjacency(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw std::invalid_argument("normalized_adjacency: matrix must be square");
  const int64_t n = a.dim(0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      const double v = a(i, j);
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("normalized_adjacency: entries must be finite and >= 0");
      if (v != a(j, i)) throw std::invalid_argument("normalized_adjacency: matrix not symmetric");
    }
  std::vector<double> inv_sqrt_deg(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double deg = 1.0;  // self-loop
    for (int64_t j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt_deg[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  Tensor out({n, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      const double aij = a(i, j) + (i == j ? 1.0 : 0.0);
      out(i, j) = aij * inv_sqrt_deg[static_cast<size_t>(i)] * inv_sqrt_deg[static_cast<size_t>(j)];
    }
  return out;
}

Tensor graph_propagate(const Tensor& h, const Tensor& a, const Tensor& w) {
  if (h.rank() != 2 || w.rank() != 2 || h.dim(1) != w.dim(0))
    throw std::invalid_argument("graph_propagate: shape mismatch");
  const Tensor ahat = normalized_adjacency(a);
  const int64_t n = h.dim(0), f = h.dim(1), fo = w.dim(1);
  if (ahat.dim(0) != n) throw std::invalid_argument("graph_propagate: node count mismatch");
  Tensor mixed({n, f});
  kern::graph_mix(ahat.data(), h.data(), mixed.data(), n, 1, f);
  Tensor out({n, fo});
  kern::matmul(mixed.data(), w.data(), out.data(), n, f, fo);
  return out;
}

NormStats compute_norm_stats(const FlowSeries& train) {
  const int64_t n = train.n(), d = train.d(), T = train.hours();
  NormStats ns;
  ns.mean.assign(static_cast<size_t>(d), 0.0);
  ns.stdev.assign(static_cast<size_t>(d), 1.0);
  for (int64_t f = 0; f < d; ++f) {
    double s = 0.0, s2 = 0.0;
    for (int64_t g = 0; g < n; ++g)
      for (int64_t t = 0; t < T; ++t) {
        const double v = train.values(g, f, t);
        s += v;
        s2 += v * v;
      }
    const double cnt = static_cast<double>(n * T);
    const double mean = s / cnt;
    const double var = std::max(0.0, s2 / cnt - mean * mean);
    ns.mean[static_cast<size_t>(f)] = mean;
    ns.stdev[static_cast<size_t>(f)] = var < 1e-12 ? 1.0 : std::sqrt(var);
  }
  return ns;
}

// --------------------------------------------------------------------------
// Naive references

static void check_forward_inputs(const Tensor& x, const Tensor& a) {
  if (x.rank() != 3) throw std::invalid_argument("forward: x must be [N x d x t1]");
  if (!x.all_finite() || !a.all_finite())
    throw std::invalid_argument("forward: non-finite values in inputs");
  if (a.rank() != 2 || a.dim(0) != a.dim(1) || a.dim(0) != x.dim(0))
    throw std::invalid_argument("forward: adjacency must be [N x N] matching x");
}

Tensor PersistenceModel::forward(const Tensor& x, const Tensor& a, const ForwardMeta&) {
  check_forward_inputs(x, a);
  const int64_t N = x.dim(0), d = x.dim(1), t1 = x.dim(2);
  Tensor y({N, d, t2_});
  for (int64_t i = 0; i < N; ++i)
    for (int64_t f = 0; f < d; ++f)
      for (int64_t t = 0; t < t2_; ++t) y(i, f, t) = x(i, f, t1 - 1);
  return y;
}

std::string PersistenceModel::checkpoint_json() const {
  nlohmann::json j;
  j["format"] = 1;
  j["architecture"] = "persistence";
  j["t2"] = t2_;
  return j.dump();
}

HistoricalAverageModel::HistoricalAverageModel(const FlowSeries& train, int64_t t2) : t2_(t2) {
  const int64_t n = train.n(), d = train.d(), T = train.hours();
  table_ = Tensor({n, d, 168});
  Tensor counts({168});
  for (int64_t t = 0; t < T; ++t) counts(timeutil::hour_of_week(train.start_hour + t)) += 1.0;
  for (int64_t g = 0; g < n; ++g)
    for (int64_t f = 0; f < d; ++f) {
      double overall = 0.0;
      for (int64_t t = 0; t < T; ++t) overall += train.values(g, f, t);
      overall /= static_cast<double>(T);
      for (int64_t t = 0; t < T; ++t)
        table_(g, f, timeutil::hour_of_week(train.start_hour + t)) += train.values(g, f, t);
      for (int64_t how = 0; how < 168; ++how) {
        if (counts(how) > 0.0)
          table_(g, f, how) /= counts(how);
        else
          table_(g, f, how) = overall;  // unseen slot: fall back to the overall mean
      }
    }
}

Tensor HistoricalAverageModel::forward(const Tensor& x, const Tensor& a, const ForwardMeta& meta) {
  check_forward_inputs(x, a);
  if (meta.anchor_hour < 0)
    throw std::invalid_argument("historical_average: forward requires the anchor hour");
  if (x.dim(0) != table_.dim(0) || x.dim(1) != table_.dim(1))
    throw std::invalid_argument("historical_average: node/feature count differs from fit");
  const int64_t N = x.dim(0), d = x.dim(1);
  Tensor y({N, d, t2_});
  for (int64_t t = 0; t < t2_; ++t) {
    const int64_t how = timeutil::hour_of_week(meta.anchor_hour + t);
    for (int64_t i = 0; i < N; ++i)
      for (int64_t f = 0; f < d; ++f) y(i, f, t) = table_(i, f, how);
  }
  return y;
}

std::string HistoricalAverageModel::checkpoint_json() const {
  nlohmann::json j;
  j["format"] = 1;
  j["architecture"] = "historical_average";
  j["t2"] = t2_;
  j["n"] = table_.dim(0);
  j["d"] = table_.dim(1);
  j["table"] = table_.vec();
  return j.dump();
}

// --------------------------------------------------------------------------
// GraphModel

GraphModel::GraphModel(std::string arch, int64_t d, int64_t t1, int64_t t2, Hyperparams hp,
                       uint64_t seed)
    : arch_(std::move(arch)), d_(d), t1_(t1), t2_(t2), hp_(hp), seed_(seed) {
  if (arch_ != "gcrnn" && arch_ != "stconv")
    throw std::invalid_argument("GraphModel: unknown architecture '" + arch_ + "'");
  if (d_ < 1 || t1_ < 1 || t2_ < 1 || hp_.hidden < 1)
    throw std::invalid_argument("GraphModel: bad dimensions");
  if (arch_ == "stconv") {
    if (hp_.conv_kernel < 1) throw std::invalid_argument("GraphModel: conv_kernel must be >= 1");
    if (t1_ < 2 * (hp_.conv_kernel - 1) + 1)
      throw std::invalid_argument("GraphModel: t1 too short for two K=" +
                                  std::to_string(hp_.conv_kernel) + " temporal convolutions");
  }
  norm_.mean.assign(static_cast<size_t>(d_), 0.0);
  norm_.stdev.assign(static_cast<size_t>(d_), 1.0);
  init_params(seed);
}

namespace {

Tensor glorot(std::mt19937_64& g, std::vector<int64_t> shape, int64_t fan_in, int64_t fan_out) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (int64_t i = 0; i < t.numel(); ++i) t(i) = uniform_range(g, -limit, limit);
  return t;
}

}  // namespace

void GraphModel::init_params(uint64_t seed) {
  std::mt19937_64 g(seed);
  const int64_t h = hp_.hidden;
  params_.clear();
  if (arch_ == "gcrnn") {
    const int64_t in = d_ + h;
    params_.push_back({"gru_w_update", glorot(g, {in, h}, in, h)});
    params_.push_back({"gru_b_update", Tensor({h})});
    params_.push_back({"gru_w_reset", glorot(g, {in, h}, in, h)});
    params_.push_back({"gru_b_reset", Tensor({h})});
    params_.push_back({"gru_w_cand", glorot(g, {in, h}, in, h)});
    params_.push_back({"gru_b_cand", Tensor({h})});
    params_.push_back({"readout_w", glorot(g, {h, d_ * t2_}, h, d_ * t2_)});
    params_.push_back({"readout_b", Tensor({d_ * t2_})});
  } else {
    const int64_t K = hp_.conv_kernel;
    const int64_t T2 = t1_ - 2 * (K - 1);
    params_.push_back({"tconv1_w", glorot(g, {h * d_ * K}, d_ * K, h)});
    params_.push_back({"tconv1_b", Tensor({h})});
    params_.push_back({"gconv_w", glorot(g, {h * h * 1}, h, h)});
    params_.push_back({"gconv_b", Tensor({h})});
    params_.push_back({"tconv2_w", glorot(g, {h * h * K}, h * K, h)});
    params_.push_back({"tconv2_b", Tensor({h})});
    params_.push_back({"readout_w", glorot(g, {h * T2, d_ * t2_}, h * T2, d_ * t2_)});
    params_.push_back({"readout_b", Tensor({d_ * t2_})});
  }
  arch_param_count_ = static_cast<int64_t>(params_.size());
}

void GraphModel::attach_projection(AuxScope scope, int64_t d_ctx, uint64_t seed) {
  if (scope == AuxScope::city && has_node_)
    throw std::logic_error("attach_projection: city stack must be attached before node stack");
  if ((scope == AuxScope::city && has_city_) || (scope == AuxScope::node && has_node_))
    throw std::logic_error("attach_projection: stack already attached");
  ProjectionStack s =
      ProjectionStack::make(d_, t1_, d_ctx, parse_activation(hp_.proj_activation), seed);
  const std::string prefix = scope == AuxScope::city ? "proj_city_" : "proj_node_";
  for (int64_t i = 0; i < t1_; ++i) {
    params_.push_back({prefix + "w" + std::to_string(i), std::move(s.weights[static_cast<size_t>(i)])});
    params_.push_back({prefix + "b" + std::to_string(i), std::move(s.biases[static_cast<size_t>(i)])});
  }
  if (scope == AuxScope::city) {
    has_city_ = true;
    city_ctx_dim_ = d_ctx;
  } else {
    has_node_ = true;
    node_ctx_dim_ = d_ctx;
  }
}

bool GraphModel::has_projection(AuxScope scope) const {
  return scope == AuxScope::city ? has_city_ : has_node_;
}

std::vector<AuxScope> GraphModel::aux_scopes() const {
  std::vector<AuxScope> s;
  if (has_city_) s.push_back(AuxScope::city);
  if (has_node_) s.push_back(AuxScope::node);
  return s;
}

ProjectionStack GraphModel::projection(AuxScope scope) const {
  if (!has_projection(scope)) throw std::logic_error("projection: stack not attached");
  ProjectionStack view;
  view.d = d_;
  view.t1 = t1_;
  view.d_ctx = scope == AuxScope::city ? city_ctx_dim_ : node_ctx_dim_;
  view.act = parse_activation(hp_.proj_activation);
  int64_t base = arch_param_count_;
  if (scope == AuxScope::node && has_city_) base += 2 * t1_;
  for (int64_t i = 0; i < t1_; ++i) {
    view.weights.push_back(params_[static_cast<size_t>(base + 2 * i)].value);
    view.biases.push_back(params_[static_cast<size_t>(base + 2 * i + 1)].value);
  }
  return view;
}

std::vector<ad::Var> GraphModel::arch_forward(const std::vector<ad::Var>& frames,
                                              const Tensor& ahat, int64_t batch,
                                              const std::vector<ad::Var>& pv,
                                              std::mt19937_64* dropout_rng) {
  const int64_t h = hp_.hidden;
  ad::Var penultimate;
  if (arch_ == "gcrnn") {
    const int64_t rows = frames[0]->val.dim(0);
    ad::Var H = ad::constant(Tensor({rows, h}));
    for (int64_t t = 0; t < t1_; ++t) {
      const ad::Var& f = frames[static_cast<size_t>(t)];
      auto mixed = ad::graph_mix(ahat, ad::concat_cols(f, H), batch);
      auto z = ad::activation(ad::bias_add(ad::matmul(mixed, pv[0]), pv[1]),
                              kern::Unary::sigmoid_);
      auto r = ad::activation(ad::bias_add(ad::matmul(mixed, pv[2]), pv[3]),
                              kern::Unary::sigmoid_);
      auto mixed2 = ad::graph_mix(ahat, ad::concat_cols(f, ad::mul(r, H)), batch);
      auto cand = ad::activation(ad::bias_add(ad::matmul(mixed2, pv[4]), pv[5]),
                                 kern::Unary::tanh_);
      H = ad::add(ad::mul(z, H), ad::mul(ad::affine(z, -1.0, 1.0), cand));
    }
    penultimate = H;
  } else {
    const int64_t K = hp_.conv_kernel;
    const int64_t T1 = t1_ - K + 1;
    auto stacked = ad::stack_frames(frames);
    auto c1 = ad::activation(ad::conv_time(stacked, pv[0], pv[1], d_, t1_, K),
                             kern::Unary::relu_);
    auto g1 = ad::graph_mix(ahat, c1, batch);
    auto g2 = ad::activation(ad::conv_time(g1, pv[2], pv[3], h, T1, 1), kern::Unary::relu_);
    auto c2 = ad::activation(ad::conv_time(g2, pv[4], pv[5], h, T1, K), kern::Unary::relu_);
    penultimate = c2;
  }

  if (dropout_rng && hp_.dropout > 0.0) {
    const double p = hp_.dropout;
    Tensor mask(penultimate->val.shape());
    for (int64_t i = 0; i < mask.numel(); ++i)
      mask(i) = uniform01(*dropout_rng) < p ? 0.0 : 1.0 / (1.0 - p);
    penultimate = ad::mul_const(penultimate, mask);
  }
  auto pred = ad::bias_add(ad::matmul(penultimate, pv[6]), pv[7]);
  return {pred};
}

TapeRun GraphModel::run_tape(const GraphBatch& b, const Tensor& ahat, int64_t keep,
                             bool with_grad, std::mt19937_64* dropout_rng) {
  if (static_cast<int64_t>(b.frames.size()) != t1_)
    throw std::invalid_argument("run_tape: expected t1 frames");
  TapeRun run;
  run.params.reserve(params_.size());
  for (const auto& p : params_) run.params.push_back(ad::leaf(p.value, with_grad));

  // Auxiliary feature columns, city stack first.
  // A stack contributes an aux node only when its context tensor is present;
  // an empty tensor means the caller pre-augmented the feature rows (the
  // adjacency node-count check below still guards against mismatches).
  std::vector<std::vector<ad::Var>> aux_per_t(static_cast<size_t>(t1_));
  int64_t aux_n = 0;
  auto add_stack = [&](bool attached, const Tensor& ctx, int64_t pbase, const char* what) {
    if (ctx.empty()) return;
    if (!attached)
      throw std::invalid_argument(std::string("run_tape: ") + what +
                                  " context given but no stack attached");
    if (ctx.dim(0) != b.batch)
      throw std::invalid_argument("run_tape: context batch mismatch");
    auto cvar = ad::constant(ctx);
    std::vector<ad::Var> ws, bs;
    for (int64_t i = 0; i < t1_; ++i) {
      ws.push_back(run.params[static_cast<size_t>(pbase + 2 * i)]);
      bs.push_back(run.params[static_cast<size_t>(pbase + 2 * i + 1)]);
    }
    auto cols = project_context_batch(cvar, ws, bs, parse_activation(hp_.proj_activation));
    for (int64_t t = 0; t < t1_; ++t) aux_per_t[static_cast<size_t>(t)].push_back(cols[static_cast<size_t>(t)]);
    ++aux_n;
  };
  add_stack(has_city_, b.ctx_city, arch_param_count_, "city");
  add_stack(has_node_, b.ctx_node, arch_param_count_ + (has_city_ ? 2 * t1_ : 0), "node");

  const int64_t N = b.n_base + aux_n;
  if (ahat.dim(0) != N)
    throw std::invalid_argument("run_tape: ahat node count " + std::to_string(ahat.dim(0)) +
                                " != " + std::to_string(N));
  if (keep < 1 || keep > N) throw std::invalid_argument("run_tape: bad keep");

  std::vector<ad::Var> frames;
  frames.reserve(static_cast<size_t>(t1_));
  for (int64_t t = 0; t < t1_; ++t)
    frames.push_back(ad::assemble_frame(b.frames[static_cast<size_t>(t)],
                                        aux_per_t[static_cast<size_t>(t)], b.batch, b.n_base));

  auto outs = arch_forward(frames, ahat, b.batch, run.params, dropout_rng);
  auto kept = ad::select_rows_block(outs[0], N, keep);

  Tensor scale({d_ * t2_}), shift({d_ * t2_});
  for (int64_t f = 0; f < d_; ++f)
    for (int64_t t = 0; t < t2_; ++t) {
      scale(f * t2_ + t) = norm_.stdev[static_cast<size_t>(f)];
      shift(f * t2_ + t) = norm_.mean[static_cast<size_t>(f)];
    }
  run.pred_raw = ad::colwise_affine(kept, scale, shift);
  return run;
}

Tensor GraphModel::forward(const Tensor& x, const Tensor& a, const ForwardMeta& meta) {
  check_forward_inputs(x, a);
  const int64_t N = x.dim(0);
  if (x.dim(1) != d_ || x.dim(2) != t1_)
    throw std::invalid_argument("forward: x must be [N x " + std::to_string(d_) + " x " +
                                std::to_string(t1_) + "]");
  if (meta.aux_count < 0 || meta.aux_count >= N)
    throw std::invalid_argument("forward: bad aux_count");
  const int64_t n_orig = N - meta.aux_count;

  GraphBatch b;
  b.batch = 1;
  b.n_base = N;
  b.frames.reserve(static_cast<size_t>(t1_));
  for (int64_t t = 0; t < t1_; ++t) {
    Tensor f({N, d_});
    for (int64_t i = 0; i < N; ++i)
      for (int64_t c = 0; c < d_; ++c) {
        const double v = x(i, c, t);
        // Aux feature rows are learned projections, not counts; they pass
        // through unnormalized.
        f(i, c) = i < n_orig
                      ? (v - norm_.mean[static_cast<size_t>(c)]) / norm_.stdev[static_cast<size_t>(c)]
                      : v;
      }
    b.frames.push_back(std::move(f));
  }

  const Tensor ahat = normalized_adjacency(a);
  TapeRun run = run_tape(b, ahat, N, false);
  Tensor y({N, d_, t2_});
  for (int64_t i = 0; i < N; ++i)
    for (int64_t f = 0; f < d_; ++f)
      for (int64_t t = 0; t < t2_; ++t) y(i, f, t) = run.pred_raw->val(i, f * t2_ + t);
  return y;
}

std::string GraphModel::checkpoint_json() const {
  nlohmann::json j;
  j["format"] = 1;
  j["architecture"] = arch_;
  j["d"] = d_;
  j["t1"] = t1_;
  j["t2"] = t2_;
  j["seed"] = seed_;
  j["hyper"] = {{"hidden", hp_.hidden},
                {"conv_kernel", hp_.conv_kernel},
                {"dropout", hp_.dropout},
                {"proj_activation", hp_.proj_activation}};
  j["norm"] = {{"mean", norm_.mean}, {"stdev", norm_.stdev}};
  j["has_city"] = has_city_;
  j["has_node"] = has_node_;
  j["city_ctx_dim"] = city_ctx_dim_;
  j["node_ctx_dim"] = node_ctx_dim_;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : params_) {
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"data", p.value.vec()}});
  }
  j["params"] = params;
  return j.dump();
}

// --------------------------------------------------------------------------
// Checkpoint IO

void Forecaster::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << checkpoint_json() << "\n";
}

std::unique_ptr<Forecaster> forecaster_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  const std::string arch = j.at("architecture").get<std::string>();
  if (arch == "persistence") return std::make_unique<PersistenceModel>(j.value("t2", 1));
  if (arch == "historical_average") {
    Tensor table = Tensor::from({j.at("n").get<int64_t>(), j.at("d").get<int64_t>(), 168},
                                j.at("table").get<std::vector<double>>());
    return std::make_unique<HistoricalAverageModel>(std::move(table), j.value("t2", 1));
  }
  Hyperparams hp;
  hp.hidden = j.at("hyper").at("hidden").get<int64_t>();
  hp.conv_kernel = j.at("hyper").at("conv_kernel").get<int64_t>();
  hp.dropout = j.at("hyper").at("dropout").get<double>();
  hp.proj_activation = j.at("hyper").at("proj_activation").get<std::string>();
  auto m = std::make_unique<GraphModel>(arch, j.at("d").get<int64_t>(), j.at("t1").get<int64_t>(),
                                        j.at("t2").get<int64_t>(), hp, j.at("seed").get<uint64_t>());
  if (j.value("has_city", false)) m->attach_projection(AuxScope::city, j.at("city_ctx_dim").get<int64_t>(), 0);
  if (j.value("has_node", false)) m->attach_projection(AuxScope::node, j.at("node_ctx_dim").get<int64_t>(), 0);
  NormStats ns;
  ns.mean = j.at("norm").at("mean").get<std::vector<double>>();
  ns.stdev = j.at("norm").at("stdev").get<std::vector<double>>();
  m->set_norm_stats(std::move(ns));
  auto& params = m->params();
  const auto& jp = j.at("params");
  if (jp.size() != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (jp[i].at("name").get<std::string>() != params[i].name)
      throw std::runtime_error("checkpoint: parameter order mismatch at " + params[i].name);
    params[i].value = Tensor::from(jp[i].at("shape").get<std::vector<int64_t>>(),
                                   jp[i].at("data").get<std::vector<double>>());
  }
  return m;
}

std::unique_ptr<Forecaster> load_forecaster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return forecaster_from_json(text);
}

std::unique_ptr<Forecaster> make_forecaster(const std::string& arch, int64_t d, int64_t t1,
                                            int64_t t2, const Hyperparams& hp, uint64_t seed,
                                            const FlowSeries* train_split) {
  if (arch == "persistence") return std::make_unique<PersistenceModel>(t2);
  if (arch == "historical_average") {
    if (!train_split)
      throw std::invalid_argument("historical_average requires a training split to fit");
    return std::make_unique<HistoricalAverageModel>(*train_split, t2);
  }
  return std::make_unique<GraphModel>(arch, d, t1, t2, hp, seed);
}

}  // namespace flowcast
