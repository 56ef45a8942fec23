// flowcast CLI: ingest -> embed -> reduce -> train/compare -> plot/report.
// Every run writes a manifest.json into its --out-dir recording the effective
// configuration, input digests and produced artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowcast/context.hpp"
#include "flowcast/core.hpp"
#include "flowcast/experiment.hpp"
#include "flowcast/ingest.hpp"
#include "flowcast/models.hpp"
#include "flowcast/pca.hpp"
#include "flowcast/sha256.hpp"
#include "flowcast/timeutil.hpp"
#include "flowcast/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace flowcast;

namespace {

struct Options {
  // global
  uint64_t seed = 42;
  std::string out_dir = "out";
  std::string backend = "offline";
  int64_t embed_dim = 64;
  uint64_t embed_seed = 0;
  bool use_synth = false;

  // dataset inputs
  std::string data_dir;
  std::string trips_csv;
  std::string city_jsonl;
  std::string events_jsonl;
  std::string cache_dir;

  // ingest grid geometry
  double origin_lat = 40.65;
  double origin_lng = -74.0;
  double cell_size_m = 1000.0;
  int64_t grid_rows = 13;
  int64_t grid_cols = 13;
  std::string scheme = "rook4";
  int64_t tz_offset_min = 0;

  // synth spec
  int64_t synth_rows = 4, synth_cols = 4, synth_days = 60;
  double synth_noise = 0.1;
  double synth_multiplier = 2.5;
  int64_t synth_target = 5;

  // experiment
  std::string model = "gcrnn";
  std::string aug = "node";
  int64_t designated_grid = -1;
  int64_t t1 = 6, t2 = 1, stride = 1;
  int64_t hidden = 24;
  int64_t conv_kernel = 3;
  double dropout = 0.0;
  std::string proj_activation = "tanh";
  double lr = 0.01;
  int64_t batch_size = 64;
  int64_t max_epochs = 25;
  int64_t patience = 5;
  std::string loss = "mae";
  double variance_target = 0.95;
  std::string split = "fractions";  // fractions | weeks-14-2-4
  double train_frac = 0.7, val_frac = 0.15;

  // remote backend
  std::string remote_url = "https://api.example.com";
  std::string remote_model = "text-embedding-3-small";

  // plot
  std::string plot_grids = "0";
  std::string plot_day_start;  // YYYY-MM-DD, default series start
  int64_t plot_days = 3;

  // report
  std::vector<std::string> report_inputs;

  // train checkpoint output name
  std::string checkpoint = "checkpoint.json";
};

struct Manifest {
  std::string subcommand;
  nlohmann::json config;
  std::map<std::string, std::string> input_digests;
  std::vector<std::string> artifacts;
  uint64_t seed = 0;
};

void write_manifest(const std::string& out_dir, const Manifest& m) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["subcommand"] = m.subcommand;
  j["config"] = m.config;
  j["input_digests"] = m.input_digests;
  j["artifacts"] = m.artifacts;
  j["seed"] = m.seed;
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << j.dump(2) << "\n";
}

nlohmann::json config_snapshot(const Options& o) {
  nlohmann::json j;
  j["seed"] = o.seed;
  j["out_dir"] = o.out_dir;
  j["backend"] = o.backend;
  j["embed_dim"] = o.embed_dim;
  j["embed_seed"] = o.embed_seed;
  j["synth"] = o.use_synth;
  j["data_dir"] = o.data_dir;
  j["model"] = o.model;
  j["aug"] = o.aug;
  j["designated_grid"] = o.designated_grid;
  j["window"] = {{"t1", o.t1}, {"t2", o.t2}, {"stride", o.stride}};
  j["hyper"] = {{"hidden", o.hidden},
                {"conv_kernel", o.conv_kernel},
                {"dropout", o.dropout},
                {"proj_activation", o.proj_activation}};
  j["opt"] = {{"lr", o.lr},
              {"batch_size", o.batch_size},
              {"max_epochs", o.max_epochs},
              {"patience", o.patience},
              {"loss", o.loss}};
  j["variance_target"] = o.variance_target;
  j["split"] = o.split;
  j["train_frac"] = o.train_frac;
  j["val_frac"] = o.val_frac;
  j["synth_spec"] = {{"rows", o.synth_rows},     {"cols", o.synth_cols},
                     {"days", o.synth_days},     {"noise", o.synth_noise},
                     {"multiplier", o.synth_multiplier}, {"target_grid", o.synth_target}};
  return j;
}

std::shared_ptr<EmbeddingBackend> make_backend(const Options& o) {
  std::shared_ptr<EmbeddingBackend> inner;
  if (o.backend == "offline") {
    inner = std::make_shared<OfflineBackend>(o.embed_dim, o.embed_seed);
  } else if (o.backend == "remote") {
    RemoteBackendConfig cfg;
    cfg.base_url = o.remote_url;
    cfg.model = o.remote_model;
    inner = std::make_shared<RemoteBackend>(cfg);
  } else {
    throw std::runtime_error("unknown backend '" + o.backend + "' (offline|remote)");
  }
  if (!o.cache_dir.empty()) return std::make_shared<CachedBackend>(inner, o.cache_dir);
  return inner;
}

SynthSpec synth_spec_from(const Options& o) {
  SynthSpec spec = SynthSpec::defaults();
  spec.seed = o.seed;
  spec.noise_level = o.synth_noise;
  if (o.synth_rows != 4 || o.synth_cols != 4 || o.synth_days != 60 || o.synth_target != 5 ||
      o.synth_multiplier != 2.5) {
    spec.n_rows = o.synth_rows;
    spec.n_cols = o.synth_cols;
    spec.days = o.synth_days;
    spec.designated_grid = o.synth_target;
    spec.train_days = static_cast<int64_t>(spec.days * 0.7);
    spec.val_days = std::max<int64_t>(1, static_cast<int64_t>(spec.days * 0.1));
    spec.test_days = spec.days - spec.train_days - spec.val_days;
    spec.events.clear();
    // Events every 5th day starting at day 2, bounded to the date range.
    for (int64_t day = 2; day < spec.days; day += 5)
      spec.events.push_back({day, spec.designated_grid, o.synth_multiplier});
  } else {
    for (auto& e : spec.events) e.multiplier = o.synth_multiplier;
  }
  return spec;
}

DataBundle load_bundle(const Options& o, Manifest& manifest) {
  DataBundle data;
  if (o.use_synth) {
    data = synth_generate(synth_spec_from(o));
    return data;
  }
  if (o.data_dir.empty()) throw std::runtime_error("--data is required (or pass --synth)");
  load_flow_series(o.data_dir, data.series, data.grid);
  manifest.input_digests[o.data_dir + "/values.f64"] =
      sha256_file_hex((fs::path(o.data_dir) / "values.f64").string());
  manifest.input_digests[o.data_dir + "/meta.json"] =
      sha256_file_hex((fs::path(o.data_dir) / "meta.json").string());

  const std::string city_path =
      !o.city_jsonl.empty() ? o.city_jsonl : (fs::path(o.data_dir) / "city.jsonl").string();
  if (fs::exists(city_path)) {
    data.city_days = load_city_jsonl(city_path);
    manifest.input_digests[city_path] = sha256_file_hex(city_path);
  }
  const std::string events_path =
      !o.events_jsonl.empty() ? o.events_jsonl : (fs::path(o.data_dir) / "events.jsonl").string();
  if (fs::exists(events_path)) {
    data.events = load_events_jsonl(events_path);
    manifest.input_digests[events_path] = sha256_file_hex(events_path);
  }

  const int64_t first_day = data.series.start_hour / 24;
  const int64_t total_days = data.series.hours() / 24;
  if (o.split == "weeks-14-2-4") {
    data.split = SplitSpec::weeks_14_2_4(first_day);
  } else if (o.split == "fractions") {
    data.split = SplitSpec::fractions(first_day, total_days, o.train_frac, o.val_frac);
  } else {
    throw std::runtime_error("unknown split mode '" + o.split + "' (fractions|weeks-14-2-4)");
  }
  return data;
}

ExperimentConfig experiment_config_from(const Options& o, const DataBundle& data) {
  ExperimentConfig cfg;
  cfg.model_id = o.model;
  cfg.hyper.hidden = o.hidden;
  cfg.hyper.conv_kernel = o.conv_kernel;
  cfg.hyper.dropout = o.dropout;
  cfg.hyper.proj_activation = o.proj_activation;
  cfg.window = {o.t1, o.t2, o.stride};
  if (o.aug == "all") {
    cfg.aug = AugMode::node;
    cfg.compare_variants = {AugMode::city, AugMode::node, AugMode::both};
  } else {
    cfg.aug = parse_aug_mode(o.aug);
  }
  cfg.designated_grid = o.designated_grid >= 0 ? o.designated_grid
                        : (o.use_synth ? synth_spec_from(o).designated_grid : 0);
  if (cfg.designated_grid >= data.series.n())
    throw std::runtime_error("designated grid out of range");
  cfg.opt.lr = o.lr;
  cfg.opt.batch_size = o.batch_size;
  cfg.opt.max_epochs = o.max_epochs;
  cfg.opt.patience = o.patience;
  cfg.opt.loss = o.loss;
  cfg.seed = o.seed;
  cfg.embed_dim = o.embed_dim;
  cfg.embed_seed = o.embed_seed;
  cfg.variance_target = o.variance_target;
  cfg.cache_dir = o.cache_dir;
  return cfg;
}

void save_bundle_dataset(const DataBundle& data, const std::string& dir,
                         std::vector<std::string>& artifacts) {
  save_flow_series(dir, data.series, data.grid);
  save_city_jsonl((fs::path(dir) / "city.jsonl").string(), data.city_days);
  save_events_jsonl((fs::path(dir) / "events.jsonl").string(), data.events);
  artifacts.push_back(dir + "/values.f64");
  artifacts.push_back(dir + "/meta.json");
  artifacts.push_back(dir + "/city.jsonl");
  artifacts.push_back(dir + "/events.jsonl");
}

void write_history_jsonl(const std::string& path, const std::vector<EpochLog>& hist) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& e : hist) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_mae"] = e.val_mae;
    out << j.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "ingest";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  if (o.trips_csv.empty()) throw std::runtime_error("--trips is required");
  if (!fs::exists(o.trips_csv)) throw std::runtime_error("trips file not found: " + o.trips_csv);
  manifest.input_digests[o.trips_csv] = sha256_file_hex(o.trips_csv);

  GraphSpec grid;
  grid.origin_lat = o.origin_lat;
  grid.origin_lng = o.origin_lng;
  grid.cell_size_m = o.cell_size_m;
  grid.n_rows = o.grid_rows;
  grid.n_cols = o.grid_cols;
  grid.scheme = o.scheme;
  grid.adjacency = build_adjacency(grid, grid.scheme);

  IngestReport report;
  FlowSeries fs_all = ingest_csv(o.trips_csv, grid, report, 0, 0, o.tz_offset_min);

  // Trim to whole days so the split logic can consume the output directly.
  const int64_t day0 = (fs_all.start_hour + 23) / 24;
  const int64_t day1 = (fs_all.start_hour + fs_all.hours()) / 24;
  if (day1 <= day0) throw std::runtime_error("ingested data covers less than one whole day");
  FlowSeries fs_days;
  fs_days.start_hour = day0 * 24;
  fs_days.feature_names = fs_all.feature_names;
  const int64_t off = day0 * 24 - fs_all.start_hour;
  fs_days.values = Tensor({fs_all.n(), fs_all.d(), (day1 - day0) * 24});
  for (int64_t g = 0; g < fs_all.n(); ++g)
    for (int64_t f = 0; f < fs_all.d(); ++f)
      for (int64_t t = 0; t < fs_days.hours(); ++t)
        fs_days.values(g, f, t) = fs_all.values(g, f, off + t);

  fs::create_directories(o.out_dir);
  save_flow_series(o.out_dir, fs_days, grid);
  {
    std::ofstream rep(fs::path(o.out_dir) / "ingest_report.json", std::ios::trunc);
    rep << report.to_json() << "\n";
  }
  manifest.artifacts = {o.out_dir + "/values.f64", o.out_dir + "/meta.json",
                        o.out_dir + "/ingest_report.json"};
  write_manifest(o.out_dir, manifest);
  std::cout << "ingested " << report.total << " records -> " << fs_days.n() << " grids x "
            << fs_days.hours() << " hours; kept " << report.kept << " legs, out_of_bounds "
            << report.out_of_bounds << ", unparseable " << report.unparseable << "\n";
  if (report.skip_warning)
    std::cout << "warning: more than 1% of records were unparseable\n";
  return 0;
}

int cmd_synth(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "synth";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  DataBundle data = synth_generate(synth_spec_from(o));
  save_bundle_dataset(data, o.out_dir, manifest.artifacts);
  write_manifest(o.out_dir, manifest);
  std::cout << "synthetic dataset: " << data.series.n() << " grids x " << data.series.hours()
            << " hours at " << o.out_dir << "\n";
  return 0;
}

int cmd_embed(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "embed";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  Options opts = o;
  if (opts.cache_dir.empty()) opts.cache_dir = (fs::path(o.out_dir) / "embed-cache").string();
  DataBundle data = load_bundle(opts, manifest);
  const int64_t designated =
      opts.designated_grid >= 0 ? opts.designated_grid
                                : (opts.use_synth ? synth_spec_from(opts).designated_grid : 0);

  auto backend = make_backend(opts);
  auto* cached = dynamic_cast<CachedBackend*>(backend.get());
  const auto texts = enumerate_context_texts(data, designated);
  int64_t dim = 0;
  for (const auto& [scope, text] : texts) {
    const auto v = backend->embed(text);
    dim = static_cast<int64_t>(v.size());
  }
  nlohmann::json stats;
  stats["requests"] = texts.size();
  stats["hits"] = cached ? cached->hits() : 0;
  stats["misses"] = cached ? cached->misses() : 0;
  stats["dim"] = dim;
  stats["cache_dir"] = opts.cache_dir;
  fs::create_directories(o.out_dir);
  {
    std::ofstream out(fs::path(o.out_dir) / "embed_stats.json", std::ios::trunc);
    out << stats.dump(2) << "\n";
  }
  manifest.artifacts = {o.out_dir + "/embed_stats.json"};
  write_manifest(o.out_dir, manifest);
  std::cout << "embedded " << texts.size() << " texts, dim " << dim;
  if (cached) std::cout << " (cache hits " << cached->hits() << ", misses " << cached->misses() << ")";
  std::cout << "\n";
  return 0;
}

int cmd_reduce(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "reduce";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  DataBundle data = load_bundle(o, manifest);
  const int64_t designated =
      o.designated_grid >= 0 ? o.designated_grid
                             : (o.use_synth ? synth_spec_from(o).designated_grid : 0);
  auto backend = make_backend(o);
  ContextProvider ctx = ContextProvider::build(data, designated, *backend, o.variance_target);
  fs::create_directories(o.out_dir);
  ctx.city_pca().save((fs::path(o.out_dir) / "pca_city.json").string());
  ctx.node_pca().save((fs::path(o.out_dir) / "pca_node.json").string());
  manifest.artifacts = {o.out_dir + "/pca_city.json", o.out_dir + "/pca_node.json"};
  write_manifest(o.out_dir, manifest);
  std::cout << "pca: city " << ctx.city_pca().d_input << " -> " << ctx.city_dim() << ", node "
            << ctx.node_pca().d_input << " -> " << ctx.node_dim() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "train";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  DataBundle data = load_bundle(o, manifest);
  ExperimentConfig cfg = experiment_config_from(o, data);

  std::optional<ContextProvider> ctx;
  if (cfg.aug != AugMode::none) {
    auto backend = make_backend(o);
    ctx = ContextProvider::build(data, cfg.designated_grid, *backend, cfg.variance_target);
  }
  TrainResult tr = train(cfg, cfg.aug, data, ctx ? &*ctx : nullptr);

  fs::create_directories(o.out_dir);
  const std::string ckpt = (fs::path(o.out_dir) / o.checkpoint).string();
  tr.model->save(ckpt);
  write_history_jsonl((fs::path(o.out_dir) / "training_log.jsonl").string(), tr.history);
  manifest.artifacts = {ckpt, o.out_dir + "/training_log.jsonl"};
  write_manifest(o.out_dir, manifest);
  std::cout << "trained " << cfg.model_id << " (aug " << aug_mode_name(cfg.aug) << "), "
            << tr.history.size() << " epochs";
  if (tr.best_epoch >= 0) std::cout << ", best epoch " << tr.best_epoch;
  std::cout << "; checkpoint at " << ckpt << "\n";
  return 0;
}

int cmd_compare(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "compare";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  DataBundle data = load_bundle(o, manifest);
  Options opts = o;
  if (opts.cache_dir.empty() && opts.use_synth)
    opts.cache_dir = (fs::path(o.out_dir) / "embed-cache").string();
  ExperimentConfig cfg = experiment_config_from(opts, data);

  if (o.use_synth) {
    save_bundle_dataset(data, (fs::path(o.out_dir) / "dataset").string(), manifest.artifacts);
  }
  EvalReport report = run_comparison(cfg, data);

  fs::create_directories(o.out_dir);
  const std::string csv_path = (fs::path(o.out_dir) / "report.csv").string();
  const std::string json_path = (fs::path(o.out_dir) / "report.json").string();
  {
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << report.to_csv();
  }
  {
    std::ofstream js(json_path, std::ios::trunc);
    js << report.to_json(cfg) << "\n";
  }
  manifest.artifacts.push_back(csv_path);
  manifest.artifacts.push_back(json_path);
  for (const auto& [variant, hist] : report.curves) {
    const std::string p = (fs::path(o.out_dir) / ("train_" + variant + ".log.jsonl")).string();
    write_history_jsonl(p, hist);
    manifest.artifacts.push_back(p);
  }
  write_manifest(o.out_dir, manifest);
  std::cout << report.to_csv();
  return 0;
}

int cmd_plot(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "plot";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  DataBundle data = load_bundle(o, manifest);

  std::vector<int64_t> grids;
  {
    std::string cur;
    for (char c : o.plot_grids + ",") {
      if (c == ',') {
        if (!cur.empty()) grids.push_back(std::stoll(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
  }
  const int64_t first_day = data.series.start_hour / 24;
  const int64_t day_start =
      o.plot_day_start.empty() ? first_day : timeutil::parse_date(o.plot_day_start);
  const int64_t day_end = day_start + o.plot_days - 1;

  fs::create_directories(o.out_dir);
  const std::string csv_path = (fs::path(o.out_dir) / "flows.csv").string();
  const std::string svg_path = (fs::path(o.out_dir) / "flows.svg").string();
  plot_flows(data.series, grids, day_start, day_end, csv_path, svg_path);
  manifest.artifacts = {csv_path, svg_path};
  write_manifest(o.out_dir, manifest);
  std::cout << "wrote " << csv_path << " and " << svg_path << "\n";
  return 0;
}

int cmd_report(const Options& o) {
  Manifest manifest;
  manifest.subcommand = "report";
  manifest.seed = o.seed;
  manifest.config = config_snapshot(o);
  if (o.report_inputs.empty()) throw std::runtime_error("--inputs is required");
  std::string merged =
      "seed,model,variant,mae_all,rmse_all,mae_grid,rmse_grid,mae_event_days,rmse_event_days\n";
  for (const auto& path : o.report_inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read report " + path);
    manifest.input_digests[path] = sha256_file_hex(path);
    nlohmann::json j = nlohmann::json::parse(in);
    const uint64_t seed = j.at("seed").get<uint64_t>();
    for (const auto& r : j.at("rows")) {
      merged += std::to_string(seed) + "," + r.at("model").get<std::string>() + "," +
                r.at("variant").get<std::string>() + "," +
                format_double(r.at("mae_all").get<double>()) + "," +
                format_double(r.at("rmse_all").get<double>()) + "," +
                format_double(r.at("mae_grid").get<double>()) + "," +
                format_double(r.at("rmse_grid").get<double>()) + ",";
      merged += r.contains("mae_event_days") ? format_double(r.at("mae_event_days").get<double>()) : "";
      merged += ",";
      merged += r.contains("rmse_event_days") ? format_double(r.at("rmse_event_days").get<double>()) : "";
      merged += "\n";
    }
  }
  fs::create_directories(o.out_dir);
  const std::string path = (fs::path(o.out_dir) / "merged.csv").string();
  {
    std::ofstream out(path, std::ios::trunc);
    out << merged;
  }
  manifest.artifacts = {path};
  write_manifest(o.out_dir, manifest);
  std::cout << merged;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolVersion) +
               " — context-augmented spatiotemporal flow forecasting pipeline"};
  app.set_config("--config", "", "Read options from a TOML config file (sections per subcommand)");

  Options o;
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  app.add_option("--backend", o.backend, "Embedding backend: offline|remote")
      ->capture_default_str();
  app.add_option("--embed-dim", o.embed_dim, "Offline embedding dimension")->capture_default_str();
  app.add_option("--embed-seed", o.embed_seed, "Offline embedding seed")->capture_default_str();
  app.add_flag("--synth", o.use_synth, "Use the built-in synthetic benchmark dataset");
  app.add_option("--data", o.data_dir, "Dataset directory (values.f64 + meta.json)");
  app.add_option("--city-jsonl", o.city_jsonl, "City context JSONL (default <data>/city.jsonl)");
  app.add_option("--events-jsonl", o.events_jsonl,
                 "Events JSONL (default <data>/events.jsonl)");
  app.add_option("--cache-dir", o.cache_dir, "Embedding cache directory");
  app.add_option("--designated-grid", o.designated_grid,
                 "Grid evaluated separately (default: synth target or 0)");
  app.add_option("--model", o.model, "persistence|historical_average|gcrnn|stconv")
      ->capture_default_str();
  app.add_option("--aug", o.aug, "Augmentation variant: none|city|node|both|all")
      ->capture_default_str();
  app.add_option("--t1", o.t1, "History hours")->capture_default_str();
  app.add_option("--t2", o.t2, "Horizon hours")->capture_default_str();
  app.add_option("--stride", o.stride, "Window stride hours")->capture_default_str();
  app.add_option("--hidden", o.hidden, "Hidden width")->capture_default_str();
  app.add_option("--conv-kernel", o.conv_kernel, "stconv temporal kernel")->capture_default_str();
  app.add_option("--dropout", o.dropout, "Dropout probability")->capture_default_str();
  app.add_option("--proj-activation", o.proj_activation,
                 "Projection activation: tanh|relu|identity")
      ->capture_default_str();
  app.add_option("--lr", o.lr, "Learning rate")->capture_default_str();
  app.add_option("--batch-size", o.batch_size, "Minibatch size")->capture_default_str();
  app.add_option("--max-epochs", o.max_epochs, "Epoch cap")->capture_default_str();
  app.add_option("--patience", o.patience, "Early-stopping patience")->capture_default_str();
  app.add_option("--loss", o.loss, "Training loss: mae|mse")->capture_default_str();
  app.add_option("--variance-target", o.variance_target, "PCA retained variance")
      ->capture_default_str();
  app.add_option("--split", o.split, "Split mode: fractions|weeks-14-2-4")->capture_default_str();
  app.add_option("--train-frac", o.train_frac, "Training day fraction")->capture_default_str();
  app.add_option("--val-frac", o.val_frac, "Validation day fraction")->capture_default_str();
  app.add_option("--remote-url", o.remote_url, "Remote embedding base URL")
      ->capture_default_str();
  app.add_option("--remote-model", o.remote_model, "Remote embedding model name")
      ->capture_default_str();
  app.add_option("--synth-rows", o.synth_rows, "Synthetic grid rows")->capture_default_str();
  app.add_option("--synth-cols", o.synth_cols, "Synthetic grid cols")->capture_default_str();
  app.add_option("--synth-days", o.synth_days, "Synthetic day count")->capture_default_str();
  app.add_option("--noise", o.synth_noise, "Synthetic noise level (fraction of signal)")
      ->capture_default_str();
  app.add_option("--multiplier", o.synth_multiplier, "Synthetic event-day flow multiplier")
      ->capture_default_str();
  app.add_option("--target-grid", o.synth_target, "Synthetic event grid")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Trip CSV -> FlowSeries dataset directory");
  ingest->add_option("--trips", o.trips_csv, "Trip records CSV");
  ingest->add_option("--origin-lat", o.origin_lat, "Grid origin latitude (SW corner)")
      ->capture_default_str();
  ingest->add_option("--origin-lng", o.origin_lng, "Grid origin longitude (SW corner)")
      ->capture_default_str();
  ingest->add_option("--cell-size", o.cell_size_m, "Cell size in meters")->capture_default_str();
  ingest->add_option("--rows", o.grid_rows, "Grid rows")->capture_default_str();
  ingest->add_option("--cols", o.grid_cols, "Grid cols")->capture_default_str();
  ingest->add_option("--scheme", o.scheme, "Adjacency scheme: rook4|queen8")
      ->capture_default_str();
  ingest->add_option("--tz-offset-min", o.tz_offset_min,
                     "Dataset local-time offset from UTC in minutes")
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark dataset");

  auto* embed = app.add_subcommand("embed", "Compose + embed all context texts into the cache");
  auto* reduce = app.add_subcommand("reduce", "Fit PCA models on training-split contexts");
  auto* train_cmd = app.add_subcommand("train", "Train a single model variant");
  train_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file name")
      ->capture_default_str();
  auto* compare = app.add_subcommand("compare", "Paired original-vs-augmented comparison");
  auto* plot = app.add_subcommand("plot", "Emit hourly flow CSV + SVG for chosen grids/days");
  plot->add_option("--grids", o.plot_grids, "Comma-separated grid indices")
      ->capture_default_str();
  plot->add_option("--day-start", o.plot_day_start, "First day YYYY-MM-DD (default series start)");
  plot->add_option("--days", o.plot_days, "Number of days")->capture_default_str();
  auto* report = app.add_subcommand("report", "Merge comparison report JSONs into one CSV");
  report->add_option("--inputs", o.report_inputs, "report.json files to merge");

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(o);
    if (synth->parsed()) return cmd_synth(o);
    if (embed->parsed()) return cmd_embed(o);
    if (reduce->parsed()) return cmd_reduce(o);
    if (train_cmd->parsed()) return cmd_train(o);
    if (compare->parsed()) return cmd_compare(o);
    if (plot->parsed()) return cmd_plot(o);
    if (report->parsed()) return cmd_report(o);
    std::cerr << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
