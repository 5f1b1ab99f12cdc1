#include "tcbench/pipeline.h"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "tcbench/correlation.h"
#include "tcbench/errors.h"

namespace tcbench::pipeline {
namespace {

using nlohmann::json;

// Reads one JSON object, tracking which keys were consumed so leftovers can
// be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(Where() + " must be a JSON object");
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(Where(key) + " has the wrong type");
    }
  }

  // Nested object; empty when absent.
  json Child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return json::object();
    return *it;
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  std::string Where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key " + Where(key));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json PoolingToJson(const fusion::PoolingConfig& p) {
  return {{"pooled_h", p.pooled_h}, {"pooled_w", p.pooled_w}};
}

fusion::PoolingConfig PoolingFromJson(const json& j, const std::string& path) {
  fusion::PoolingConfig p = FusionConfig{}.pooling;
  ObjectReader r(j, path);
  r.Get("pooled_h", p.pooled_h);
  r.Get("pooled_w", p.pooled_w);
  r.Finish();
  return p;
}

json DegradationToJson(const simulator::DegradationModel& m) {
  return {{"gaussian_sigma", m.gaussian_sigma}, {"ghost_count", m.ghost_count},
          {"ghost_gain", m.ghost_gain},         {"dropout_prob", m.dropout_prob},
          {"jitter_sigma", m.jitter_sigma},     {"seed", m.seed}};
}

simulator::DegradationModel DegradationFromJson(const json& j) {
  simulator::DegradationModel m = DefaultDegradation();
  ObjectReader r(j, "degradation");
  r.Get("gaussian_sigma", m.gaussian_sigma);
  r.Get("ghost_count", m.ghost_count);
  r.Get("ghost_gain", m.ghost_gain);
  r.Get("dropout_prob", m.dropout_prob);
  r.Get("jitter_sigma", m.jitter_sigma);
  r.Get("seed", m.seed);
  r.Finish();
  return m;
}

json TrajectoryToJson(const simulator::TrajectoryConfig& t) {
  json j = {{"kind", simulator::TrajectoryKindName(t.kind)},
            {"speed", t.speed},
            {"angular_rate", t.angular_rate},
            {"n_frames", t.n_frames},
            {"dt", t.dt},
            {"seed", t.seed},
            {"start", nullptr}};
  if (t.start) j["start"] = {{"x", t.start->x}, {"y", t.start->y}, {"theta", t.start->theta}};
  return j;
}

simulator::TrajectoryConfig TrajectoryFromJson(const json& j) {
  simulator::TrajectoryConfig t = DefaultTrajectory();
  ObjectReader r(j, "trajectory");
  std::string kind = simulator::TrajectoryKindName(t.kind);
  r.Get("kind", kind);
  try {
    t.kind = simulator::ParseTrajectoryKind(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r.Get("speed", t.speed);
  r.Get("angular_rate", t.angular_rate);
  r.Get("n_frames", t.n_frames);
  r.Get("dt", t.dt);
  r.Get("seed", t.seed);
  const json start = r.Child("start");
  if (!start.empty()) {
    Pose2D p;
    ObjectReader sr(start, "trajectory.start");
    double x = 0.0, y = 0.0, theta = 0.0;
    sr.Get("x", x);
    sr.Get("y", y);
    sr.Get("theta", theta);
    sr.Finish();
    t.start = Pose2D(x, y, theta);
  }
  r.Finish();
  return t;
}

json LossToJson(const fusion::LossWeights& lw) {
  return {{"w_sim", lw.w_sim},
          {"w_nce", lw.w_nce},
          {"w_T", lw.w_T},
          {"nce_temperature", lw.nce_temperature},
          {"transform_temperature", lw.transform_temperature},
          {"nce_neighbor_radius", lw.nce_neighbor_radius},
          {"nce_neighbor_weight", lw.nce_neighbor_weight}};
}

fusion::LossWeights LossFromJson(const json& j) {
  fusion::LossWeights lw = DefaultLossWeights();
  ObjectReader r(j, "fusion.loss");
  r.Get("w_sim", lw.w_sim);
  r.Get("w_nce", lw.w_nce);
  r.Get("w_T", lw.w_T);
  r.Get("nce_temperature", lw.nce_temperature);
  r.Get("transform_temperature", lw.transform_temperature);
  r.Get("nce_neighbor_radius", lw.nce_neighbor_radius);
  r.Get("nce_neighbor_weight", lw.nce_neighbor_weight);
  r.Finish();
  return lw;
}

json TrainerToJson(const fusion::TrainerOptions& t) {
  return {{"steps", t.steps},
          {"step_size", t.step_size},
          {"fd_epsilon", t.fd_epsilon},
          {"max_halvings", t.max_halvings},
          {"train_bias", t.train_bias}};
}

fusion::TrainerOptions TrainerFromJson(const json& j) {
  fusion::TrainerOptions t = DefaultTrainerOptions();
  ObjectReader r(j, "fusion.trainer");
  r.Get("steps", t.steps);
  r.Get("step_size", t.step_size);
  r.Get("fd_epsilon", t.fd_epsilon);
  r.Get("max_halvings", t.max_halvings);
  r.Get("train_bias", t.train_bias);
  r.Finish();
  return t;
}

json FusionToJson(const FusionConfig& f) {
  return {{"mode", fusion::FusionModeName(f.mode)},
          {"window", f.window},
          {"pooling", PoolingToJson(f.pooling)},
          {"loss", LossToJson(f.loss)},
          {"trainer", TrainerToJson(f.trainer)},
          {"kernel_init", f.kernel_init},
          {"train", f.train},
          {"train_clips", f.train_clips},
          {"clip_len", f.clip_len},
          {"train_seed", f.train_seed}};
}

FusionConfig FusionFromJson(const json& j) {
  FusionConfig f;
  ObjectReader r(j, "fusion");
  std::string mode = fusion::FusionModeName(f.mode);
  r.Get("mode", mode);
  try {
    f.mode = fusion::ParseFusionMode(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r.Get("window", f.window);
  if (r.Has("pooling")) f.pooling = PoolingFromJson(r.Child("pooling"), "fusion.pooling");
  r.Child("pooling");
  f.loss = LossFromJson(r.Child("loss"));
  f.trainer = TrainerFromJson(r.Child("trainer"));
  r.Get("kernel_init", f.kernel_init);
  r.Get("train", f.train);
  r.Get("train_clips", f.train_clips);
  r.Get("clip_len", f.clip_len);
  r.Get("train_seed", f.train_seed);
  r.Finish();
  return f;
}

json MetricsToJson(const MetricConfig& m) {
  return {{"fvmd",
           {{"spacing", m.fvmd.spacing},
            {"window_radius", m.fvmd.window_radius},
            {"window_len", m.fvmd.window_len},
            {"stride", m.fvmd.stride}}},
          {"psnr_cap", m.psnr_cap},
          {"map_resolution", m.map_resolution},
          {"map_threshold", m.map_threshold},
          {"subpixel", m.subpixel}};
}

MetricConfig MetricsFromJson(const json& j) {
  MetricConfig m;
  ObjectReader r(j, "metrics");
  const json fv = r.Child("fvmd");
  ObjectReader fr(fv, "metrics.fvmd");
  fr.Get("spacing", m.fvmd.spacing);
  fr.Get("window_radius", m.fvmd.window_radius);
  fr.Get("window_len", m.fvmd.window_len);
  fr.Get("stride", m.fvmd.stride);
  fr.Finish();
  r.Get("psnr_cap", m.psnr_cap);
  r.Get("map_resolution", m.map_resolution);
  r.Get("map_threshold", m.map_threshold);
  r.Get("subpixel", m.subpixel);
  r.Finish();
  return m;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void PutApe(io::EvalReport& r, const std::string& prefix, const metrics::ApeReport& a) {
  r.metrics[prefix + "_rmse"] = io::MetricValue::Of(a.rmse);
  r.metrics[prefix + "_mean"] = io::MetricValue::Of(a.mean);
  r.metrics[prefix + "_std"] = io::MetricValue::Of(a.std);
}

// Cache key for anything that determines the clean render.
std::string SceneKey(const RunConfig& cfg) {
  const json j = RunConfigToJson(cfg);
  return json{j["world"], j["trajectory"], j["geometry"]}.dump();
}

// Cache key for anything that determines a trained kernel.
std::string KernelKey(const RunConfig& cfg) {
  json j = RunConfigToJson(cfg);
  j["fusion"].erase("mode");
  j["degradation"].erase("seed");
  return json{j["world"], j["trajectory"], j["geometry"], j["degradation"], j["fusion"]}
      .dump();
}

struct Caches {
  std::map<std::string, FrameSequence> clean;
  std::map<std::string, fusion::FusionKernel> kernels;
};

io::EvalReport RunAveragedCached(const RunConfig& cfg, Caches& caches) {
  cfg.Validate();
  const std::string scene = SceneKey(cfg);
  auto it = caches.clean.find(scene);
  if (it == caches.clean.end()) it = caches.clean.emplace(scene, Simulate(cfg)).first;
  const FrameSequence& clean = it->second;

  const fusion::FusionKernel* kernel = nullptr;
  if (cfg.fusion.mode == fusion::FusionMode::kTemporalConv) {
    const std::string key = KernelKey(cfg);
    auto kit = caches.kernels.find(key);
    if (kit == caches.kernels.end()) {
      kit = caches.kernels.emplace(key, PrepareKernel(cfg, clean)).first;
    }
    kernel = &kit->second;
  }
  std::vector<io::EvalReport> reports;
  for (std::uint64_t seed : cfg.seeds) reports.push_back(RunOnce(cfg, clean, seed, kernel));
  io::EvalReport avg = AverageReports(reports);
  avg.config = RunConfigToJson(cfg);
  avg.seeds = cfg.seeds;
  return avg;
}

std::string LabelText(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

void RunConfig::Validate() const {
  try {
    simulator::BuildWorld(world.preset, world.seed);
    trajectory.Validate();
    geometry.Validate();
    degradation.Validate();
    fusion.pooling.Validate();
    fusion.loss.Validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (fusion.window < 1) throw ConfigError("fusion.window must be at least 1");
  if (fusion.kernel_init != "identity" && fusion.kernel_init != "uniform") {
    throw ConfigError("fusion.kernel_init must be \"identity\" or \"uniform\"");
  }
  if (fusion.train_clips < 1 || fusion.clip_len < 1) {
    throw ConfigError("fusion.train_clips and fusion.clip_len must be positive");
  }
  if (fusion.trainer.steps < 0 || !(fusion.trainer.step_size > 0.0) ||
      !(fusion.trainer.fd_epsilon > 0.0) || fusion.trainer.max_halvings < 0) {
    throw ConfigError("invalid fusion.trainer settings");
  }
  if (fusion.pooling.pooled_h > geometry.n_range_bins ||
      fusion.pooling.pooled_w > geometry.n_azimuth_bins) {
    throw ConfigError("pooled grid cannot be finer than the heatmap");
  }
  if (!(metrics.psnr_cap > 0.0) || !(metrics.map_resolution > 0.0) ||
      !(metrics.map_threshold >= 0.0 && metrics.map_threshold <= 1.0)) {
    throw ConfigError("invalid metrics settings");
  }
  if (metrics.fvmd.spacing < 1 || metrics.fvmd.window_radius < 0 ||
      metrics.fvmd.window_len < 3 || metrics.fvmd.stride < 1) {
    throw ConfigError("invalid metrics.fvmd settings");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!ablation.is_object()) throw ConfigError("ablation must be an object");
}

RunConfig RunConfigFromJson(const json& j) {
  RunConfig cfg;
  ObjectReader r(j, "");
  const json world = r.Child("world");
  ObjectReader wr(world, "world");
  wr.Get("preset", cfg.world.preset);
  wr.Get("seed", cfg.world.seed);
  wr.Finish();
  cfg.trajectory = TrajectoryFromJson(r.Child("trajectory"));
  if (r.Has("geometry")) {
    const json g = r.Child("geometry");
    ObjectReader gr(g, "geometry");
    gr.Get("azimuth_fov", cfg.geometry.azimuth_fov_deg);
    gr.Get("max_range", cfg.geometry.max_range);
    gr.Get("n_range_bins", cfg.geometry.n_range_bins);
    gr.Get("n_azimuth_bins", cfg.geometry.n_azimuth_bins);
    gr.Finish();
  }
  r.Child("geometry");
  if (r.Has("degradation")) cfg.degradation = DegradationFromJson(r.Child("degradation"));
  r.Child("degradation");
  cfg.fusion = FusionFromJson(r.Child("fusion"));
  cfg.metrics = MetricsFromJson(r.Child("metrics"));
  r.Get("seeds", cfg.seeds);
  r.Get("output_dir", cfg.output_dir);
  cfg.ablation = r.Child("ablation");
  r.Finish();
  cfg.Validate();
  return cfg;
}

json RunConfigToJson(const RunConfig& cfg) {
  return {{"world", {{"preset", cfg.world.preset}, {"seed", cfg.world.seed}}},
          {"trajectory", TrajectoryToJson(cfg.trajectory)},
          {"geometry", io::GeometryToJson(cfg.geometry)},
          {"degradation", DegradationToJson(cfg.degradation)},
          {"fusion", FusionToJson(cfg.fusion)},
          {"metrics", MetricsToJson(cfg.metrics)},
          {"seeds", cfg.seeds},
          {"output_dir", cfg.output_dir},
          {"ablation", cfg.ablation}};
}

void SetConfigValue(json& config, const std::string& dotted_key, const json& value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos
                                                          ? std::string::npos
                                                          : dot - start);
    if (part.empty()) throw ConfigError("malformed override key " + dotted_key);
    if (!node->is_object()) {
      throw ConfigError("override " + dotted_key + " descends into a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& child = (*node)[part];
    if (child.is_null()) child = json::object();
    node = &child;
    start = dot + 1;
  }
}

void ApplyOverride(json& config, const std::string& dotted_key,
                   const std::string& value_text) {
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;
  }
  SetConfigValue(config, dotted_key, value);
}

RunConfig LoadRunConfig(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    try {
      j = json::parse(ReadFile(path));
    } catch (const json::exception& e) {
      throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
  }
  for (const std::string& o : overrides) {
    const std::size_t eq = o.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + o + "' is not of the form key=value");
    }
    ApplyOverride(j, o.substr(0, eq), o.substr(eq + 1));
  }
  return RunConfigFromJson(j);
}

FrameSequence Simulate(const RunConfig& cfg) {
  const simulator::World world = simulator::BuildWorld(cfg.world.preset, cfg.world.seed);
  const Trajectory traj = simulator::SimulateTrajectory(world, cfg.trajectory);
  return simulator::RenderSequence(world, traj, cfg.geometry);
}

simulator::DegradationModel DegradationForSeed(const RunConfig& cfg, std::uint64_t seed) {
  simulator::DegradationModel m = cfg.degradation;
  m.seed = seed;
  return m;
}

fusion::FusionKernel InitialKernel(const RunConfig& cfg) {
  const int dim = cfg.fusion.pooling.dim();
  return cfg.fusion.kernel_init == "uniform"
             ? fusion::FusionKernel::Uniform(cfg.fusion.window, dim)
             : fusion::FusionKernel::Identity(cfg.fusion.window, dim);
}

fusion::TrainResult TrainKernel(const RunConfig& cfg, const FrameSequence& degraded,
                                const FrameSequence& truth) {
  const std::vector<fusion::TrainingClip> clips =
      fusion::MakeTrainingClips(degraded, truth, cfg.fusion.window, cfg.fusion.clip_len,
                                cfg.fusion.train_clips);
  std::vector<fusion::PreparedClip> prepared;
  prepared.reserve(clips.size());
  for (const auto& c : clips) {
    prepared.emplace_back(c, cfg.fusion.pooling, cfg.fusion.window,
                          cfg.fusion.loss.transform_temperature);
  }
  return fusion::TrainFusion(prepared, InitialKernel(cfg), cfg.fusion.loss,
                             cfg.fusion.trainer);
}

fusion::FusionKernel PrepareKernel(const RunConfig& cfg, const FrameSequence& clean) {
  if (!cfg.fusion.train) return InitialKernel(cfg);
  const FrameSequence degraded =
      simulator::Degrade(clean, DegradationForSeed(cfg, cfg.fusion.train_seed));
  return TrainKernel(cfg, degraded, clean).kernel;
}

FrameSequence Fuse(const RunConfig& cfg, const FrameSequence& seq,
                   const fusion::FusionKernel* kernel) {
  return fusion::FuseSequence(seq, cfg.fusion.mode, cfg.fusion.window, cfg.fusion.pooling,
                              kernel);
}

Trajectory Slam(const RunConfig& cfg, const FrameSequence& seq) {
  correlation::ScanMatchOptions opt;
  opt.subpixel = cfg.metrics.subpixel;
  return correlation::ScanMatchSequence(seq, opt);
}

io::EvalReport Evaluate(const FrameSequence& pred, const FrameSequence& ref,
                        const MetricConfig& mc, const fusion::PoolingConfig& pooling) {
  if (pred.size() != ref.size()) {
    throw std::invalid_argument("pred and ref sequences differ in length");
  }
  if (pred.size() < 2) throw std::invalid_argument("evaluation needs at least two frames");
  if (pred.geometry() != ref.geometry()) {
    throw std::invalid_argument("pred and ref sequences differ in geometry");
  }
  io::EvalReport r;
  std::vector<double> psnr;
  std::vector<double> cosine;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    psnr.push_back(metrics::Psnr(pred[t].heatmap, ref[t].heatmap, mc.psnr_cap));
    cosine.push_back(fusion::CosineSim(fusion::Embed(pred[t].heatmap, pooling),
                                       fusion::Embed(ref[t].heatmap, pooling)));
  }
  r.metrics["psnr_mean"] = io::MetricValue::Of(Mean(psnr));
  r.metrics["cosine_sim_mean"] = io::MetricValue::Of(Mean(cosine));
  try {
    r.metrics["fvmd"] = io::MetricValue::Of(metrics::Fvmd(pred, ref, mc.fvmd));
  } catch (const std::invalid_argument& e) {
    r.metrics["fvmd"] = io::MetricValue::Null(e.what());
  }
  r.metrics["peak_distance"] = io::MetricValue::Of(metrics::PeakDistanceMetric(pred, ref));

  correlation::ScanMatchOptions opt;
  opt.subpixel = mc.subpixel;
  const Trajectory est = correlation::ScanMatchSequence(pred, opt);
  const Trajectory est_ref = correlation::ScanMatchSequence(ref, opt);
  PutApe(r, "ape", metrics::Ape(est, ref.GroundTruth()));
  PutApe(r, "ape_ref", metrics::Ape(est, est_ref));
  const metrics::OccupancyGrid map_pred =
      metrics::RasterizeMap(pred, est, mc.map_resolution, mc.map_threshold);
  const metrics::OccupancyGrid map_ref =
      metrics::RasterizeMap(ref, est_ref, mc.map_resolution, mc.map_threshold);
  r.metrics["iou"] = io::MetricValue::Of(metrics::MapIou(map_pred, map_ref));
  return r;
}

io::EvalReport RunOnce(const RunConfig& cfg, const FrameSequence& clean, std::uint64_t seed,
                       const fusion::FusionKernel* kernel) {
  const FrameSequence degraded = simulator::Degrade(clean, DegradationForSeed(cfg, seed));
  const FrameSequence fused = Fuse(cfg, degraded, kernel);
  io::EvalReport r = Evaluate(fused, clean, cfg.metrics, cfg.fusion.pooling);
  r.config = RunConfigToJson(cfg);
  r.seeds = {seed};
  return r;
}

io::EvalReport AverageReports(const std::vector<io::EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to average");
  io::EvalReport out;
  for (const std::string& name : io::MetricColumns()) {
    double sum = 0.0;
    std::string reason;
    for (const io::EvalReport& r : reports) {
      auto it = r.metrics.find(name);
      if (it == r.metrics.end()) {
        reason = "missing";
        break;
      }
      if (!it->second.value) {
        reason = it->second.reason;
        break;
      }
      sum += *it->second.value;
    }
    out.metrics[name] = reason.empty()
                            ? io::MetricValue::Of(sum / static_cast<double>(reports.size()))
                            : io::MetricValue::Null(reason);
  }
  for (const io::EvalReport& r : reports) {
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
  }
  return out;
}

io::EvalReport RunAveraged(const RunConfig& cfg) {
  Caches caches;
  return RunAveragedCached(cfg, caches);
}

const std::vector<std::string>& TemporalMetrics() {
  static const std::vector<std::string> kMetrics = {"fvmd", "peak_distance", "psnr_mean",
                                                    "cosine_sim_mean", "iou"};
  return kMetrics;
}

AblationResult Ablate(const RunConfig& cfg) {
  cfg.Validate();
  AblationResult result;
  json axes = json::object();
  if (cfg.ablation.contains("axes")) axes = cfg.ablation.at("axes");
  for (const auto& [key, value] : cfg.ablation.items()) {
    if (key != "axes") throw ConfigError("unknown config key ablation." + key);
  }
  if (!axes.is_object() || axes.empty()) {
    throw ConfigError("ablation.axes must be a non-empty object of value lists");
  }
  std::vector<std::pair<std::string, json>> axis_list;
  for (const auto& [key, values] : axes.items()) {
    if (!values.is_array() || values.empty()) {
      throw ConfigError("ablation axis " + key + " must be a non-empty list");
    }
    axis_list.emplace_back(key, values);
    result.label_columns.push_back(key);
  }

  json base = RunConfigToJson(cfg);
  base["ablation"] = json::object();
  Caches caches;
  std::size_t total = 1;
  for (const auto& axis : axis_list) total *= axis.second.size();
  // Row k in mixed radix, last axis fastest.
  for (std::size_t k = 0; k < total; ++k) {
    std::vector<std::size_t> index(axis_list.size());
    std::size_t rem = k;
    for (std::size_t a = axis_list.size(); a-- > 0;) {
      index[a] = rem % axis_list[a].second.size();
      rem /= axis_list[a].second.size();
    }
    json row_cfg = base;
    io::AblationRow row;
    for (std::size_t a = 0; a < axis_list.size(); ++a) {
      const json& v = axis_list[a].second[index[a]];
      SetConfigValue(row_cfg, axis_list[a].first, v);
      row.labels[axis_list[a].first] = LabelText(v);
    }
    row.report = RunAveragedCached(RunConfigFromJson(row_cfg), caches);
    result.rows.push_back(std::move(row));
  }

  for (const std::string& metric : TemporalMetrics()) {
    MetricCorrelation mc;
    mc.metric = metric;
    std::vector<double> x;
    std::vector<double> y;
    for (const io::AblationRow& row : result.rows) {
      const auto& mv = row.report.metrics.at(metric);
      const auto& ape = row.report.metrics.at("ape_mean");
      if (mv.value && ape.value) {
        x.push_back(*mv.value);
        y.push_back(*ape.value);
      }
    }
    if (x.size() < 3) {
      mc.null_reason = "need at least 3 configurations with both values, have " +
                       std::to_string(x.size());
    } else {
      try {
        mc.spearman = stats::Spearman(x, y);
        mc.pearson = stats::Pearson(x, y);
        mc.kendall = stats::KendallTau(x, y);
      } catch (const std::invalid_argument& e) {
        mc.spearman.reset();
        mc.pearson.reset();
        mc.kendall.reset();
        mc.null_reason = e.what();
      }
    }
    result.correlations.push_back(std::move(mc));
  }
  return result;
}

json CorrelationsToJson(const std::vector<MetricCorrelation>& correlations) {
  json out = json::object();
  auto one = [](const std::optional<stats::CorrelationResult>& r) -> json {
    if (!r) return nullptr;
    return {{"coefficient", r->coefficient}, {"p_value", r->p_value}, {"n", r->n}};
  };
  for (const MetricCorrelation& c : correlations) {
    json entry = {{"spearman", one(c.spearman)},
                  {"pearson", one(c.pearson)},
                  {"kendall", one(c.kendall)}};
    if (!c.null_reason.empty()) entry["null_reason"] = c.null_reason;
    out[c.metric + "_vs_ape_mean"] = entry;
  }
  return out;
}

void WriteAblation(const AblationResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::WriteAblationCsv(result.label_columns, result.rows, dir / "ablation.csv");
  json summary = {{"correlations", CorrelationsToJson(result.correlations)},
                  {"p_values", "approximate (t and normal approximations)"}};
  io::WriteTextFile(dir / "correlations.json", summary.dump(2) + "\n");
}

}  // namespace tcbench::pipeline
