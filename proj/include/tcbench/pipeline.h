#ifndef TCBENCH_PIPELINE_H_
#define TCBENCH_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcbench/fusion.h"
#include "tcbench/heatmap.h"
#include "tcbench/io.h"
#include "tcbench/metrics.h"
#include "tcbench/simulator.h"
#include "tcbench/stats.h"

namespace tcbench::pipeline {

// Invalid configuration (unknown keys, bad values, unknown presets).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

struct WorldConfig {
  std::string preset = "corridor";
  std::uint64_t seed = 0;
};

// Transformation-consistency term alone. The InfoNCE and temporal
// similarity terms favour blurred windows, which stall the scan matcher.
inline fusion::LossWeights DefaultLossWeights() {
  fusion::LossWeights lw;
  lw.w_sim = 0.0;
  lw.w_nce = 0.0;
  lw.w_T = 1.0;
  lw.transform_temperature = 60.0;
  return lw;
}

// A learned bias is the same pattern in every frame and pins consecutive
// correlation peaks at zero, so it stays at zero by default.
inline fusion::TrainerOptions DefaultTrainerOptions() {
  fusion::TrainerOptions t;
  t.train_bias = false;
  return t;
}

struct FusionConfig {
  fusion::FusionMode mode = fusion::FusionMode::kNone;
  int window = 5;
  // 32 x 32 on the default 32 x 32 geometry: the proxy decoder is lossless.
  fusion::PoolingConfig pooling{32, 32};
  fusion::LossWeights loss = DefaultLossWeights();
  fusion::TrainerOptions trainer = DefaultTrainerOptions();
  // "identity" or "uniform".
  std::string kernel_init = "identity";
  bool train = true;
  int train_clips = 3;
  int clip_len = 2;
  // Degradation seed of the sequence the kernel is trained on; kept apart
  // from the evaluation seeds.
  std::uint64_t train_seed = 1000;
};

struct MetricConfig {
  metrics::FvmdConfig fvmd;
  double psnr_cap = metrics::kDefaultPsnrCap;
  double map_resolution = 0.1;
  double map_threshold = 0.5;
  bool subpixel = true;
};

// 2 m/s at 10 Hz: 0.2 m per frame, more than one range bin, so consecutive
// ground-truth correlation peaks are off centre.
inline simulator::TrajectoryConfig DefaultTrajectory() {
  simulator::TrajectoryConfig t;
  t.speed = 2.0;
  return t;
}

inline simulator::DegradationModel DefaultDegradation() {
  simulator::DegradationModel m;
  m.gaussian_sigma = 0.1;
  m.ghost_count = 3;
  m.ghost_gain = 1.0;
  m.dropout_prob = 0.1;
  m.jitter_sigma = 2.0;
  return m;
}

struct RunConfig {
  WorldConfig world;
  simulator::TrajectoryConfig trajectory = DefaultTrajectory();
  SensorGeometry geometry;
  simulator::DegradationModel degradation = DefaultDegradation();
  FusionConfig fusion;
  MetricConfig metrics;
  // One pipeline run per seed; each seed is the degradation seed of its run.
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "tcbench_out";
  // Ablation matrix: {"axes": {"dotted.key": [values, ...], ...}}.
  nlohmann::json ablation = nlohmann::json::object();

  // Throws ConfigError.
  void Validate() const;
};

// Defaults used for every key the JSON omits. Unknown keys are rejected.
RunConfig RunConfigFromJson(const nlohmann::json& j);
nlohmann::json RunConfigToJson(const RunConfig& cfg);

// Sets a dotted key ("degradation.jitter_sigma") in a config JSON,
// creating intermediate objects.
void SetConfigValue(nlohmann::json& config, const std::string& dotted_key,
                    const nlohmann::json& value);

// SetConfigValue with `value_text` parsed as JSON when possible, otherwise
// taken as a string.
void ApplyOverride(nlohmann::json& config, const std::string& dotted_key,
                   const std::string& value_text);

// Loads a config file (or defaults when `path` is empty) and applies
// "key=value" overrides in order.
RunConfig LoadRunConfig(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides);

// Ground-truth render of the configured world and trajectory.
FrameSequence Simulate(const RunConfig& cfg);

// The configured degradation with its seed replaced by `seed`.
simulator::DegradationModel DegradationForSeed(const RunConfig& cfg,
                                               std::uint64_t seed);

// Initial kernel named by cfg.fusion.kernel_init.
fusion::FusionKernel InitialKernel(const RunConfig& cfg);

// Trains a temporal_conv kernel on `degraded` against `truth`.
fusion::TrainResult TrainKernel(const RunConfig& cfg,
                                const FrameSequence& degraded,
                                const FrameSequence& truth);

// Trains on a sequence degraded with cfg.fusion.train_seed; returns the
// initial kernel unchanged when training is disabled.
fusion::FusionKernel PrepareKernel(const RunConfig& cfg,
                                   const FrameSequence& clean);

FrameSequence Fuse(const RunConfig& cfg, const FrameSequence& seq,
                   const fusion::FusionKernel* kernel);

Trajectory Slam(const RunConfig& cfg, const FrameSequence& seq);

// Every report column for `pred` against the clean `ref`. APE is measured
// against the ground-truth poses carried by `ref`; ape_ref_* compares the
// scan-matched trajectories of pred and ref; IoU compares maps built from
// each sequence with its own scan-matched trajectory.
// Embedding similarity uses `pooling`.
io::EvalReport Evaluate(const FrameSequence& pred, const FrameSequence& ref,
                        const MetricConfig& mc,
                        const fusion::PoolingConfig& pooling);

// simulate -> degrade -> fuse -> evaluate for one seed.
io::EvalReport RunOnce(const RunConfig& cfg, const FrameSequence& clean,
                       std::uint64_t seed, const fusion::FusionKernel* kernel);

// Mean of each metric over reports; null when any input is null.
io::EvalReport AverageReports(const std::vector<io::EvalReport>& reports);

// Runs all seeds and averages. Trains a kernel first for temporal_conv.
io::EvalReport RunAveraged(const RunConfig& cfg);

struct MetricCorrelation {
  std::string metric;
  std::optional<stats::CorrelationResult> spearman;
  std::optional<stats::CorrelationResult> pearson;
  std::optional<stats::CorrelationResult> kendall;
  std::string null_reason;
};

struct AblationResult {
  std::vector<std::string> label_columns;
  std::vector<io::AblationRow> rows;
  std::vector<MetricCorrelation> correlations;  // each temporal metric vs ape_mean
};

// Metrics correlated against ape_mean in the ablation summary.
const std::vector<std::string>& TemporalMetrics();

// Cartesian product of cfg.ablation axes; each row runs all seeds.
AblationResult Ablate(const RunConfig& cfg);

nlohmann::json CorrelationsToJson(const std::vector<MetricCorrelation>& c);

// Writes ablation.csv and correlations.json into `dir`.
void WriteAblation(const AblationResult& result, const std::filesystem::path& dir);

}  // namespace tcbench::pipeline

#endif  // TCBENCH_PIPELINE_H_
