#ifndef TCBENCH_FUSION_H_
#define TCBENCH_FUSION_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tcbench/correlation.h"
#include "tcbench/heatmap.h"

namespace tcbench::fusion {

// Pooled grid the proxy encoder averages a heatmap down to.
struct PoolingConfig {
  int pooled_h = 16;
  int pooled_w = 16;

  int dim() const { return pooled_h * pooled_w; }
  void Validate() const;
  bool operator==(const PoolingConfig&) const = default;
};

// Unit-norm vector laid out as a pooled_h x pooled_w grid (row-major).
struct Embedding {
  PoolingConfig shape;
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
  // First basis vector; stands in for the embedding of a zero vector.
  static Embedding Sentinel(const PoolingConfig& shape);
  // L2-normalizes `raw`; an all-zero vector yields the sentinel.
  static Embedding Normalized(const PoolingConfig& shape,
                              std::vector<double> raw);
};

// Block-average pooling followed by L2 normalization.
Embedding Embed(const Heatmap& h, const PoolingConfig& pooling);

// Nearest-neighbour upsampling of the pooled grid, scaled so the maximum
// equals min(1, max * sqrt(D)). Negative cells clamp to zero.
Heatmap Decode(const Embedding& e, const SensorGeometry& geom);

double CosineSim(const Embedding& a, const Embedding& b);

// Mean of (1 - cos) over consecutive pairs. Needs at least two embeddings.
double TemporalSimLoss(std::span<const Embedding> embeds);

// Mean over i of -log(exp(s_ii / tau) / sum_j exp(s_ij / tau)).
double InfoNce(std::span<const Embedding> anchors,
               std::span<const Embedding> positives, double temperature);

// InfoNCE whose denominator term j is scaled by neighbor_weights[i][j]
// (row-major n x n, diagonal 1, entries in [0, 1]).
double InfoNceModified(std::span<const Embedding> anchors,
                       std::span<const Embedding> positives,
                       double temperature,
                       std::span<const double> neighbor_weights);

// Weights of w for pairs at most `radius` steps apart (off-diagonal), 1
// elsewhere.
std::vector<double> TemporalNeighborWeights(int n, int radius, double weight);

// Sum of the window, re-normalized.
Embedding WindowAverage(std::span<const Embedding> embeds);

// Learnable fusion: for each of T stacked embeddings a spatial kernel over
// the pooled grid, summed over time, plus a per-cell bias.
struct FusionKernel {
  int window = 5;  // T
  int taps_h = 3;
  int taps_w = 3;
  std::vector<double> weights;  // T x (taps_h * taps_w), oldest frame first
  std::vector<double> bias;     // D

  int taps() const { return taps_h * taps_w; }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }
  double& parameter(std::size_t i) {
    return i < weights.size() ? weights[i] : bias[i - weights.size()];
  }
  double parameter(std::size_t i) const {
    return i < weights.size() ? weights[i] : bias[i - weights.size()];
  }
  double weight(int t, int tap) const {
    return weights[static_cast<std::size_t>(t) * taps() + tap];
  }
  int center_tap() const { return (taps_h / 2) * taps_w + taps_w / 2; }

  void Validate(int dim) const;

  // Centre tap of the newest frame only.
  static FusionKernel Identity(int window, int dim, int taps_h = 3,
                               int taps_w = 3);
  // Centre tap 1/window for every frame: window averaging.
  static FusionKernel Uniform(int window, int dim, int taps_h = 3,
                              int taps_w = 3);
};

// Requires embeds.size() == kernel.window.
Embedding TemporalConvFuse(std::span<const Embedding> embeds,
                           const FusionKernel& kernel);

// Fuses a window shorter than (or equal to) the kernel using the kernel's
// newest rows. Used for warm-up frames at the start of a sequence.
Embedding TemporalConvFuseTruncated(std::span<const Embedding> embeds,
                                    const FusionKernel& kernel);

struct LossWeights {
  double w_sim = 1.0;
  double w_nce = 1.0;
  double w_T = 1.0;
  double nce_temperature = 0.5;
  // Softmax temperature for the transformation-consistency term.
  double transform_temperature = 1.0;
  // Negatives within this many steps of the anchor are scaled by
  // nce_neighbor_weight; radius 0 gives plain InfoNCE.
  int nce_neighbor_radius = 0;
  double nce_neighbor_weight = 1.0;

  void Validate() const;
};

// M consecutive target frames. `inputs` holds the degraded frames feeding
// them: inputs[i .. i + T - 1] is the window for truth[i].
struct TrainingClip {
  std::vector<Heatmap> inputs;
  std::vector<Heatmap> truth;
};

// Clip with encoder outputs and ground-truth displacement distributions
// precomputed; the loss only depends on the kernel after this.
class PreparedClip {
 public:
  PreparedClip(const TrainingClip& clip, const PoolingConfig& pooling,
               int window, double transform_temperature);

  int fused_count() const { return static_cast<int>(truth_embeds_.size()); }
  int window() const { return window_; }
  const SensorGeometry& geometry() const { return geometry_; }
  const std::vector<Embedding>& input_embeds() const { return input_embeds_; }
  const std::vector<Embedding>& truth_embeds() const { return truth_embeds_; }
  const std::vector<correlation::ProbMap>& truth_probs() const {
    return truth_probs_;
  }
  double transform_temperature() const { return transform_temperature_; }

 private:
  SensorGeometry geometry_;
  int window_;
  double transform_temperature_;
  std::vector<Embedding> input_embeds_;
  std::vector<Embedding> truth_embeds_;
  std::vector<correlation::ProbMap> truth_probs_;
};

// w_nce * InfoNCE(fused, embed(truth)) + w_sim * TemporalSimLoss(fused)
// + w_T * mean TransformLoss(decode(fused_t), decode(fused_t-1), l_t, l_t-1).
// Pair terms vanish for single-frame clips.
double CombinedLoss(const PreparedClip& clip, const FusionKernel& kernel,
                    const LossWeights& lw);
double CombinedLoss(const TrainingClip& clip, const FusionKernel& kernel,
                    const LossWeights& lw, const PoolingConfig& pooling);

// Mean transformation-consistency term alone (diagnostics and tests).
double MeanTransformLoss(const PreparedClip& clip, const FusionKernel& kernel);

double MeanLoss(std::span<const PreparedClip> clips, const FusionKernel& kernel,
                const LossWeights& lw);

// Central finite-difference gradient of MeanLoss over all kernel parameters.
// Without `include_bias` the bias entries are left at zero.
std::vector<double> FiniteDifferenceGradient(std::span<const PreparedClip> clips,
                                             const FusionKernel& kernel,
                                             const LossWeights& lw,
                                             double fd_epsilon,
                                             bool include_bias = true);

struct TrainerOptions {
  int steps = 200;
  double step_size = 0.05;
  double fd_epsilon = 1e-4;
  int max_halvings = 10;
  // When false the bias stays at its initial value.
  bool train_bias = true;
};

struct TrainResult {
  FusionKernel kernel;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int accepted_steps = 0;
  std::vector<double> loss_history;  // mean loss after each accepted step
};

// Gradient descent with finite-difference gradients. A step is kept only if
// it lowers the mean loss; otherwise the step size halves, and training
// stops after max_halvings consecutive rejections.
TrainResult TrainFusion(std::span<const PreparedClip> clips,
                        const FusionKernel& init, const LossWeights& lw,
                        const TrainerOptions& options);

enum class FusionMode { kNone, kWindowAverage, kTemporalConv };

FusionMode ParseFusionMode(const std::string& name);
std::string FusionModeName(FusionMode mode);

// Fuses every frame of a sequence with its trailing window (truncated at the
// start) and decodes the result. kNone returns the input unchanged.
FrameSequence FuseSequence(const FrameSequence& seq, FusionMode mode,
                           int window, const PoolingConfig& pooling,
                           const FusionKernel* kernel = nullptr);

// Cuts aligned degraded/ground-truth sequences into up to `max_clips` evenly
// spaced clips of `clip_len` targets with full windows.
std::vector<TrainingClip> MakeTrainingClips(const FrameSequence& degraded,
                                            const FrameSequence& truth,
                                            int window, int clip_len,
                                            int max_clips);

}  // namespace tcbench::fusion

#endif  // TCBENCH_FUSION_H_
