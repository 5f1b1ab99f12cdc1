#include "tcbench/fusion.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace tcbench::fusion {
namespace {

// Block index of every fine row/column for a pooled axis of `pooled` cells.
std::vector<int> BlockMap(int fine, int pooled) {
  std::vector<int> map(static_cast<std::size_t>(fine));
  for (int b = 0; b < pooled; ++b) {
    const int lo = b * fine / pooled;
    const int hi = (b + 1) * fine / pooled;
    for (int i = lo; i < hi; ++i) map[static_cast<std::size_t>(i)] = b;
  }
  return map;
}

void RequireSameShape(const Embedding& a, const Embedding& b) {
  if (!(a.shape == b.shape) || a.values.size() != b.values.size()) {
    throw std::invalid_argument("embedding shapes differ");
  }
}

double Dot(const Embedding& a, const Embedding& b) {
  RequireSameShape(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    s += a.values[i] * b.values[i];
  }
  return s;
}

// Decoded heatmap as doubles, skipping the float round trip.
std::vector<double> DecodeValues(const Embedding& e, const SensorGeometry& geom) {
  const int rows = geom.n_range_bins;
  const int cols = geom.n_azimuth_bins;
  std::vector<double> out(static_cast<std::size_t>(rows) * cols, 0.0);
  const double mx = *std::max_element(e.values.begin(), e.values.end());
  if (!(mx > 0.0)) return out;
  const double target = std::min(1.0, mx * std::sqrt(static_cast<double>(e.dim())));
  const double scale = target / mx;
  const std::vector<int> row_block = BlockMap(rows, e.shape.pooled_h);
  const std::vector<int> col_block = BlockMap(cols, e.shape.pooled_w);
  for (int r = 0; r < rows; ++r) {
    const std::size_t base =
        static_cast<std::size_t>(row_block[static_cast<std::size_t>(r)]) *
        e.shape.pooled_w;
    for (int c = 0; c < cols; ++c) {
      const double v =
          e.values[base + static_cast<std::size_t>(col_block[static_cast<std::size_t>(c)])] *
          scale;
      out[static_cast<std::size_t>(r) * cols + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

// Convolves the trailing `embeds.size()` kernel rows with the window.
Embedding ConvFuse(std::span<const Embedding> embeds, const FusionKernel& kernel) {
  const PoolingConfig shape = embeds.front().shape;
  const int ph = shape.pooled_h;
  const int pw = shape.pooled_w;
  kernel.Validate(shape.dim());
  const int first_row = kernel.window - static_cast<int>(embeds.size());
  std::vector<double> out(kernel.bias);
  const int kh2 = kernel.taps_h / 2;
  const int kw2 = kernel.taps_w / 2;
  for (std::size_t t = 0; t < embeds.size(); ++t) {
    const Embedding& in = embeds[t];
    if (!(in.shape == shape)) throw std::invalid_argument("embedding shapes differ");
    for (int kr = 0; kr < kernel.taps_h; ++kr) {
      for (int kc = 0; kc < kernel.taps_w; ++kc) {
        const double w =
            kernel.weight(first_row + static_cast<int>(t), kr * kernel.taps_w + kc);
        if (w == 0.0) continue;
        const int dr = kr - kh2;
        const int dc = kc - kw2;
        for (int r = std::max(0, -dr); r < std::min(ph, ph - dr); ++r) {
          const double* src = in.values.data() + static_cast<std::size_t>(r + dr) * pw;
          double* dst = out.data() + static_cast<std::size_t>(r) * pw;
          for (int c = std::max(0, -dc); c < std::min(pw, pw - dc); ++c) {
            dst[c] += w * src[c + dc];
          }
        }
      }
    }
  }
  return Embedding::Normalized(shape, std::move(out));
}

std::vector<Embedding> FuseClip(const PreparedClip& clip,
                                const FusionKernel& kernel) {
  std::vector<Embedding> fused;
  fused.reserve(static_cast<std::size_t>(clip.fused_count()));
  const auto& in = clip.input_embeds();
  for (int i = 0; i < clip.fused_count(); ++i) {
    fused.push_back(TemporalConvFuse(
        std::span<const Embedding>(in).subspan(static_cast<std::size_t>(i),
                                               static_cast<std::size_t>(clip.window())),
        kernel));
  }
  return fused;
}

double TransformTerm(const PreparedClip& clip, std::span<const Embedding> fused) {
  if (fused.size() < 2) return 0.0;
  const SensorGeometry& geom = clip.geometry();
  const int rows = geom.n_range_bins;
  const int cols = geom.n_azimuth_bins;
  correlation::XcorrSpectrum prev =
      correlation::ComputeSpectrum(DecodeValues(fused[0], geom), rows, cols);
  double total = 0.0;
  for (std::size_t i = 1; i < fused.size(); ++i) {
    correlation::XcorrSpectrum cur =
        correlation::ComputeSpectrum(DecodeValues(fused[i], geom), rows, cols);
    const correlation::ProbMap q_p = correlation::SepSoftmax(
        correlation::Xcorr2(cur, prev), clip.transform_temperature());
    total += correlation::KlDiv(clip.truth_probs()[i - 1], q_p);
    prev = std::move(cur);
  }
  return total / static_cast<double>(fused.size() - 1);
}

template <typename Fn>
void ParallelFor(std::size_t n, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

void PoolingConfig::Validate() const {
  if (pooled_h < 1 || pooled_w < 1) {
    throw std::invalid_argument("pooled grid must be at least 1 x 1");
  }
}

Embedding Embedding::Sentinel(const PoolingConfig& shape) {
  Embedding e{shape, std::vector<double>(static_cast<std::size_t>(shape.dim()), 0.0)};
  e.values[0] = 1.0;
  return e;
}

Embedding Embedding::Normalized(const PoolingConfig& shape,
                                std::vector<double> raw) {
  double norm2 = 0.0;
  for (double v : raw) norm2 += v * v;
  if (!(norm2 > 0.0)) return Sentinel(shape);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : raw) v *= inv;
  return {shape, std::move(raw)};
}

Embedding Embed(const Heatmap& h, const PoolingConfig& pooling) {
  pooling.Validate();
  if (pooling.pooled_h > h.rows() || pooling.pooled_w > h.cols()) {
    throw std::invalid_argument("pooled grid larger than the heatmap");
  }
  const int ph = pooling.pooled_h;
  const int pw = pooling.pooled_w;
  std::vector<double> sums(static_cast<std::size_t>(pooling.dim()), 0.0);
  std::vector<int> counts(sums.size(), 0);
  const std::vector<int> row_block = BlockMap(h.rows(), ph);
  const std::vector<int> col_block = BlockMap(h.cols(), pw);
  for (int r = 0; r < h.rows(); ++r) {
    for (int c = 0; c < h.cols(); ++c) {
      const std::size_t b =
          static_cast<std::size_t>(row_block[static_cast<std::size_t>(r)]) * pw +
          static_cast<std::size_t>(col_block[static_cast<std::size_t>(c)]);
      sums[b] += h.at(r, c);
      ++counts[b];
    }
  }
  for (std::size_t b = 0; b < sums.size(); ++b) sums[b] /= counts[b];
  return Embedding::Normalized(pooling, std::move(sums));
}

Heatmap Decode(const Embedding& e, const SensorGeometry& geom) {
  geom.Validate();
  if (e.shape.pooled_h > geom.n_range_bins || e.shape.pooled_w > geom.n_azimuth_bins) {
    throw std::invalid_argument("pooled grid larger than the target geometry");
  }
  return Heatmap::FromClamped(geom, DecodeValues(e, geom));
}

double CosineSim(const Embedding& a, const Embedding& b) {
  return std::clamp(Dot(a, b), -1.0, 1.0);
}

double TemporalSimLoss(std::span<const Embedding> embeds) {
  if (embeds.size() < 2) {
    throw std::invalid_argument("temporal similarity needs at least two embeddings");
  }
  double total = 0.0;
  for (std::size_t i = 1; i < embeds.size(); ++i) {
    total += 1.0 - CosineSim(embeds[i], embeds[i - 1]);
  }
  return total / static_cast<double>(embeds.size() - 1);
}

double InfoNceModified(std::span<const Embedding> anchors,
                       std::span<const Embedding> positives, double temperature,
                       std::span<const double> neighbor_weights) {
  const std::size_t n = anchors.size();
  if (n == 0 || positives.size() != n) {
    throw std::invalid_argument("infonce needs equal-length, non-empty batches");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("infonce temperature must be positive");
  }
  if (!neighbor_weights.empty()) {
    if (neighbor_weights.size() != n * n) {
      throw std::invalid_argument("neighbor weight matrix must be n x n");
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double w = neighbor_weights[i * n + j];
        if (!(w >= 0.0 && w <= 1.0)) {
          throw std::invalid_argument("neighbor weights must lie in [0, 1]");
        }
        if (i == j && w != 1.0) {
          throw std::invalid_argument("neighbor weight diagonal must be 1");
        }
      }
    }
  }
  double total = 0.0;
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      logits[j] = CosineSim(anchors[i], positives[j]) / temperature;
      mx = std::max(mx, logits[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = neighbor_weights.empty() ? 1.0 : neighbor_weights[i * n + j];
      denom += w * std::exp(logits[j] - mx);
    }
    total += -(logits[i] - mx - std::log(denom));
  }
  return std::max(0.0, total / static_cast<double>(n));
}

double InfoNce(std::span<const Embedding> anchors,
               std::span<const Embedding> positives, double temperature) {
  return InfoNceModified(anchors, positives, temperature, {});
}

std::vector<double> TemporalNeighborWeights(int n, int radius, double weight) {
  std::vector<double> w(static_cast<std::size_t>(n) * n, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && std::abs(i - j) <= radius) {
        w[static_cast<std::size_t>(i) * n + j] = weight;
      }
    }
  }
  return w;
}

Embedding WindowAverage(std::span<const Embedding> embeds) {
  if (embeds.empty()) throw std::invalid_argument("empty fusion window");
  std::vector<double> sum(embeds.front().values.size(), 0.0);
  for (const Embedding& e : embeds) {
    RequireSameShape(e, embeds.front());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e.values[i];
  }
  return Embedding::Normalized(embeds.front().shape, std::move(sum));
}

void FusionKernel::Validate(int dim) const {
  if (window < 1) throw std::invalid_argument("fusion window must be at least 1");
  if (taps_h < 1 || taps_w < 1 || taps_h % 2 == 0 || taps_w % 2 == 0) {
    throw std::invalid_argument("kernel taps must be odd and positive");
  }
  if (weights.size() != static_cast<std::size_t>(window) * taps() ||
      bias.size() != static_cast<std::size_t>(dim)) {
    throw std::invalid_argument("kernel parameter shapes do not match");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("non-finite kernel weight");
  }
  for (double b : bias) {
    if (!std::isfinite(b)) throw std::invalid_argument("non-finite kernel bias");
  }
}

FusionKernel FusionKernel::Identity(int window, int dim, int taps_h, int taps_w) {
  FusionKernel k;
  k.window = window;
  k.taps_h = taps_h;
  k.taps_w = taps_w;
  k.weights.assign(static_cast<std::size_t>(window) * k.taps(), 0.0);
  k.bias.assign(static_cast<std::size_t>(dim), 0.0);
  k.weights[static_cast<std::size_t>(window - 1) * k.taps() + k.center_tap()] = 1.0;
  return k;
}

FusionKernel FusionKernel::Uniform(int window, int dim, int taps_h, int taps_w) {
  FusionKernel k = Identity(window, dim, taps_h, taps_w);
  std::fill(k.weights.begin(), k.weights.end(), 0.0);
  for (int t = 0; t < window; ++t) {
    k.weights[static_cast<std::size_t>(t) * k.taps() + k.center_tap()] = 1.0 / window;
  }
  return k;
}

Embedding TemporalConvFuse(std::span<const Embedding> embeds,
                           const FusionKernel& kernel) {
  if (static_cast<int>(embeds.size()) != kernel.window) {
    throw std::invalid_argument("fusion window length must equal kernel window");
  }
  return ConvFuse(embeds, kernel);
}

Embedding TemporalConvFuseTruncated(std::span<const Embedding> embeds,
                                    const FusionKernel& kernel) {
  if (embeds.empty() || static_cast<int>(embeds.size()) > kernel.window) {
    throw std::invalid_argument("truncated window must hold 1..T embeddings");
  }
  return ConvFuse(embeds, kernel);
}

void LossWeights::Validate() const {
  if (!(w_sim >= 0.0 && w_nce >= 0.0 && w_T >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (!(w_sim > 0.0 || w_nce > 0.0 || w_T > 0.0)) {
    throw std::invalid_argument("at least one loss weight must be positive");
  }
  if (!(nce_temperature > 0.0) || !(transform_temperature > 0.0)) {
    throw std::invalid_argument("loss temperatures must be positive");
  }
  if (nce_neighbor_radius < 0 ||
      !(nce_neighbor_weight >= 0.0 && nce_neighbor_weight <= 1.0)) {
    throw std::invalid_argument("invalid InfoNCE neighbour weighting");
  }
}

PreparedClip::PreparedClip(const TrainingClip& clip, const PoolingConfig& pooling,
                           int window, double transform_temperature)
    : window_(window), transform_temperature_(transform_temperature) {
  if (window < 1) throw std::invalid_argument("fusion window must be at least 1");
  if (clip.truth.empty()) throw std::invalid_argument("clip has no target frames");
  if (clip.inputs.size() != clip.truth.size() + static_cast<std::size_t>(window) - 1) {
    throw std::invalid_argument(
        "clip misaligned: inputs must hold truth.size() + window - 1 frames");
  }
  geometry_ = clip.truth.front().geometry();
  for (const Heatmap& h : clip.inputs) {
    RequireSameGeometry(h, clip.truth.front());
    input_embeds_.push_back(Embed(h, pooling));
  }
  for (const Heatmap& h : clip.truth) {
    RequireSameGeometry(h, clip.truth.front());
    truth_embeds_.push_back(Embed(h, pooling));
  }
  for (std::size_t i = 1; i < clip.truth.size(); ++i) {
    truth_probs_.push_back(correlation::SepSoftmax(
        correlation::Xcorr2(clip.truth[i], clip.truth[i - 1]),
        transform_temperature));
  }
}

double CombinedLoss(const PreparedClip& clip, const FusionKernel& kernel,
                    const LossWeights& lw) {
  lw.Validate();
  if (kernel.window != clip.window()) {
    throw std::invalid_argument("kernel window does not match the clip");
  }
  if (lw.transform_temperature != clip.transform_temperature()) {
    throw std::invalid_argument("clip was prepared with a different temperature");
  }
  const std::vector<Embedding> fused = FuseClip(clip, kernel);
  double loss = 0.0;
  if (lw.w_nce > 0.0) {
    if (lw.nce_neighbor_radius > 0) {
      const std::vector<double> w = TemporalNeighborWeights(
          clip.fused_count(), lw.nce_neighbor_radius, lw.nce_neighbor_weight);
      loss += lw.w_nce *
              InfoNceModified(fused, clip.truth_embeds(), lw.nce_temperature, w);
    } else {
      loss += lw.w_nce * InfoNce(fused, clip.truth_embeds(), lw.nce_temperature);
    }
  }
  if (fused.size() >= 2) {
    if (lw.w_sim > 0.0) loss += lw.w_sim * TemporalSimLoss(fused);
    if (lw.w_T > 0.0) loss += lw.w_T * TransformTerm(clip, fused);
  }
  return loss;
}

double CombinedLoss(const TrainingClip& clip, const FusionKernel& kernel,
                    const LossWeights& lw, const PoolingConfig& pooling) {
  lw.Validate();
  const PreparedClip prepared(clip, pooling, kernel.window,
                              lw.transform_temperature);
  return CombinedLoss(prepared, kernel, lw);
}

double MeanTransformLoss(const PreparedClip& clip, const FusionKernel& kernel) {
  const std::vector<Embedding> fused = FuseClip(clip, kernel);
  return TransformTerm(clip, fused);
}

double MeanLoss(std::span<const PreparedClip> clips, const FusionKernel& kernel,
                const LossWeights& lw) {
  if (clips.empty()) throw std::invalid_argument("training set is empty");
  double total = 0.0;
  for (const PreparedClip& c : clips) total += CombinedLoss(c, kernel, lw);
  return total / static_cast<double>(clips.size());
}

std::vector<double> FiniteDifferenceGradient(std::span<const PreparedClip> clips,
                                             const FusionKernel& kernel,
                                             const LossWeights& lw,
                                             double fd_epsilon, bool include_bias) {
  if (!(fd_epsilon > 0.0)) throw std::invalid_argument("fd_epsilon must be positive");
  std::vector<double> grad(kernel.parameter_count(), 0.0);
  const std::size_t n = include_bias ? grad.size() : kernel.weights.size();
  ParallelFor(n, [&](std::size_t i) {
    FusionKernel k = kernel;
    k.parameter(i) = kernel.parameter(i) + fd_epsilon;
    const double plus = MeanLoss(clips, k, lw);
    k.parameter(i) = kernel.parameter(i) - fd_epsilon;
    const double minus = MeanLoss(clips, k, lw);
    grad[i] = (plus - minus) / (2.0 * fd_epsilon);
  });
  return grad;
}

TrainResult TrainFusion(std::span<const PreparedClip> clips,
                        const FusionKernel& init, const LossWeights& lw,
                        const TrainerOptions& options) {
  if (clips.empty()) throw std::invalid_argument("training set is empty");
  if (!(options.step_size > 0.0) || !(options.fd_epsilon > 0.0)) {
    throw std::invalid_argument("step_size and fd_epsilon must be positive");
  }
  if (options.steps < 0 || options.max_halvings < 0) {
    throw std::invalid_argument("steps and max_halvings must be non-negative");
  }
  TrainResult result;
  result.kernel = init;
  result.initial_loss = MeanLoss(clips, init, lw);
  if (!std::isfinite(result.initial_loss)) {
    throw std::invalid_argument("combined loss is not finite at the initial kernel");
  }
  double loss = result.initial_loss;
  double eta = options.step_size;
  for (int step = 0; step < options.steps; ++step) {
    const std::vector<double> grad =
        FiniteDifferenceGradient(clips, result.kernel, lw, options.fd_epsilon,
                                 options.train_bias);
    bool accepted = false;
    for (int halvings = 0; halvings <= options.max_halvings; ++halvings) {
      FusionKernel candidate = result.kernel;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        candidate.parameter(i) -= eta * grad[i];
      }
      const double cand_loss = MeanLoss(clips, candidate, lw);
      if (std::isfinite(cand_loss) && cand_loss < loss) {
        result.kernel = std::move(candidate);
        loss = cand_loss;
        accepted = true;
        break;
      }
      if (halvings < options.max_halvings) eta *= 0.5;
    }
    if (!accepted) break;
    ++result.accepted_steps;
    result.loss_history.push_back(loss);
  }
  result.final_loss = loss;
  return result;
}

FusionMode ParseFusionMode(const std::string& name) {
  if (name == "none") return FusionMode::kNone;
  if (name == "window_average") return FusionMode::kWindowAverage;
  if (name == "temporal_conv") return FusionMode::kTemporalConv;
  throw std::invalid_argument("unknown fusion mode: " + name);
}

std::string FusionModeName(FusionMode mode) {
  switch (mode) {
    case FusionMode::kNone:
      return "none";
    case FusionMode::kWindowAverage:
      return "window_average";
    case FusionMode::kTemporalConv:
      return "temporal_conv";
  }
  return "none";
}

FrameSequence FuseSequence(const FrameSequence& seq, FusionMode mode, int window,
                           const PoolingConfig& pooling,
                           const FusionKernel* kernel) {
  if (mode == FusionMode::kNone) return seq;
  if (window < 1) throw std::invalid_argument("fusion window must be at least 1");
  if (static_cast<std::size_t>(window) > seq.size()) {
    throw std::invalid_argument("fusion window larger than the sequence");
  }
  if (mode == FusionMode::kTemporalConv) {
    if (kernel == nullptr) throw std::invalid_argument("temporal_conv needs a kernel");
    if (kernel->window != window) {
      throw std::invalid_argument("kernel window does not match fusion window");
    }
  }
  std::vector<Embedding> embeds;
  embeds.reserve(seq.size());
  for (const Frame& f : seq.frames()) embeds.push_back(Embed(f.heatmap, pooling));

  std::vector<Heatmap> out;
  out.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const std::size_t lo = t + 1 >= static_cast<std::size_t>(window)
                               ? t + 1 - static_cast<std::size_t>(window)
                               : 0;
    const std::span<const Embedding> win(embeds.data() + lo, t + 1 - lo);
    const Embedding fused = mode == FusionMode::kWindowAverage
                                ? WindowAverage(win)
                                : TemporalConvFuseTruncated(win, *kernel);
    out.push_back(Decode(fused, seq.geometry()));
  }
  return seq.WithHeatmaps(std::move(out), seq.modality_label());
}

std::vector<TrainingClip> MakeTrainingClips(const FrameSequence& degraded,
                                            const FrameSequence& truth, int window,
                                            int clip_len, int max_clips) {
  if (degraded.size() != truth.size()) {
    throw std::invalid_argument("training sequences must have equal length");
  }
  if (window < 1 || clip_len < 1 || max_clips < 1) {
    throw std::invalid_argument("window, clip_len and max_clips must be positive");
  }
  const int n = static_cast<int>(truth.size());
  const int first = window - 1;
  const int last = n - clip_len;  // inclusive start bound
  if (last < first) {
    throw std::invalid_argument("sequence too short for one training clip");
  }
  const int available = last - first + 1;
  const int count = std::min(max_clips, available);
  std::vector<TrainingClip> clips;
  for (int k = 0; k < count; ++k) {
    const int start =
        count == 1 ? first
                   : first + static_cast<int>(static_cast<long>(k) * (available - 1) /
                                              (count - 1));
    TrainingClip clip;
    for (int i = start - window + 1; i < start + clip_len; ++i) {
      clip.inputs.push_back(degraded[static_cast<std::size_t>(i)].heatmap);
    }
    for (int i = start; i < start + clip_len; ++i) {
      clip.truth.push_back(truth[static_cast<std::size_t>(i)].heatmap);
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace tcbench::fusion
