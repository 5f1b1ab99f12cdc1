#include <cmath>
#include <random>

#include "doctest.h"
#include "tcbench/fusion.h"
#include "tcbench/simulator.h"
#include "test_util.h"

using namespace tcbench;
using namespace tcbench::fusion;
using tcbench::testing::Geom;

namespace {

Embedding Basis(const PoolingConfig& shape, int i, double sign = 1.0) {
  Embedding e{shape, std::vector<double>(static_cast<std::size_t>(shape.dim()), 0.0)};
  e.values[static_cast<std::size_t>(i)] = sign;
  return e;
}

Embedding RandomEmbedding(const PoolingConfig& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(shape.dim()));
  for (double& v : raw) v = n(rng);
  return Embedding::Normalized(shape, std::move(raw));
}

double Norm(const Embedding& e) {
  double s = 0.0;
  for (double v : e.values) s += v * v;
  return std::sqrt(s);
}

// Small corridor run with jitter, cut into training clips.
std::vector<PreparedClip> JitterClips(double jitter, int window, double temperature,
                                      PoolingConfig pc = {8, 8}) {
  const simulator::World w = simulator::BuildWorld("corridor", 0);
  simulator::TrajectoryConfig tc;
  tc.speed = 2.0;
  tc.n_frames = 30;
  const SensorGeometry g = Geom(16, 16);
  const FrameSequence clean =
      simulator::RenderSequence(w, simulator::SimulateTrajectory(w, tc), g);
  simulator::DegradationModel m;
  m.jitter_sigma = jitter;
  m.seed = 3;
  const FrameSequence degraded = simulator::Degrade(clean, m);
  std::vector<PreparedClip> out;
  for (const TrainingClip& c : MakeTrainingClips(degraded, clean, window, 2, 2)) {
    out.emplace_back(c, pc, window, temperature);
  }
  return out;
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("embed examples") {
  const SensorGeometry g = Geom(16, 16);
  const PoolingConfig pc{8, 8};
  const Embedding zero = Embed(Heatmap(g), pc);
  CHECK(zero.values == Embedding::Sentinel(pc).values);

  const Embedding ones = Embed(testing::ConstantHeatmap(g, 1.0f), pc);
  for (double v : ones.values) CHECK(v == doctest::Approx(1.0 / 8.0));

  const Heatmap h = testing::RandomHeatmap(g, 2);
  const Embedding a = Embed(h, pc);
  const Embedding b = Embed(ScaleHeatmap(h, 0.5), pc);
  CHECK(Norm(a) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-6));
  }
}

TEST_CASE("decode examples and block-constant round trip") {
  const SensorGeometry g = Geom(16, 16);
  const PoolingConfig pc{8, 8};
  const Heatmap flat = Decode(Embed(testing::ConstantHeatmap(g, 0.4f), pc), g);
  for (float v : flat.values()) CHECK(v == doctest::Approx(1.0f));

  const Heatmap lit = Decode(Embedding::Sentinel(pc), g);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) CHECK(lit.at(r, c) == ((r < 2 && c < 2) ? 1.0f : 0.0f));
  }
  CHECK(Decode(Embedding::Sentinel(pc), g) == lit);

  // Block-constant frames with max 1 survive decode(embed(.)) exactly.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<float> blocks(64);
    for (float& b : blocks) b = u(rng);
    blocks[static_cast<std::size_t>(trial)] = 1.0f;
    std::vector<float> v(256);
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) v[r * 16 + c] = blocks[(r / 2) * 8 + c / 2];
    }
    const Heatmap h(g, v);
    const Embedding e = Embed(h, pc);
    const Heatmap back = Decode(e, g);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(back.values()[i] == doctest::Approx(v[i]).epsilon(1e-6));
    }
    const Embedding again = Embed(back, pc);
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      CHECK(again.values[i] == doctest::Approx(e.values[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("cosine and temporal similarity examples") {
  const PoolingConfig pc{2, 2};
  const Embedding e1 = Basis(pc, 0);
  const Embedding e2 = Basis(pc, 1);
  const Embedding neg = Basis(pc, 0, -1.0);
  CHECK(CosineSim(e1, e1) == 1.0);
  CHECK(CosineSim(e1, e2) == 0.0);
  CHECK(CosineSim(e1, neg) == -1.0);

  const std::vector<Embedding> same{e1, e1, e1};
  CHECK(TemporalSimLoss(same) == 0.0);
  const std::vector<Embedding> alt{e1, e2, e1, e2};
  CHECK(TemporalSimLoss(alt) == doctest::Approx(1.0));
  const std::vector<Embedding> anti{e1, neg};
  CHECK(TemporalSimLoss(anti) == doctest::Approx(2.0));
  CHECK_THROWS_AS(TemporalSimLoss(std::vector<Embedding>{e1}), std::invalid_argument);
}

TEST_CASE("infonce examples") {
  const PoolingConfig pc{2, 2};
  const Embedding e1 = Basis(pc, 0);
  const Embedding e2 = Basis(pc, 1);
  CHECK(InfoNce(std::vector<Embedding>{e1}, std::vector<Embedding>{e2}, 1.0) == 0.0);

  const std::vector<Embedding> anchors{e1, e2};
  const double e = std::exp(1.0);
  CHECK(InfoNce(anchors, anchors, 1.0) == doctest::Approx(-std::log(e / (e + 1))));
  CHECK(InfoNce(anchors, anchors, 1.0) == doctest::Approx(0.31326).epsilon(1e-5));

  // Positives swapped: s_ii = 0, off-diagonal 1.
  const std::vector<Embedding> swapped{e2, e1};
  CHECK(InfoNce(anchors, swapped, 1.0) == doctest::Approx(std::log(1 + e)));

  CHECK_THROWS_AS(InfoNce(anchors, std::vector<Embedding>{e1}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(InfoNce(anchors, anchors, 0.0), std::invalid_argument);
}

TEST_CASE("modified infonce examples") {
  const PoolingConfig pc{2, 2};
  const std::vector<Embedding> anchors{Basis(pc, 0), Basis(pc, 1)};
  const double e = std::exp(1.0);
  const std::vector<double> ones{1, 1, 1, 1};
  CHECK(InfoNceModified(anchors, anchors, 1.0, ones) == InfoNce(anchors, anchors, 1.0));
  const std::vector<double> zero_off{1, 0, 0, 1};
  CHECK(InfoNceModified(anchors, anchors, 1.0, zero_off) == doctest::Approx(0.0));
  const std::vector<double> half{1, 0.5, 0.5, 1};
  CHECK(InfoNceModified(anchors, anchors, 1.0, half) ==
        doctest::Approx(-std::log(e / (e + 0.5))));
  CHECK(-std::log(e / (e + 0.5)) == doctest::Approx(0.16885).epsilon(1e-5));
  const std::vector<double> bad_diag{0.5, 1, 1, 1};
  CHECK_THROWS_AS(InfoNceModified(anchors, anchors, 1.0, bad_diag), std::invalid_argument);
  const std::vector<double> bad_range{1, 1.5, 1, 1};
  CHECK_THROWS_AS(InfoNceModified(anchors, anchors, 1.0, bad_range), std::invalid_argument);
}

TEST_CASE("modified infonce with unit weights equals infonce on random batches") {
  std::mt19937_64 rng(12);
  const PoolingConfig pc{4, 4};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Embedding> a, p;
    for (int i = 0; i < 6; ++i) {
      a.push_back(RandomEmbedding(pc, rng));
      p.push_back(RandomEmbedding(pc, rng));
    }
    const std::vector<double> w = TemporalNeighborWeights(6, 0, 0.3);
    CHECK(std::abs(InfoNceModified(a, p, 0.5, w) - InfoNce(a, p, 0.5)) <= 1e-12);
  }
  const std::vector<double> w = TemporalNeighborWeights(4, 1, 0.25);
  CHECK(w[0 * 4 + 1] == 0.25);
  CHECK(w[1 * 4 + 1] == 1.0);
  CHECK(w[0 * 4 + 2] == 1.0);
}

TEST_CASE("window average examples") {
  const PoolingConfig pc{2, 2};
  const Embedding e1 = Basis(pc, 0);
  const Embedding e2 = Basis(pc, 1);
  const std::vector<Embedding> same{e2, e2, e2};
  CHECK(WindowAverage(same).values == e2.values);
  const std::vector<Embedding> cancel{e1, Basis(pc, 0, -1.0)};
  CHECK(WindowAverage(cancel).values == Embedding::Sentinel(pc).values);
  const std::vector<Embedding> pair{e1, e2};
  const Embedding avg = WindowAverage(pair);
  CHECK(avg.values[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(avg.values[1] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK_THROWS_AS(WindowAverage(std::vector<Embedding>{}), std::invalid_argument);
}

TEST_CASE("temporal conv: identity and uniform kernels") {
  std::mt19937_64 rng(21);
  const PoolingConfig pc{4, 6};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Embedding> win;
    for (int i = 0; i < 5; ++i) win.push_back(RandomEmbedding(pc, rng));
    const Embedding id = TemporalConvFuse(win, FusionKernel::Identity(5, pc.dim()));
    for (int i = 0; i < pc.dim(); ++i) CHECK(id.values[i] == doctest::Approx(win[4].values[i]));
    const Embedding uni = TemporalConvFuse(win, FusionKernel::Uniform(5, pc.dim()));
    const Embedding avg = WindowAverage(win);
    for (int i = 0; i < pc.dim(); ++i) CHECK(std::abs(uni.values[i] - avg.values[i]) <= 1e-9);
  }
  std::vector<Embedding> three(3, RandomEmbedding(pc, rng));
  CHECK_THROWS_AS(TemporalConvFuse(three, FusionKernel::Identity(5, pc.dim())),
                  std::invalid_argument);
}

TEST_CASE("temporal conv on identical frames ignores their order") {
  std::mt19937_64 rng(22);
  const PoolingConfig pc{4, 4};
  FusionKernel k = FusionKernel::Identity(3, pc.dim());
  std::normal_distribution<double> n(0.0, 0.5);
  for (std::size_t i = 0; i < k.parameter_count(); ++i) k.parameter(i) = n(rng);
  const Embedding e = RandomEmbedding(pc, rng);
  const std::vector<Embedding> win(3, e);
  const Embedding a = TemporalConvFuse(win, k);
  std::vector<Embedding> rev(win.rbegin(), win.rend());
  CHECK(TemporalConvFuse(rev, k).values == a.values);
}

TEST_CASE("combined loss reductions") {
  const SensorGeometry g = Geom(16, 16);
  const PoolingConfig pc{8, 8};
  std::vector<Heatmap> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(testing::BlobField(g, 0.0, i * 0.8, 5));
  // Clean input: window of 3 feeding 4 targets.
  TrainingClip clip;
  clip.inputs = frames;
  clip.truth.assign(frames.begin() + 2, frames.end());
  const FusionKernel id = FusionKernel::Identity(3, pc.dim());

  TrainingClip single;
  single.inputs.assign(frames.begin(), frames.begin() + 3);
  single.truth = {frames[2]};
  CHECK(std::abs(CombinedLoss(single, id, LossWeights{}, pc)) <= 1e-6);

  LossWeights sim_only;
  sim_only.w_nce = 0.0;
  sim_only.w_T = 0.0;
  std::vector<Embedding> truth_embeds;
  for (const Heatmap& h : clip.truth) truth_embeds.push_back(Embed(h, pc));
  CHECK(CombinedLoss(clip, id, sim_only, pc) ==
        doctest::Approx(TemporalSimLoss(truth_embeds)));

  LossWeights lw;
  lw.nce_temperature = 0.7;
  LossWeights twice = lw;
  twice.w_sim *= 2;
  twice.w_nce *= 2;
  twice.w_T *= 2;
  FusionKernel k = FusionKernel::Uniform(3, pc.dim());
  CHECK(CombinedLoss(clip, k, twice, pc) ==
        doctest::Approx(2 * CombinedLoss(clip, k, lw, pc)).epsilon(1e-12));

  LossWeights none;
  none.w_sim = none.w_nce = none.w_T = 0.0;
  CHECK_THROWS_AS(none.Validate(), std::invalid_argument);
}

TEST_CASE("finite-difference gradient matches directional differences") {
  const std::vector<PreparedClip> clips = JitterClips(1.0, 3, 5.0);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 0.1);
  LossWeights lw;
  lw.transform_temperature = 5.0;
  for (int trial = 0; trial < 3; ++trial) {
    FusionKernel k = FusionKernel::Identity(3, 64);
    for (std::size_t i = 0; i < k.parameter_count(); ++i) k.parameter(i) += n(rng);
    const std::vector<double> grad = FiniteDifferenceGradient(clips, k, lw, 1e-4);
    std::vector<double> dir(grad.size());
    for (double& d : dir) d = n(rng);
    double predicted = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) predicted += grad[i] * dir[i];
    const double eps = 1e-4;
    FusionKernel plus = k, minus = k;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      plus.parameter(i) += eps * dir[i];
      minus.parameter(i) -= eps * dir[i];
    }
    const double actual = (MeanLoss(clips, plus, lw) - MeanLoss(clips, minus, lw)) / (2 * eps);
    CHECK(std::abs(actual - predicted) <= 0.05 * std::abs(actual));
  }
}

TEST_CASE("trainer contract") {
  const std::vector<PreparedClip> clips = JitterClips(2.0, 3, 10.0);
  const FusionKernel init = FusionKernel::Identity(3, 64);
  LossWeights lw;
  lw.w_sim = 0.0;
  lw.w_nce = 0.0;
  lw.transform_temperature = 10.0;

  TrainerOptions zero;
  zero.steps = 0;
  const TrainResult none = TrainFusion(clips, init, lw, zero);
  CHECK(none.kernel.weights == init.weights);
  CHECK(none.kernel.bias == init.bias);
  CHECK(none.final_loss == none.initial_loss);

  TrainerOptions opt;
  opt.steps = 200;
  const TrainResult r = TrainFusion(clips, init, lw, opt);
  CHECK(r.final_loss <= r.initial_loss);
  for (std::size_t i = 1; i < r.loss_history.size(); ++i) {
    CHECK(r.loss_history[i] < r.loss_history[i - 1]);
  }
  double before = 0.0, after = 0.0;
  for (const PreparedClip& c : clips) {
    before += MeanTransformLoss(c, init);
    after += MeanTransformLoss(c, r.kernel);
  }
  CHECK(after < before);

  // Frozen bias stays put.
  TrainerOptions frozen = opt;
  frozen.steps = 5;
  frozen.train_bias = false;
  CHECK(TrainFusion(clips, init, lw, frozen).kernel.bias == init.bias);
}

TEST_CASE("trainer on clean data keeps the identity kernel near optimal") {
  // Full-resolution pooling so the decoder is lossless.
  const std::vector<PreparedClip> clips = JitterClips(0.0, 3, 10.0, {16, 16});
  const FusionKernel init = FusionKernel::Identity(3, 256);
  LossWeights lw;
  lw.w_sim = 0.0;
  lw.w_nce = 0.0;
  lw.transform_temperature = 10.0;
  TrainerOptions opt;
  opt.steps = 20;
  const TrainResult r = TrainFusion(clips, init, lw, opt);
  CHECK(r.final_loss - r.initial_loss <= 0.0);
  CHECK(r.initial_loss <= 1e-6);
  double drift = 0.0;
  for (std::size_t i = 0; i < init.parameter_count(); ++i) {
    drift = std::max(drift, std::abs(r.kernel.parameter(i) - init.parameter(i)));
  }
  CHECK(drift <= 1e-3);
}

TEST_CASE("fuse sequence edge rules") {
  const SensorGeometry g = Geom(16, 16);
  std::vector<Heatmap> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(testing::RandomHeatmap(g, 70 + i));
  const FrameSequence seq = testing::SequenceOf(frames);
  const PoolingConfig pc{16, 16};

  const FrameSequence same = FuseSequence(seq, FusionMode::kNone, 3, pc);
  for (std::size_t i = 0; i < seq.size(); ++i) CHECK(same[i].heatmap == seq[i].heatmap);

  const FrameSequence one = FuseSequence(seq, FusionMode::kWindowAverage, 1, pc);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(one[i].heatmap == Decode(Embed(seq[i].heatmap, pc), g));
  }

  const FusionKernel id = FusionKernel::Identity(3, pc.dim());
  const FrameSequence conv = FuseSequence(seq, FusionMode::kTemporalConv, 3, pc, &id);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(conv[i].heatmap == Decode(Embed(seq[i].heatmap, pc), g));
  }

  // Warm-up frames use a truncated window.
  const FrameSequence avg = FuseSequence(seq, FusionMode::kWindowAverage, 3, pc);
  const std::vector<Embedding> first_two{Embed(frames[0], pc), Embed(frames[1], pc)};
  CHECK(avg[1].heatmap == Decode(WindowAverage(first_two), g));

  CHECK_THROWS_AS(FuseSequence(seq, FusionMode::kWindowAverage, 7, pc), std::invalid_argument);
  CHECK_THROWS_AS(FuseSequence(seq, FusionMode::kTemporalConv, 3, pc), std::invalid_argument);
}

}  // TEST_SUITE
