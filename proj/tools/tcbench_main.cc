// tcbench command-line driver.
//
//   tcbench <command> [--config FILE] [--set key=value ...] [command flags]
//
// Default outputs go under the output root: cfg.output_dir, or
// $TCBENCH_OUTPUT_ROOT when set. Exit codes: 0 ok, 2 config/validation
// error, 3 runtime data error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "tcbench/correlation.h"
#include "tcbench/errors.h"
#include "tcbench/io.h"
#include "tcbench/pipeline.h"

namespace fs = std::filesystem;
using nlohmann::json;
using tcbench::pipeline::ConfigError;
using tcbench::pipeline::RunConfig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr const char* kOutputRootEnv = "TCBENCH_OUTPUT_ROOT";

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
};

RunConfig LoadConfig(const CommonOptions& common) {
  return tcbench::pipeline::LoadRunConfig(common.config, common.overrides);
}

fs::path OutputRoot(const RunConfig& cfg) {
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return cfg.output_dir;
}

// Explicit paths win; otherwise `name` under the output root.
fs::path OutPath(const RunConfig& cfg, const std::string& given, const std::string& name) {
  return given.empty() ? OutputRoot(cfg) / name : fs::path(given);
}

// A missing input is a usage error, not bad data.
tcbench::io::Dataset LoadInput(const std::string& dir, const std::string& what) {
  if (dir.empty()) throw ConfigError(what + " dataset directory is required");
  if (!fs::exists(fs::path(dir) / "manifest.json")) {
    throw ConfigError(what + " dataset not found: " + dir);
  }
  return tcbench::io::ReadDataset(dir);
}

json Provenance(const std::string& stage, const RunConfig& cfg, const json& source = nullptr,
                const json& extra = json::object()) {
  json p = {{"stage", stage}, {"config", tcbench::pipeline::RunConfigToJson(cfg)}};
  if (!source.is_null()) p["source"] = source;
  for (const auto& [k, v] : extra.items()) p[k] = v;
  return p;
}

void Say(const std::string& msg) { std::cout << msg << "\n"; }

int CmdSimulate(const CommonOptions& common, const std::string& out) {
  const RunConfig cfg = LoadConfig(common);
  const fs::path dir = OutPath(cfg, out, "clean");
  tcbench::io::WriteDataset(tcbench::pipeline::Simulate(cfg), dir, Provenance("simulate", cfg));
  Say("wrote " + dir.string());
  return 0;
}

int CmdDegrade(const CommonOptions& common, const std::string& in, const std::string& out,
               const std::optional<std::uint64_t>& seed) {
  const RunConfig cfg = LoadConfig(common);
  const tcbench::io::Dataset ds = LoadInput(in, "input");
  const std::uint64_t s = seed.value_or(cfg.seeds.front());
  const tcbench::simulator::DegradationModel model =
      tcbench::pipeline::DegradationForSeed(cfg, s);
  const fs::path dir = OutPath(cfg, out, "degraded");
  tcbench::FrameSequence degraded = tcbench::simulator::Degrade(ds.sequence, model);
  tcbench::io::WriteDataset(degraded, dir,
                            Provenance("degrade", cfg, ds.manifest.seed_provenance,
                                       {{"degradation_seed", s}}));
  Say("wrote " + dir.string());
  return 0;
}

int CmdFuse(const CommonOptions& common, const std::string& in, const std::string& truth,
            const std::string& kernel_path, const std::string& out) {
  RunConfig cfg = LoadConfig(common);
  const tcbench::io::Dataset ds = LoadInput(in, "input");
  const fs::path dir = OutPath(cfg, out, "fused");
  if (static_cast<std::size_t>(cfg.fusion.window) > ds.sequence.size() &&
      cfg.fusion.mode != tcbench::fusion::FusionMode::kNone) {
    throw ConfigError("fusion.window " + std::to_string(cfg.fusion.window) +
                      " exceeds the sequence length " + std::to_string(ds.sequence.size()));
  }

  std::optional<tcbench::fusion::FusionKernel> kernel;
  json extra = json::object();
  if (cfg.fusion.mode == tcbench::fusion::FusionMode::kTemporalConv) {
    if (!kernel_path.empty()) {
      std::ifstream kin(kernel_path);
      if (!kin) throw ConfigError("kernel file not found: " + kernel_path);
      json kj;
      try {
        kj = json::parse(kin);
      } catch (const json::exception&) {
        throw tcbench::DataError("kernel file " + kernel_path + " is not valid JSON");
      }
      kernel = tcbench::io::KernelFromJson(kj);
      cfg.fusion.window = kernel->window;
      kernel->Validate(cfg.fusion.pooling.dim());
    } else if (cfg.fusion.train) {
      if (truth.empty()) {
        throw ConfigError("temporal_conv training needs --truth (or fusion.train=false)");
      }
      const tcbench::io::Dataset gt = LoadInput(truth, "truth");
      const tcbench::fusion::TrainResult tr =
          tcbench::pipeline::TrainKernel(cfg, ds.sequence, gt.sequence);
      kernel = tr.kernel;
      extra["training"] = {{"initial_loss", tr.initial_loss},
                           {"final_loss", tr.final_loss},
                           {"accepted_steps", tr.accepted_steps}};
      Say("trained kernel: loss " + tcbench::io::FormatDouble(tr.initial_loss) + " -> " +
          tcbench::io::FormatDouble(tr.final_loss) + " in " +
          std::to_string(tr.accepted_steps) + " steps");
    } else {
      kernel = tcbench::pipeline::InitialKernel(cfg);
    }
  }
  const tcbench::FrameSequence fused =
      tcbench::pipeline::Fuse(cfg, ds.sequence, kernel ? &*kernel : nullptr);
  tcbench::io::WriteDataset(fused, dir,
                            Provenance("fuse", cfg, ds.manifest.seed_provenance, extra));
  if (kernel) {
    tcbench::io::WriteTextFile(dir / "kernel.json",
                               tcbench::io::KernelToJson(*kernel).dump(2) + "\n");
  }
  Say("wrote " + dir.string());
  return 0;
}

int CmdSlam(const CommonOptions& common, const std::string& in, const std::string& out) {
  const RunConfig cfg = LoadConfig(common);
  const tcbench::io::Dataset ds = LoadInput(in, "input");
  const fs::path csv = OutPath(cfg, out, "slam/trajectory.csv");
  const tcbench::Trajectory est = tcbench::pipeline::Slam(cfg, ds.sequence);
  tcbench::io::WriteTrajectoryCsv(est, csv);
  fs::path svg = csv;
  svg.replace_extension(".svg");
  tcbench::io::EmitSvgTrajectories({{"ground truth", ds.sequence.GroundTruth()},
                                    {"scan matched", est}},
                                   svg);
  const tcbench::metrics::ApeReport ape =
      tcbench::metrics::Ape(est, ds.sequence.GroundTruth());
  Say("wrote " + csv.string() + " and " + svg.string());
  Say("ape_mean " + tcbench::io::FormatDouble(ape.mean) + " m");
  return 0;
}

int CmdEval(const CommonOptions& common, const std::string& pred, const std::string& ref,
            const std::string& out) {
  const RunConfig cfg = LoadConfig(common);
  const tcbench::io::Dataset p = LoadInput(pred, "pred");
  const tcbench::io::Dataset r = LoadInput(ref, "ref");
  tcbench::io::EvalReport report =
      tcbench::pipeline::Evaluate(p.sequence, r.sequence, cfg.metrics, cfg.fusion.pooling);
  report.config = {{"run", tcbench::pipeline::RunConfigToJson(cfg)},
                   {"pred", p.manifest.seed_provenance},
                   {"ref", r.manifest.seed_provenance}};
  // Degradation seed recorded by the degrade stage, if any.
  for (const json* node = &p.manifest.seed_provenance; node->is_object();) {
    if (node->contains("degradation_seed")) {
      report.seeds.push_back(node->at("degradation_seed").get<std::uint64_t>());
      break;
    }
    if (!node->contains("source")) break;
    node = &node->at("source");
  }
  const fs::path path = OutPath(cfg, out, "report.json");
  tcbench::io::WriteReport(report, path);
  Say("wrote " + path.string());
  return 0;
}

int CmdAblate(const CommonOptions& common, const std::string& out) {
  const RunConfig cfg = LoadConfig(common);
  const fs::path dir = OutPath(cfg, out, "ablation");
  const tcbench::pipeline::AblationResult result = tcbench::pipeline::Ablate(cfg);
  tcbench::pipeline::WriteAblation(result, dir);
  Say("wrote " + (dir / "ablation.csv").string() + " (" + std::to_string(result.rows.size()) +
      " rows) and " + (dir / "correlations.json").string());
  return 0;
}

std::string SummaryText(const tcbench::io::EvalReport& report) {
  std::ostringstream os;
  os << "metric              value\n";
  for (const std::string& name : tcbench::io::MetricColumns()) {
    auto it = report.metrics.find(name);
    os << name << std::string(name.size() < 20 ? 20 - name.size() : 1, ' ');
    if (it == report.metrics.end()) {
      os << "missing\n";
    } else if (it->second.value) {
      os << tcbench::io::FormatDouble(*it->second.value) << "\n";
    } else {
      os << "null (" << it->second.reason << ")\n";
    }
  }
  return os.str();
}

int CmdReport(const CommonOptions& common, const std::string& report_path,
              const std::string& dataset, const std::string& out) {
  const RunConfig cfg = LoadConfig(common);
  const fs::path dir = OutPath(cfg, out, "report");
  if (report_path.empty() && dataset.empty()) {
    throw ConfigError("report needs --report and/or --dataset");
  }
  if (!report_path.empty()) {
    std::ifstream in(report_path);
    if (!in) throw ConfigError("report file not found: " + report_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception&) {
      throw tcbench::DataError("report file " + report_path + " is not valid JSON");
    }
    const std::string text = SummaryText(tcbench::io::ReportFromJson(j));
    tcbench::io::WriteTextFile(dir / "summary.txt", text);
    std::cout << text;
  }
  if (!dataset.empty()) {
    const tcbench::io::Dataset ds = LoadInput(dataset, "input");
    const std::size_t n = ds.sequence.size();
    for (std::size_t i : {std::size_t{0}, n / 2, n - 1}) {
      tcbench::io::EmitPgm(ds.sequence[i].heatmap,
                           dir / ("frame_" + std::to_string(i) + ".pgm"));
    }
    tcbench::io::EmitSvgTrajectories({{"ground truth", ds.sequence.GroundTruth()}},
                                     dir / "trajectory.svg");
  }
  Say("wrote " + dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-consistency workbench for range-azimuth heatmap sequences"};
  app.require_subcommand(1);
  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "JSON config file");
    sub->add_option("-s,--set", common.overrides, "Override a config key: key=value")
        ->take_all();
  };

  std::string in, out, truth, kernel, pred, ref, report_path, dataset;
  std::optional<std::uint64_t> seed;

  auto* simulate = app.add_subcommand("simulate", "Render a ground-truth dataset");
  add_common(simulate);
  simulate->add_option("-o,--out", out, "Output dataset directory");

  auto* degrade = app.add_subcommand("degrade", "Degrade a dataset");
  add_common(degrade);
  degrade->add_option("-i,--in", in, "Input dataset directory")->required();
  degrade->add_option("-o,--out", out, "Output dataset directory");
  degrade->add_option("--seed", seed, "Degradation seed (default: first of seeds)");

  auto* fuse = app.add_subcommand("fuse", "Temporally fuse a dataset");
  add_common(fuse);
  fuse->add_option("-i,--in", in, "Input dataset directory")->required();
  fuse->add_option("--truth", truth, "Ground-truth dataset for temporal_conv training");
  fuse->add_option("--kernel", kernel, "Trained kernel JSON (skips training)");
  fuse->add_option("-o,--out", out, "Output dataset directory");

  auto* slam = app.add_subcommand("slam", "Scan-match a dataset");
  add_common(slam);
  slam->add_option("-i,--in", in, "Input dataset directory")->required();
  slam->add_option("-o,--out", out, "Output trajectory CSV (an SVG is written beside it)");

  auto* eval = app.add_subcommand("eval", "Evaluate a dataset against a reference");
  add_common(eval);
  eval->add_option("--pred", pred, "Predicted dataset directory")->required();
  eval->add_option("--ref", ref, "Reference (clean) dataset directory")->required();
  eval->add_option("-o,--out", out, "Output report JSON");

  auto* ablate = app.add_subcommand("ablate", "Run the ablation matrix in ablation.axes");
  add_common(ablate);
  ablate->add_option("-o,--out", out, "Output directory");

  auto* report = app.add_subcommand("report", "Summarize a report and render figures");
  add_common(report);
  report->add_option("--report", report_path, "report.json to summarize");
  report->add_option("--dataset", dataset, "Dataset to render as PGM/SVG");
  report->add_option("-o,--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return CmdSimulate(common, out);
    if (*degrade) return CmdDegrade(common, in, out, seed);
    if (*fuse) return CmdFuse(common, in, truth, kernel, out);
    if (*slam) return CmdSlam(common, in, out);
    if (*eval) return CmdEval(common, pred, ref, out);
    if (*ablate) return CmdAblate(common, out);
    if (*report) return CmdReport(common, report_path, dataset, out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
