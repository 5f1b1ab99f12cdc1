#ifndef TCBENCH_IO_H_
#define TCBENCH_IO_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcbench/fusion.h"
#include "tcbench/heatmap.h"
#include "tcbench/metrics.h"

namespace tcbench::io {

inline constexpr int kDatasetVersion = 1;

struct DatasetManifest {
  int version = kDatasetVersion;
  SensorGeometry geometry;
  std::size_t frame_count = 0;
  std::string modality_label;
  // Full configuration echo of whatever produced the dataset.
  nlohmann::json seed_provenance = nlohmann::json::object();
};

struct Dataset {
  DatasetManifest manifest;
  FrameSequence sequence;
};

// Layout inside `dir`:
//   manifest.json       UTF-8 JSON, keys sorted
//   frame_000000.bin    H*W little-endian float32, row-major, one per frame
//   trajectory.csv      header "t,x,y,theta", shortest round-trip decimals
void WriteDataset(const FrameSequence& seq, const std::filesystem::path& dir,
                  const nlohmann::json& provenance = nlohmann::json::object());

// Throws DataError on a missing manifest, version mismatch, frame count or
// size mismatch, or non-finite / out-of-range values (naming the frame).
Dataset ReadDataset(const std::filesystem::path& dir);

void WriteTrajectoryCsv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory ReadTrajectoryCsv(const std::filesystem::path& path);

// Shortest decimal string that parses back to the same double.
std::string FormatDouble(double v);

// A metric slot: a finite value or null with a reason.
struct MetricValue {
  std::optional<double> value;
  std::string reason;

  static MetricValue Of(double v) { return {v, {}}; }
  static MetricValue Null(std::string why) { return {std::nullopt, std::move(why)}; }
};

// Metric columns in report and CSV order.
const std::vector<std::string>& MetricColumns();

struct EvalReport {
  std::map<std::string, MetricValue> metrics;  // keys from MetricColumns()
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
};

nlohmann::json ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(const nlohmann::json& j);

// Deterministic, key-sorted JSON.
void WriteReport(const EvalReport& report, const std::filesystem::path& path);

struct AblationRow {
  // Configuration columns, written in the order given by `label_columns`.
  std::map<std::string, std::string> labels;
  EvalReport report;
};

// One header line, then one line per row: label columns followed by
// MetricColumns(). Null metrics are written as empty fields.
void WriteAblationCsv(const std::vector<std::string>& label_columns,
                      const std::vector<AblationRow>& rows,
                      const std::filesystem::path& path);

// Binary PGM (P5), 8-bit, value round(255 * intensity); raster row i is
// range bin i.
void EmitPgm(const Heatmap& h, const std::filesystem::path& path);

// Labeled polylines in an auto-scaled viewBox. World y points up.
void EmitSvgTrajectories(
    const std::vector<std::pair<std::string, Trajectory>>& trajectories,
    const std::filesystem::path& path);

nlohmann::json KernelToJson(const fusion::FusionKernel& k);
fusion::FusionKernel KernelFromJson(const nlohmann::json& j);

nlohmann::json GeometryToJson(const SensorGeometry& g);
SensorGeometry GeometryFromJson(const nlohmann::json& j);

// Writes `text` to `path`, creating parent directories. Throws
// std::runtime_error when the file cannot be written.
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace tcbench::io

#endif  // TCBENCH_IO_H_
