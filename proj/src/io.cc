#include "tcbench/io.h"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "tcbench/errors.h"

namespace tcbench::io {
namespace fs = std::filesystem;
namespace {

std::string FrameFileName(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.bin", index);
  return buf;
}

std::string ReadTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBinaryFile(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

double ParseDouble(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError("malformed number '" + s + "' in " + context);
  }
  return v;
}

}  // namespace

std::string FormatDouble(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf.data(), ptr);
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  WriteBinaryFile(path, text);
}

nlohmann::json GeometryToJson(const SensorGeometry& g) {
  return {{"azimuth_fov", g.azimuth_fov_deg},
          {"max_range", g.max_range},
          {"n_range_bins", g.n_range_bins},
          {"n_azimuth_bins", g.n_azimuth_bins}};
}

SensorGeometry GeometryFromJson(const nlohmann::json& j) {
  SensorGeometry g;
  g.azimuth_fov_deg = j.value("azimuth_fov", g.azimuth_fov_deg);
  g.max_range = j.value("max_range", g.max_range);
  g.n_range_bins = j.value("n_range_bins", g.n_range_bins);
  g.n_azimuth_bins = j.value("n_azimuth_bins", g.n_azimuth_bins);
  g.Validate();
  return g;
}

void WriteTrajectoryCsv(const Trajectory& traj, const fs::path& path) {
  std::string text = "t,x,y,theta\n";
  for (const TimedPose& p : traj.poses()) {
    text += FormatDouble(p.timestamp) + "," + FormatDouble(p.pose.x) + "," +
            FormatDouble(p.pose.y) + "," + FormatDouble(p.pose.theta) + "\n";
  }
  WriteBinaryFile(path, text);
}

Trajectory ReadTrajectoryCsv(const fs::path& path) {
  std::istringstream in(ReadTextFile(path));
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y,theta") {
    throw DataError(path.string() + ": expected header 't,x,y,theta'");
  }
  Trajectory traj;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 4> v{};
    std::size_t start = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t comma = line.find(',', start);
      if ((k < 3) != (comma != std::string::npos)) {
        throw DataError(path.string() + ": row " + std::to_string(row) +
                        " does not have four fields");
      }
      v[k] = ParseDouble(line.substr(start, comma == std::string::npos
                                                ? std::string::npos
                                                : comma - start),
                         path.string());
      start = comma + 1;
    }
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw DataError(path.string() + ": non-finite value in row " + std::to_string(row));
      }
    }
    try {
      Pose2D pose;
      pose.x = v[1];
      pose.y = v[2];
      pose.theta = v[3];  // stored already normalized; keep bits exact
      traj.Append(v[0], pose);
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    ++row;
  }
  return traj;
}

void WriteDataset(const FrameSequence& seq, const fs::path& dir,
                  const nlohmann::json& provenance) {
  if (seq.empty()) throw std::invalid_argument("cannot write an empty sequence");
  fs::create_directories(dir);
  // Stale frames from an earlier, longer run would break the count check.
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("frame_", 0) == 0 && entry.path().extension() == ".bin") {
      fs::remove(entry.path());
    }
  }
  nlohmann::json manifest = {{"version", kDatasetVersion},
                             {"geometry", GeometryToJson(seq.geometry())},
                             {"frame_count", seq.size()},
                             {"modality_label", seq.modality_label()},
                             {"seed_provenance", provenance}};
  WriteBinaryFile(dir / "manifest.json", manifest.dump(2) + "\n");

  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto values = seq[i].heatmap.values();
    std::string bytes(values.size() * 4, '\0');
    for (std::size_t k = 0; k < values.size(); ++k) {
      const auto bits = std::bit_cast<std::uint32_t>(values[k]);
      for (int b = 0; b < 4; ++b) {
        bytes[k * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
      }
    }
    WriteBinaryFile(dir / FrameFileName(i), bytes);
  }
  Trajectory traj;
  for (const Frame& f : seq.frames()) traj.Append(f.timestamp, f.pose);
  WriteTrajectoryCsv(traj, dir / "trajectory.csv");
}

Dataset ReadDataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw DataError("no manifest.json in " + dir.string());
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(ReadTextFile(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest.json: " + std::string(e.what()));
  }
  Dataset ds;
  try {
    ds.manifest.version = m.at("version").get<int>();
    if (ds.manifest.version != kDatasetVersion) {
      throw DataError("unsupported dataset version " + std::to_string(ds.manifest.version));
    }
    ds.manifest.geometry = GeometryFromJson(m.at("geometry"));
    ds.manifest.frame_count = m.at("frame_count").get<std::size_t>();
    ds.manifest.modality_label = m.at("modality_label").get<std::string>();
    ds.manifest.seed_provenance = m.value("seed_provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest.json: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw DataError("invalid manifest geometry: " + std::string(e.what()));
  }

  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("frame_", 0) == 0 && entry.path().extension() == ".bin") ++files;
  }
  if (files != ds.manifest.frame_count) {
    throw DataError("manifest lists " + std::to_string(ds.manifest.frame_count) +
                    " frames but " + std::to_string(files) + " frame files exist");
  }
  const Trajectory traj = ReadTrajectoryCsv(dir / "trajectory.csv");
  if (traj.size() != ds.manifest.frame_count) {
    throw DataError("trajectory.csv has " + std::to_string(traj.size()) +
                    " rows, manifest lists " + std::to_string(ds.manifest.frame_count));
  }

  const SensorGeometry& g = ds.manifest.geometry;
  const std::size_t cells = static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins;
  ds.sequence = FrameSequence(ds.manifest.modality_label);
  for (std::size_t i = 0; i < ds.manifest.frame_count; ++i) {
    const fs::path fp = dir / FrameFileName(i);
    if (!fs::exists(fp)) throw DataError("missing frame file " + fp.filename().string());
    const std::string bytes = ReadTextFile(fp);
    if (bytes.size() != cells * 4) {
      throw DataError("frame " + std::to_string(i) + " has " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(cells * 4));
    }
    std::vector<float> values(cells);
    for (std::size_t k = 0; k < cells; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(
                    static_cast<unsigned char>(bytes[k * 4 + static_cast<std::size_t>(b)]))
                << (8 * b);
      }
      values[k] = std::bit_cast<float>(bits);
      if (!std::isfinite(values[k])) {
        throw DataError("frame " + std::to_string(i) + " contains a non-finite value");
      }
      if (values[k] < 0.0f || values[k] > 1.0f) {
        throw DataError("frame " + std::to_string(i) + " has a value outside [0, 1]");
      }
    }
    ds.sequence.Append({traj[i].timestamp, Heatmap(g, std::move(values)), traj[i].pose});
  }
  return ds;
}

const std::vector<std::string>& MetricColumns() {
  static const std::vector<std::string> kColumns = {
      "psnr_mean",    "cosine_sim_mean", "fvmd",     "peak_distance",
      "ape_rmse",     "ape_mean",        "ape_std",  "ape_ref_rmse",
      "ape_ref_mean", "ape_ref_std",     "iou"};
  return kColumns;
}

nlohmann::json ReportToJson(const EvalReport& report) {
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json reasons = nlohmann::json::object();
  for (const auto& [name, mv] : report.metrics) {
    if (mv.value.has_value() && std::isfinite(*mv.value)) {
      metrics[name] = *mv.value;
    } else {
      metrics[name] = nullptr;
      reasons[name] = mv.reason.empty() ? "not finite" : mv.reason;
    }
  }
  return {{"metrics", metrics},
          {"null_reasons", reasons},
          {"config", report.config},
          {"seeds", report.seeds}};
}

EvalReport ReportFromJson(const nlohmann::json& j) {
  EvalReport r;
  const auto& reasons = j.value("null_reasons", nlohmann::json::object());
  for (const auto& [name, v] : j.at("metrics").items()) {
    if (v.is_null()) {
      r.metrics[name] = MetricValue::Null(reasons.value(name, std::string("null")));
    } else {
      r.metrics[name] = MetricValue::Of(v.get<double>());
    }
  }
  r.config = j.value("config", nlohmann::json::object());
  r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  return r;
}

void WriteReport(const EvalReport& report, const fs::path& path) {
  WriteBinaryFile(path, ReportToJson(report).dump(2) + "\n");
}

void WriteAblationCsv(const std::vector<std::string>& label_columns,
                      const std::vector<AblationRow>& rows, const fs::path& path) {
  std::string text;
  std::vector<std::string> header = label_columns;
  for (const auto& m : MetricColumns()) header.push_back(m);
  for (std::size_t i = 0; i < header.size(); ++i) {
    text += (i ? "," : "") + header[i];
  }
  text += "\n";
  for (const AblationRow& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < label_columns.size(); ++i) {
      auto it = row.labels.find(label_columns[i]);
      line += (i ? "," : "") + (it == row.labels.end() ? std::string() : it->second);
    }
    for (const auto& m : MetricColumns()) {
      line += ",";
      auto it = row.report.metrics.find(m);
      if (it != row.report.metrics.end() && it->second.value.has_value()) {
        line += FormatDouble(*it->second.value);
      }
    }
    text += line + "\n";
  }
  WriteBinaryFile(path, text);
}

void EmitPgm(const Heatmap& h, const fs::path& path) {
  std::string bytes = "P5\n" + std::to_string(h.cols()) + " " + std::to_string(h.rows()) +
                      "\n255\n";
  for (float v : h.values()) {
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(
        std::lround(255.0 * std::clamp(static_cast<double>(v), 0.0, 1.0)))));
  }
  WriteBinaryFile(path, bytes);
}

void EmitSvgTrajectories(
    const std::vector<std::pair<std::string, Trajectory>>& trajectories,
    const fs::path& path) {
  static const std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                                     "#ff7f0e", "#9467bd", "#8c564b"};
  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  bool any = false;
  for (const auto& [label, traj] : trajectories) {
    for (const TimedPose& p : traj.poses()) {
      if (!any) {
        min_x = max_x = p.pose.x;
        min_y = max_y = p.pose.y;
        any = true;
      }
      min_x = std::min(min_x, p.pose.x);
      max_x = std::max(max_x, p.pose.x);
      min_y = std::min(min_y, p.pose.y);
      max_y = std::max(max_y, p.pose.y);
    }
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-3});
  const double margin = 0.1 * span;
  const double stroke = 0.005 * span;
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" +
                    fmt(min_x - margin) + " " + fmt(-max_y - margin) + " " +
                    fmt(max_x - min_x + 2 * margin) + " " +
                    fmt(max_y - min_y + 2 * margin + 0.08 * span * trajectories.size()) +
                    "\">\n";
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& [label, traj] = trajectories[i];
    const char* color = kColors[i % kColors.size()];
    svg += "  <polyline data-label=\"" + label + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"" + fmt(stroke) + "\" points=\"";
    for (std::size_t k = 0; k < traj.size(); ++k) {
      svg += (k ? " " : "") + fmt(traj[k].pose.x) + "," + fmt(-traj[k].pose.y);
    }
    svg += "\"/>\n";
    svg += "  <text x=\"" + fmt(min_x - 0.5 * margin) + "\" y=\"" +
           fmt(-min_y + 0.5 * margin + 0.08 * span * (i + 1)) + "\" font-size=\"" +
           fmt(0.05 * span) + "\" fill=\"" + color + "\">" + label + "</text>\n";
  }
  svg += "</svg>\n";
  WriteBinaryFile(path, svg);
}

nlohmann::json KernelToJson(const fusion::FusionKernel& k) {
  return {{"window", k.window},
          {"taps_h", k.taps_h},
          {"taps_w", k.taps_w},
          {"weights", k.weights},
          {"bias", k.bias}};
}

fusion::FusionKernel KernelFromJson(const nlohmann::json& j) {
  fusion::FusionKernel k;
  try {
    k.window = j.at("window").get<int>();
    k.taps_h = j.at("taps_h").get<int>();
    k.taps_w = j.at("taps_w").get<int>();
    k.weights = j.at("weights").get<std::vector<double>>();
    k.bias = j.at("bias").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed kernel JSON: " + std::string(e.what()));
  }
  return k;
}

}  // namespace tcbench::io
