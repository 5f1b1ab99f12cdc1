// Python bindings. Configs, reports and ablation results cross the boundary
// as JSON text; the tcbench package converts them to dicts.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tcbench/correlation.h"
#include "tcbench/errors.h"
#include "tcbench/fusion.h"
#include "tcbench/io.h"
#include "tcbench/metrics.h"
#include "tcbench/pipeline.h"
#include "tcbench/simulator.h"
#include "tcbench/stats.h"

namespace py = pybind11;
using nlohmann::json;

namespace tcbench {
namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

pipeline::RunConfig ConfigFrom(const std::string& text) {
  pipeline::RunConfig cfg =
      pipeline::RunConfigFromJson(text.empty() ? json::object() : json::parse(text));
  cfg.Validate();
  return cfg;
}

Heatmap HeatmapFrom(const FloatArray& a, const SensorGeometry* geometry = nullptr) {
  if (a.ndim() != 2) throw std::invalid_argument("heatmap must be a 2D array");
  SensorGeometry g = geometry ? *geometry : SensorGeometry{};
  g.n_range_bins = static_cast<int>(a.shape(0));
  g.n_azimuth_bins = static_cast<int>(a.shape(1));
  return Heatmap(g, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray FramesArray(const FrameSequence& seq) {
  const SensorGeometry& g = seq.geometry();
  FloatArray out({static_cast<py::ssize_t>(seq.size()), py::ssize_t{g.n_range_bins},
                  py::ssize_t{g.n_azimuth_bins}});
  float* dst = out.mutable_data();
  for (const Frame& f : seq.frames()) {
    std::copy(f.heatmap.values().begin(), f.heatmap.values().end(), dst);
    dst += f.heatmap.size();
  }
  return out;
}

// Rows of (t, x, y, theta).
DoubleArray TrajectoryArray(const Trajectory& t) {
  DoubleArray out({static_cast<py::ssize_t>(t.size()), py::ssize_t{4}});
  double* dst = out.mutable_data();
  for (const TimedPose& p : t.poses()) {
    *dst++ = p.timestamp;
    *dst++ = p.pose.x;
    *dst++ = p.pose.y;
    *dst++ = p.pose.theta;
  }
  return out;
}

Trajectory TrajectoryFrom(const DoubleArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 4) {
    throw std::invalid_argument("trajectory must be an (N, 4) array of t, x, y, theta");
  }
  Trajectory t;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    t.Append(a.at(i, 0), Pose2D(a.at(i, 1), a.at(i, 2), a.at(i, 3)));
  }
  return t;
}

FrameSequence SequenceFrom(const FloatArray& frames, const DoubleArray& trajectory,
                           const SensorGeometry& geometry, const std::string& label) {
  if (frames.ndim() != 3) throw std::invalid_argument("frames must be an (N, H, W) array");
  const Trajectory t = TrajectoryFrom(trajectory);
  if (t.size() != static_cast<std::size_t>(frames.shape(0))) {
    throw std::invalid_argument("frames and trajectory lengths differ");
  }
  SensorGeometry g = geometry;
  g.n_range_bins = static_cast<int>(frames.shape(1));
  g.n_azimuth_bins = static_cast<int>(frames.shape(2));
  const std::size_t cells = static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins;
  FrameSequence seq(label);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float* src = frames.data() + i * cells;
    seq.Append({t[i].timestamp, Heatmap(g, std::vector<float>(src, src + cells)), t[i].pose});
  }
  return seq;
}

py::tuple CorrelationTuple(const stats::CorrelationResult& r) {
  return py::make_tuple(r.coefficient, r.p_value, r.n);
}

std::span<const double> Span(const DoubleArray& a) {
  return {a.data(), static_cast<std::size_t>(a.size())};
}

}  // namespace
}  // namespace tcbench

PYBIND11_MODULE(_tcbench, m) {
  using namespace tcbench;
  m.doc() = "Temporal-consistency workbench core";

  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<pipeline::ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<SensorGeometry>(m, "SensorGeometry")
      .def(py::init<>())
      .def_readwrite("azimuth_fov_deg", &SensorGeometry::azimuth_fov_deg)
      .def_readwrite("max_range", &SensorGeometry::max_range)
      .def_readwrite("n_range_bins", &SensorGeometry::n_range_bins)
      .def_readwrite("n_azimuth_bins", &SensorGeometry::n_azimuth_bins)
      .def("__eq__", [](const SensorGeometry& a, const SensorGeometry& b) { return a == b; });

  py::class_<FrameSequence>(m, "FrameSequence")
      .def(py::init(&SequenceFrom), py::arg("frames"), py::arg("trajectory"),
           py::arg("geometry") = SensorGeometry{}, py::arg("label") = "")
      .def("__len__", &FrameSequence::size)
      .def_property_readonly("frames", &FramesArray)
      .def_property_readonly("trajectory",
                             [](const FrameSequence& s) { return TrajectoryArray(s.GroundTruth()); })
      .def_property_readonly("geometry", &FrameSequence::geometry)
      .def_property_readonly("label", &FrameSequence::modality_label);

  m.def("default_config", [] { return pipeline::RunConfigToJson(pipeline::RunConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) {
    return pipeline::RunConfigToJson(ConfigFrom(text)).dump();
  });

  m.def("simulate", [](const std::string& cfg) { return pipeline::Simulate(ConfigFrom(cfg)); },
        py::arg("config") = "");
  m.def(
      "degrade",
      [](const FrameSequence& seq, const std::string& cfg, std::uint64_t seed) {
        return simulator::Degrade(seq, pipeline::DegradationForSeed(ConfigFrom(cfg), seed));
      },
      py::arg("seq"), py::arg("config") = "", py::arg("seed") = 0);
  m.def(
      "fuse",
      [](const FrameSequence& seq, const std::string& text, const FrameSequence* truth) {
        const pipeline::RunConfig cfg = ConfigFrom(text);
        if (cfg.fusion.mode != fusion::FusionMode::kTemporalConv) {
          return pipeline::Fuse(cfg, seq, nullptr);
        }
        fusion::FusionKernel k = pipeline::InitialKernel(cfg);
        if (cfg.fusion.train) {
          if (!truth) throw std::invalid_argument("training temporal_conv needs truth");
          k = pipeline::TrainKernel(cfg, seq, *truth).kernel;
        }
        return pipeline::Fuse(cfg, seq, &k);
      },
      py::arg("seq"), py::arg("config") = "", py::arg("truth") = nullptr);
  m.def(
      "slam",
      [](const FrameSequence& seq, const std::string& cfg) {
        return TrajectoryArray(pipeline::Slam(ConfigFrom(cfg), seq));
      },
      py::arg("seq"), py::arg("config") = "");
  m.def(
      "evaluate",
      [](const FrameSequence& pred, const FrameSequence& ref, const std::string& text) {
        const pipeline::RunConfig cfg = ConfigFrom(text);
        return io::ReportToJson(pipeline::Evaluate(pred, ref, cfg.metrics, cfg.fusion.pooling))
            .dump();
      },
      py::arg("pred"), py::arg("ref"), py::arg("config") = "");
  m.def(
      "run",
      [](const std::string& cfg) { return io::ReportToJson(pipeline::RunAveraged(ConfigFrom(cfg))).dump(); },
      py::arg("config") = "");
  m.def(
      "ablate",
      [](const std::string& cfg) {
        const pipeline::AblationResult r = pipeline::Ablate(ConfigFrom(cfg));
        json rows = json::array();
        for (const io::AblationRow& row : r.rows) {
          rows.push_back({{"labels", row.labels}, {"report", io::ReportToJson(row.report)}});
        }
        return json{{"label_columns", r.label_columns},
                    {"rows", rows},
                    {"correlations", pipeline::CorrelationsToJson(r.correlations)}}
            .dump();
      },
      py::arg("config") = "");

  m.def("read_dataset", [](const std::filesystem::path& dir) { return io::ReadDataset(dir).sequence; });
  m.def(
      "write_dataset",
      [](const FrameSequence& seq, const std::filesystem::path& dir) { io::WriteDataset(seq, dir); },
      py::arg("seq"), py::arg("dir"));

  m.def(
      "xcorr2",
      [](const DoubleArray& a, const DoubleArray& b, bool fft) {
        if (a.ndim() != 2 || b.ndim() != 2) throw std::invalid_argument("inputs must be 2D");
        const correlation::CorrMap c = correlation::Xcorr2(
            Span(a), Span(b), static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
            fft ? correlation::XcorrMethod::kFft : correlation::XcorrMethod::kDirect);
        DoubleArray out({py::ssize_t{c.grid.rows}, py::ssize_t{c.grid.cols}});
        std::copy(c.grid.values.begin(), c.grid.values.end(), out.mutable_data());
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("fft") = true);
  m.def(
      "transform_loss",
      [](const FloatArray& p_t, const FloatArray& p_prev, const FloatArray& l_t,
         const FloatArray& l_prev, double temperature) {
        return correlation::TransformLoss(HeatmapFrom(p_t), HeatmapFrom(p_prev), HeatmapFrom(l_t),
                                          HeatmapFrom(l_prev), temperature);
      },
      py::arg("p_t"), py::arg("p_prev"), py::arg("l_t"), py::arg("l_prev"),
      py::arg("temperature") = 1.0);
  m.def(
      "psnr",
      [](const FloatArray& pred, const FloatArray& truth, double cap) {
        return metrics::Psnr(HeatmapFrom(pred), HeatmapFrom(truth), cap);
      },
      py::arg("pred"), py::arg("truth"), py::arg("cap") = metrics::kDefaultPsnrCap);
  m.def("fvmd", [](const FrameSequence& a, const FrameSequence& b) { return metrics::Fvmd(a, b); });
  m.def("peak_distance", &metrics::PeakDistanceMetric);
  m.def("ape", [](const DoubleArray& est, const DoubleArray& gt) {
    const metrics::ApeReport r = metrics::Ape(TrajectoryFrom(est), TrajectoryFrom(gt));
    return py::dict(py::arg("rmse") = r.rmse, py::arg("mean") = r.mean, py::arg("std") = r.std);
  });

  m.def("pearson", [](const DoubleArray& x, const DoubleArray& y) {
    return CorrelationTuple(stats::Pearson(Span(x), Span(y)));
  });
  m.def("spearman", [](const DoubleArray& x, const DoubleArray& y) {
    return CorrelationTuple(stats::Spearman(Span(x), Span(y)));
  });
  m.def("kendall_tau", [](const DoubleArray& x, const DoubleArray& y) {
    return CorrelationTuple(stats::KendallTau(Span(x), Span(y)));
  });
}
