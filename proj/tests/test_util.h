#ifndef TCBENCH_TESTS_TEST_UTIL_H_
#define TCBENCH_TESTS_TEST_UTIL_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tcbench/heatmap.h"

namespace tcbench::testing {

inline SensorGeometry Geom(int h, int w, double max_range = 5.0, double fov = 100.0) {
  SensorGeometry g;
  g.n_range_bins = h;
  g.n_azimuth_bins = w;
  g.max_range = max_range;
  g.azimuth_fov_deg = fov;
  return g;
}

inline Heatmap RandomHeatmap(const SensorGeometry& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins);
  for (float& x : v) x = u(rng);
  return Heatmap(g, std::move(v));
}

inline Heatmap ConstantHeatmap(const SensorGeometry& g, float value) {
  return Heatmap(g, std::vector<float>(
                        static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins, value));
}

inline Heatmap Impulse(const SensorGeometry& g, int row, int col, float value = 1.0f) {
  std::vector<float> v(static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins, 0.0f);
  v[static_cast<std::size_t>(row) * g.n_azimuth_bins + col] = value;
  return Heatmap(g, std::move(v));
}

// Smooth blob centred at a fractional position.
inline Heatmap Blob(const SensorGeometry& g, double row, double col, double sigma) {
  std::vector<float> v(static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins);
  for (int r = 0; r < g.n_range_bins; ++r) {
    for (int c = 0; c < g.n_azimuth_bins; ++c) {
      const double d2 = (r - row) * (r - row) + (c - col) * (c - col);
      v[static_cast<std::size_t>(r) * g.n_azimuth_bins + c] =
          static_cast<float>(std::exp(-0.5 * d2 / (sigma * sigma)));
    }
  }
  return Heatmap(g, std::move(v));
}

// Sum of several smooth blobs, clamped; textured enough for flow tracking.
inline Heatmap BlobField(const SensorGeometry& g, double shift_row, double shift_col,
                         std::uint64_t seed, int blobs = 12, double sigma = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(0.0, g.n_range_bins);
  std::uniform_real_distribution<double> uc(0.0, g.n_azimuth_bins);
  std::vector<double> v(static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins, 0.0);
  for (int b = 0; b < blobs; ++b) {
    const double br = ur(rng) + shift_row;
    const double bc = uc(rng) + shift_col;
    for (int r = 0; r < g.n_range_bins; ++r) {
      for (int c = 0; c < g.n_azimuth_bins; ++c) {
        const double d2 = (r - br) * (r - br) + (c - bc) * (c - bc);
        v[static_cast<std::size_t>(r) * g.n_azimuth_bins + c] +=
            0.6 * std::exp(-0.5 * d2 / (sigma * sigma));
      }
    }
  }
  return Heatmap::FromClamped(g, v);
}

// Sum of random plane waves with wavelengths in [min_wavelength,
// 2 * min_wavelength], scaled into [0, 1] without clamping. Shifted by
// (shift_row, shift_col) exactly.
inline Heatmap WaveField(const SensorGeometry& g, double shift_row, double shift_col,
                         std::uint64_t seed, double min_wavelength = 20.0, int waves = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> kr, kc, phase;
  for (int k = 0; k < waves; ++k) {
    const double angle = 3.14159265358979323846 * (k + u(rng)) / waves;
    const double wavenumber = 2 * 3.14159265358979323846 / (min_wavelength * (1.0 + u(rng)));
    kr.push_back(wavenumber * std::sin(angle));
    kc.push_back(wavenumber * std::cos(angle));
    phase.push_back(2 * 3.14159265358979323846 * u(rng));
  }
  std::vector<double> v(static_cast<std::size_t>(g.n_range_bins) * g.n_azimuth_bins);
  for (int r = 0; r < g.n_range_bins; ++r) {
    for (int c = 0; c < g.n_azimuth_bins; ++c) {
      double s = 0.0;
      for (int k = 0; k < waves; ++k) {
        s += std::sin(kr[k] * (r - shift_row) + kc[k] * (c - shift_col) + phase[k]);
      }
      v[static_cast<std::size_t>(r) * g.n_azimuth_bins + c] = 0.5 + 0.5 * s / waves;
    }
  }
  return Heatmap::FromClamped(g, v);
}

inline FrameSequence SequenceOf(const std::vector<Heatmap>& frames, double dt = 0.1) {
  FrameSequence seq("test");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    seq.Append({static_cast<double>(i) * dt, frames[i],
                Pose2D(0.1 * static_cast<double>(i), 0.0, 0.0)});
  }
  return seq;
}

// Brute-force full cross-correlation, C[center + (dy, dx)] =
// sum a[i, j] * b[i - dy, j - dx].
inline std::vector<double> BruteXcorr(const std::vector<double>& a,
                                      const std::vector<double>& b, int h, int w) {
  const int rows = 2 * h - 1;
  const int cols = 2 * w - 1;
  std::vector<double> out(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int dy = -(h - 1); dy <= h - 1; ++dy) {
    for (int dx = -(w - 1); dx <= w - 1; ++dx) {
      double s = 0.0;
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const int bi = i - dy;
          const int bj = j - dx;
          if (bi < 0 || bi >= h || bj < 0 || bj >= w) continue;
          s += a[static_cast<std::size_t>(i) * w + j] * b[static_cast<std::size_t>(bi) * w + bj];
        }
      }
      out[static_cast<std::size_t>(dy + h - 1) * cols + (dx + w - 1)] = s;
    }
  }
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path ScratchDir(const std::string& name) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("tcbench_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tcbench::testing

#endif  // TCBENCH_TESTS_TEST_UTIL_H_
