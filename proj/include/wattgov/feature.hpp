#pragma once

#include <array>

#include "wattgov/telemetry.hpp"

namespace wattgov::feature {

enum class LoadClass { High, Low, Stable };

const char* to_string(LoadClass c);

struct FeatureConfig {
  double p_max_w = 15.0;         // normalization ceiling for rail power
  double slope_ref_w_per_s = 5.0;
  double cv_ref = 0.2;
  double cv_threshold = 0.05;    // below this coefficient of variation: Stable
  double backlog_ref = 0.0;      // <= 0 means: derive from workload at env build
  double power_floor_w = 1e-6;   // guards divisions by near-zero mean power
};

// Controller state vector. Every field is normalized and clamped, so the
// networks only ever see bounded inputs.
struct Observation {
  static constexpr int kDim = 9;

  double cpu_power_norm = 0.0;  // mean_w / p_max, clamped to [0, 1]
  double gpu_power_norm = 0.0;
  double cpu_trend = 0.0;       // slope / slope_ref, clamped to [-1, 1]
  double gpu_trend = 0.0;
  double cpu_smooth = 0.0;      // cv / cv_ref, clamped to [0, 1]
  double gpu_smooth = 0.0;
  double cpu_level_norm = 0.0;  // level / (levels - 1); 0 when single level
  double gpu_level_norm = 0.0;
  double backlog_norm = 0.0;    // backlog / backlog_ref, clamped to [0, 1]

  std::array<double, kDim> as_array() const {
    return {cpu_power_norm, gpu_power_norm, cpu_trend,      gpu_trend,
            cpu_smooth,     gpu_smooth,     cpu_level_norm, gpu_level_norm,
            backlog_norm};
  }
};

// Coefficient of variation sqrt(var)/max(mean, floor) below cv_threshold
// means Stable; otherwise the trend sign picks High (rising) or Low.
LoadClass classify_load(double mean_w, double variance_w2, double slope_w_per_s,
                        const FeatureConfig& cfg);

Observation build_observation(const telemetry::WindowStats& cpu,
                              const telemetry::WindowStats& gpu, int cpu_level,
                              int cpu_levels, int gpu_level, int gpu_levels,
                              double backlog, const FeatureConfig& cfg);

}  // namespace wattgov::feature
