#include "wattgov/feature.hpp"

#include <algorithm>
#include <cmath>

namespace wattgov::feature {

const char* to_string(LoadClass c) {
  switch (c) {
    case LoadClass::High: return "High";
    case LoadClass::Low: return "Low";
    case LoadClass::Stable: return "Stable";
  }
  return "?";
}

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double coeff_of_variation(double mean_w, double variance_w2,
                          const FeatureConfig& cfg) {
  return std::sqrt(std::max(variance_w2, 0.0)) /
         std::max(mean_w, cfg.power_floor_w);
}

double level_norm(int level, int levels) {
  if (levels <= 1) return 0.0;
  return static_cast<double>(level) / static_cast<double>(levels - 1);
}

}  // namespace

LoadClass classify_load(double mean_w, double variance_w2, double slope_w_per_s,
                        const FeatureConfig& cfg) {
  if (coeff_of_variation(mean_w, variance_w2, cfg) < cfg.cv_threshold) {
    return LoadClass::Stable;
  }
  return slope_w_per_s > 0.0 ? LoadClass::High : LoadClass::Low;
}

Observation build_observation(const telemetry::WindowStats& cpu,
                              const telemetry::WindowStats& gpu, int cpu_level,
                              int cpu_levels, int gpu_level, int gpu_levels,
                              double backlog, const FeatureConfig& cfg) {
  Observation obs;
  obs.cpu_power_norm = clamp01(cpu.mean_w / cfg.p_max_w);
  obs.gpu_power_norm = clamp01(gpu.mean_w / cfg.p_max_w);
  obs.cpu_trend = std::clamp(cpu.slope_w_per_s / cfg.slope_ref_w_per_s, -1.0, 1.0);
  obs.gpu_trend = std::clamp(gpu.slope_w_per_s / cfg.slope_ref_w_per_s, -1.0, 1.0);
  obs.cpu_smooth = clamp01(coeff_of_variation(cpu.mean_w, cpu.variance_w2, cfg) /
                           cfg.cv_ref);
  obs.gpu_smooth = clamp01(coeff_of_variation(gpu.mean_w, gpu.variance_w2, cfg) /
                           cfg.cv_ref);
  obs.cpu_level_norm = level_norm(cpu_level, cpu_levels);
  obs.gpu_level_norm = level_norm(gpu_level, gpu_levels);
  obs.backlog_norm = clamp01(backlog / std::max(cfg.backlog_ref, 1e-12));
  return obs;
}

}  // namespace wattgov::feature
