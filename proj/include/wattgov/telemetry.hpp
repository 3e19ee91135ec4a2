#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wattgov::telemetry {

// One telemetry sample. Powers are always recomputed as V*I on load, so a
// trace never carries a power column that disagrees with its rails.
struct PowerSample {
  double t_s = 0.0;
  double cpu_v = 0.0;
  double cpu_i = 0.0;
  double gpu_v = 0.0;
  double gpu_i = 0.0;
  double cpu_w = 0.0;
  double gpu_w = 0.0;

  double total_w() const { return cpu_w + gpu_w; }
};

enum class Channel { Cpu, Gpu, Total };

struct PowerTrace {
  std::vector<PowerSample> samples;
  double nominal_rate_hz = 2000.0;
  // set when the median sample gap deviates more than 10% from 1/nominal_rate
  bool irregular = false;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  double start_time() const { return samples.front().t_s; }
  double end_time() const { return samples.back().t_s; }
  double span() const { return end_time() - start_time(); }
};

// Recomputes rail powers, checks timestamps strictly increase, flags
// irregular sampling. Raises EmptyTrace / NonMonotonicTime.
PowerTrace make_trace(std::vector<PowerSample> samples, double nominal_rate_hz);

// CSV format: header "t_s,cpu_v,cpu_i,gpu_v,gpu_i"; '#' lines and blank
// lines are skipped. Raises MalformedRow with the 1-based line number.
PowerTrace parse_trace_csv(std::istream& in, double nominal_rate_hz = 2000.0);
PowerTrace load_trace_csv(const std::string& path, double nominal_rate_hz = 2000.0);
void write_trace_csv(const PowerTrace& trace, std::ostream& out);

// Trapezoidal energy over [t0, t1] in milliwatt hours (1 mWh = 3.6 J).
// Endpoints may fall between samples; they are linearly interpolated.
// Raises RangeOutsideTrace when [t0, t1] is not inside the trace.
double integrate_energy_mwh(const PowerTrace& trace, double t0, double t1,
                            Channel channel);

// Linear-interpolation resample onto a uniform grid at rate_hz covering the
// full span. Grid has round(span*rate_hz) intervals; both endpoints are kept.
PowerTrace resample(const PowerTrace& trace, double rate_hz);

struct WindowStats {
  double mean_w = 0.0;
  double variance_w2 = 0.0;    // population variance
  double slope_w_per_s = 0.0;  // least-squares trend
  std::size_t count = 0;
};

// Stats over samples with t0 <= t <= t1 on the chosen channel.
// Raises WindowTooSmall when fewer than 2 samples fall in the window.
WindowStats window_stats(const PowerTrace& trace, double t0, double t1,
                         Channel channel);

double channel_power(const PowerSample& s, Channel channel);

}  // namespace wattgov::telemetry
