#include "wattgov/telemetry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "wattgov/errors.hpp"

namespace wattgov::telemetry {

double channel_power(const PowerSample& s, Channel channel) {
  switch (channel) {
    case Channel::Cpu: return s.cpu_w;
    case Channel::Gpu: return s.gpu_w;
    case Channel::Total: return s.total_w();
  }
  return 0.0;
}

namespace {

void set_irregular_flag(PowerTrace& trace) {
  trace.irregular = false;
  if (trace.samples.size() < 2 || trace.nominal_rate_hz <= 0.0) return;
  std::vector<double> gaps;
  gaps.reserve(trace.samples.size() - 1);
  for (std::size_t i = 1; i < trace.samples.size(); ++i) {
    gaps.push_back(trace.samples[i].t_s - trace.samples[i - 1].t_s);
  }
  auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  double median = *mid;
  if (gaps.size() % 2 == 0) {
    double below = *std::max_element(gaps.begin(), mid);
    median = 0.5 * (median + below);
  }
  const double expected = 1.0 / trace.nominal_rate_hz;
  trace.irregular = std::abs(median - expected) > 0.10 * expected;
}

double interp_power(const PowerSample& a, const PowerSample& b, double t,
                    Channel channel) {
  const double w = (t - a.t_s) / (b.t_s - a.t_s);
  return (1.0 - w) * channel_power(a, channel) + w * channel_power(b, channel);
}

PowerSample interp_sample(const PowerSample& a, const PowerSample& b, double t) {
  const double w = (t - a.t_s) / (b.t_s - a.t_s);
  PowerSample s;
  s.t_s = t;
  s.cpu_v = (1.0 - w) * a.cpu_v + w * b.cpu_v;
  s.cpu_i = (1.0 - w) * a.cpu_i + w * b.cpu_i;
  s.gpu_v = (1.0 - w) * a.gpu_v + w * b.gpu_v;
  s.gpu_i = (1.0 - w) * a.gpu_i + w * b.gpu_i;
  s.cpu_w = s.cpu_v * s.cpu_i;
  s.gpu_w = s.gpu_v * s.gpu_i;
  return s;
}

// first sample index with t >= value
std::size_t lower_index(const PowerTrace& trace, double t) {
  auto it = std::lower_bound(
      trace.samples.begin(), trace.samples.end(), t,
      [](const PowerSample& s, double v) { return s.t_s < v; });
  return static_cast<std::size_t>(it - trace.samples.begin());
}

}  // namespace

PowerTrace make_trace(std::vector<PowerSample> samples, double nominal_rate_hz) {
  if (samples.empty()) raise(Errc::EmptyTrace, "trace has no samples");
  for (auto& s : samples) {
    s.cpu_w = s.cpu_v * s.cpu_i;
    s.gpu_w = s.gpu_v * s.gpu_i;
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t_s > samples[i - 1].t_s)) {
      raise(Errc::NonMonotonicTime,
            "t_s must strictly increase; violated at sample " +
                std::to_string(i) + " (t=" + std::to_string(samples[i].t_s) +
                ")");
    }
  }
  PowerTrace trace;
  trace.samples = std::move(samples);
  trace.nominal_rate_hz = nominal_rate_hz;
  set_irregular_flag(trace);
  return trace;
}

PowerTrace parse_trace_csv(std::istream& in, double nominal_rate_hz) {
  std::vector<PowerSample> samples;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      // optional header row like "t_s,cpu_v,cpu_i,gpu_v,gpu_i": skip only
      // if the first field is not numeric, headerless files keep row one
      const std::string head = line.substr(first, line.find(',') - first);
      try {
        std::size_t used = 0;
        (void)std::stod(head, &used);
      } catch (const std::exception&) {
        continue;
      }
    }
    std::array<double, 5> fields{};
    std::size_t pos = 0;
    for (int f = 0; f < 5; ++f) {
      std::size_t comma = line.find(',', pos);
      std::string cell = line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        std::size_t used = 0;
        fields[static_cast<std::size_t>(f)] = std::stod(cell, &used);
        while (used < cell.size() &&
               (cell[used] == ' ' || cell[used] == '\t')) {
          ++used;
        }
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        raise(Errc::MalformedRow, "line " + std::to_string(line_no) +
                                      ": cannot parse field " +
                                      std::to_string(f + 1) + " ('" + cell +
                                      "')");
      }
      if (f < 4) {
        if (comma == std::string::npos) {
          raise(Errc::MalformedRow, "line " + std::to_string(line_no) +
                                        ": expected 5 fields, got " +
                                        std::to_string(f + 1));
        }
        pos = comma + 1;
      } else if (comma != std::string::npos) {
        raise(Errc::MalformedRow,
              "line " + std::to_string(line_no) + ": more than 5 fields");
      }
    }
    PowerSample s;
    s.t_s = fields[0];
    s.cpu_v = fields[1];
    s.cpu_i = fields[2];
    s.gpu_v = fields[3];
    s.gpu_i = fields[4];
    samples.push_back(s);
  }
  return make_trace(std::move(samples), nominal_rate_hz);
}

PowerTrace load_trace_csv(const std::string& path, double nominal_rate_hz) {
  std::ifstream in(path);
  if (!in) raise(Errc::NoSuchFile, "cannot open trace file '" + path + "'");
  return parse_trace_csv(in, nominal_rate_hz);
}

void write_trace_csv(const PowerTrace& trace, std::ostream& out) {
  out << "t_s,cpu_v,cpu_i,gpu_v,gpu_i\n";
  char buf[192];
  for (const auto& s : trace.samples) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t_s,
                  s.cpu_v, s.cpu_i, s.gpu_v, s.gpu_i);
    out << buf;
  }
  if (!out) raise(Errc::SinkError, "failed writing trace CSV");
}

double integrate_energy_mwh(const PowerTrace& trace, double t0, double t1,
                            Channel channel) {
  if (trace.empty()) raise(Errc::EmptyTrace, "cannot integrate empty trace");
  if (!(t0 <= t1)) {
    raise(Errc::RangeOutsideTrace, "t0 must not exceed t1");
  }
  if (t0 < trace.start_time() || t1 > trace.end_time()) {
    raise(Errc::RangeOutsideTrace,
          "[" + std::to_string(t0) + ", " + std::to_string(t1) +
              "] outside trace span [" + std::to_string(trace.start_time()) +
              ", " + std::to_string(trace.end_time()) + "]");
  }
  if (t0 == t1) return 0.0;

  const auto& s = trace.samples;
  std::size_t i = lower_index(trace, t0);
  double prev_t = t0;
  double prev_p = (i < s.size() && s[i].t_s == t0)
                      ? channel_power(s[i], channel)
                      : interp_power(s[i - 1], s[i], t0, channel);
  if (i < s.size() && s[i].t_s == t0) ++i;

  double joules = 0.0;
  while (i < s.size() && s[i].t_s < t1) {
    const double p = channel_power(s[i], channel);
    joules += 0.5 * (prev_p + p) * (s[i].t_s - prev_t);
    prev_t = s[i].t_s;
    prev_p = p;
    ++i;
  }
  double end_p = (i < s.size() && s[i].t_s == t1)
                     ? channel_power(s[i], channel)
                     : interp_power(s[i - 1], s[i], t1, channel);
  joules += 0.5 * (prev_p + end_p) * (t1 - prev_t);
  return joules / 3.6;
}

PowerTrace resample(const PowerTrace& trace, double rate_hz) {
  if (trace.empty()) raise(Errc::EmptyTrace, "cannot resample empty trace");
  if (!(rate_hz > 0.0)) {
    raise(Errc::ConfigInvalid, "resample rate must be positive");
  }
  const auto& s = trace.samples;
  if (s.size() == 1 || trace.span() <= 0.0) {
    PowerTrace out = trace;
    out.nominal_rate_hz = rate_hz;
    set_irregular_flag(out);
    return out;
  }
  const double t0 = trace.start_time();
  const double t1 = trace.end_time();
  const auto intervals =
      std::max<long long>(1, std::llround((t1 - t0) * rate_hz));
  std::vector<PowerSample> grid;
  grid.reserve(static_cast<std::size_t>(intervals) + 1);
  std::size_t seg = 1;
  for (long long j = 0; j <= intervals; ++j) {
    const double t =
        (j == intervals)
            ? t1
            : t0 + (t1 - t0) * (static_cast<double>(j) /
                                static_cast<double>(intervals));
    while (seg + 1 < s.size() && s[seg].t_s < t) ++seg;
    grid.push_back(interp_sample(s[seg - 1], s[seg], t));
  }
  return make_trace(std::move(grid), rate_hz);
}

WindowStats window_stats(const PowerTrace& trace, double t0, double t1,
                         Channel channel) {
  if (trace.empty()) raise(Errc::EmptyTrace, "cannot take stats of empty trace");
  const auto& s = trace.samples;
  std::size_t begin = lower_index(trace, t0);
  std::size_t end = begin;
  while (end < s.size() && s[end].t_s <= t1) ++end;
  const std::size_t n = end - begin;
  if (n < 2) {
    raise(Errc::WindowTooSmall,
          "window [" + std::to_string(t0) + ", " + std::to_string(t1) +
              "] holds " + std::to_string(n) + " samples; need at least 2");
  }
  double mean_t = 0.0, mean_p = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    mean_t += s[i].t_s;
    mean_p += channel_power(s[i], channel);
  }
  mean_t /= static_cast<double>(n);
  mean_p /= static_cast<double>(n);
  double var = 0.0, cov = 0.0, tss = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double dp = channel_power(s[i], channel) - mean_p;
    const double dt = s[i].t_s - mean_t;
    var += dp * dp;
    cov += dt * dp;
    tss += dt * dt;
  }
  WindowStats stats;
  stats.mean_w = mean_p;
  stats.variance_w2 = var / static_cast<double>(n);
  stats.slope_w_per_s = tss > 0.0 ? cov / tss : 0.0;
  stats.count = n;
  return stats;
}

}  // namespace wattgov::telemetry
