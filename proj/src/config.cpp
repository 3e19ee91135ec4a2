#include "wattgov/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wattgov/errors.hpp"

namespace wattgov::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    raise(Errc::ConfigInvalid, key + ": cannot parse number '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    raise(Errc::ConfigInvalid, key + ": cannot parse integer '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  raise(Errc::ConfigInvalid, key + ": cannot parse boolean '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(parse_double(key, trim(cell)));
  }
  if (out.empty()) raise(Errc::ConfigInvalid, key + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (double x : parse_list(key, v)) out.push_back(static_cast<int>(x));
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += fmt(xs[i]);
  }
  return out;
}

std::string fmt_list(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

// One row per key: how to read it into a RunConfig and how to print it.
struct KeyHandler {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, KeyHandler>>& key_table() {
  static const std::vector<std::pair<std::string, KeyHandler>> table = {
      {"Seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.seed = static_cast<std::uint64_t>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"Sample_Step",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.sample_step = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.train.sample_step); }}},
      {"Reuse_Times",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.epochs = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.train.epochs); }}},
      {"Gamma",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.gamma = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.train.gamma); }}},
      {"Lambda_Entropy",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.lambda = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.train.lambda); }}},
      {"Clip_Epsilon",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.clip_eps = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.train.clip_eps); }}},
      {"Policy_Learning_Rate",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.policy_lr = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.train.policy_lr); }}},
      {"Value_Function_Learning_Rate",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.value_lr = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.train.value_lr); }}},
      {"Train_Policy_Iterations",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.train_policy_iters = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) {
          return std::to_string(c.train.train_policy_iters);
        }}},
      {"Train_Value_Iterations",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.train_value_iters = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) {
          return std::to_string(c.train.train_value_iters);
        }}},
      {"Target_kl",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.target_kl = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.train.target_kl); }}},
      {"Hidden_Sizes",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.hidden = parse_int_list(k, v);
        },
        [](const RunConfig& c) { return fmt_list(c.train.hidden); }}},
      {"Use_GAE",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.use_gae = parse_bool(k, v);
        },
        [](const RunConfig& c) { return c.train.use_gae ? "1" : "0"; }}},
      {"CPU_Power_W",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.cpu.power_w = parse_list(k, v);
        },
        [](const RunConfig& c) { return fmt_list(c.env.cpu.power_w); }}},
      {"CPU_Capacity",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.cpu.capacity = parse_list(k, v);
        },
        [](const RunConfig& c) { return fmt_list(c.env.cpu.capacity); }}},
      {"CPU_Idle_W",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.cpu.idle_w = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.cpu.idle_w); }}},
      {"GPU_Power_W",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.gpu.power_w = parse_list(k, v);
        },
        [](const RunConfig& c) { return fmt_list(c.env.gpu.power_w); }}},
      {"GPU_Capacity",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.gpu.capacity = parse_list(k, v);
        },
        [](const RunConfig& c) { return fmt_list(c.env.gpu.capacity); }}},
      {"GPU_Idle_W",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.gpu.idle_w = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.gpu.idle_w); }}},
      {"Decision_Interval_S",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.dt_s = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.dt_s); }}},
      {"Alpha",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.alpha = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.alpha); }}},
      {"Beta",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.beta = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.beta); }}},
      {"Tau",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.tau = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.tau); }}},
      {"Horizon_Steps",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.horizon_steps = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.env.horizon_steps); }}},
      {"Initial_CPU_Level",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.initial_cpu_level = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) {
          return std::to_string(c.env.initial_cpu_level);
        }}},
      {"Initial_GPU_Level",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.initial_gpu_level = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) {
          return std::to_string(c.env.initial_gpu_level);
        }}},
      {"Watts_Per_Work_Unit",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.watts_per_work_unit = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.watts_per_work_unit); }}},
      {"P_Max_W",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.feature.p_max_w = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.feature.p_max_w); }}},
      {"Slope_Ref_W_Per_S",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.feature.slope_ref_w_per_s = parse_double(k, v);
        },
        [](const RunConfig& c) {
          return fmt(c.env.feature.slope_ref_w_per_s);
        }}},
      {"CV_Ref",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.feature.cv_ref = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.feature.cv_ref); }}},
      {"CV_Threshold",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.feature.cv_threshold = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.feature.cv_threshold); }}},
      {"Backlog_Ref",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.feature.backlog_ref = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.feature.backlog_ref); }}},
      {"Power_Floor_W",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.env.feature.power_floor_w = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.env.feature.power_floor_w); }}},
      {"Workload_Trace",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.workload.trace_path = v;
        },
        [](const RunConfig& c) { return c.workload.trace_path; }}},
      {"Workload_Synthetic",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.workload.synthetic = v;
        },
        [](const RunConfig& c) { return c.workload.synthetic; }}},
      {"Trace_Rate_Hz",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.workload.trace_rate_hz = parse_double(k, v);
        },
        [](const RunConfig& c) { return fmt(c.workload.trace_rate_hz); }}},
      {"Report_Windows_S",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.report_windows = parse_list(k, v);
        },
        [](const RunConfig& c) { return fmt_list(c.report_windows); }}},
  };
  return table;
}

const KeyHandler* find_key(const std::string& key) {
  for (const auto& [name, handler] : key_table()) {
    if (name == key) return &handler;
  }
  return nullptr;
}

void apply_line(RunConfig& cfg, const std::string& raw, std::size_t line_no) {
  const std::string line = trim(raw);
  if (line.empty() || line[0] == '#') return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    raise(Errc::ConfigInvalid,
          "line " + std::to_string(line_no) + ": expected Key = value");
  }
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  const KeyHandler* handler = find_key(key);
  if (handler == nullptr) {
    raise(Errc::ConfigInvalid, "unknown key '" + key + "'");
  }
  handler->set(cfg, key, value);
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  env.validate();
  if (!workload.trace_path.empty() && !workload.synthetic.empty()) {
    raise(Errc::ConfigInvalid,
          "Workload_Trace and Workload_Synthetic are mutually exclusive");
  }
  if (workload.trace_path.empty() && workload.synthetic.empty()) {
    raise(Errc::ConfigInvalid,
          "one of Workload_Trace or Workload_Synthetic is required");
  }
  if (!(workload.trace_rate_hz > 0.0)) {
    raise(Errc::ConfigInvalid, "Trace_Rate_Hz must be > 0");
  }
  if (report_windows.empty()) {
    raise(Errc::ConfigInvalid, "Report_Windows_S must be non-empty");
  }
  for (double w : report_windows) {
    if (!(w > 0.0)) raise(Errc::ConfigInvalid, "Report_Windows_S must be > 0");
  }
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    apply_line(cfg, line, line_no);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::NoSuchFile, "cannot open config file '" + path + "'");
  return parse_run_config(in);
}

void apply_env_overrides(RunConfig& cfg) {
  for (const auto& [name, handler] : key_table()) {
    const std::string var = "WATTGOV_" + name;
    if (const char* value = std::getenv(var.c_str())) {
      handler.set(cfg, name, value);
    }
  }
}

void write_run_config(const RunConfig& cfg, std::ostream& out) {
  for (const auto& [name, handler] : key_table()) {
    out << name << " = " << handler.get(cfg) << "\n";
  }
  if (!out) raise(Errc::SinkError, "failed writing config");
}

std::uint64_t env_block_hash(const RunConfig& cfg) {
  // environment semantics only: training hyperparameters may differ
  // between a checkpoint and its later evaluation
  static const char* const env_keys[] = {
      "CPU_Power_W",  "CPU_Capacity",       "CPU_Idle_W",
      "GPU_Power_W",  "GPU_Capacity",       "GPU_Idle_W",
      "Decision_Interval_S", "Alpha",       "Beta",
      "Tau",          "Horizon_Steps",      "Initial_CPU_Level",
      "Initial_GPU_Level",   "Watts_Per_Work_Unit", "P_Max_W",
      "Slope_Ref_W_Per_S",   "CV_Ref",      "CV_Threshold",
      "Backlog_Ref",  "Power_Floor_W",      "Workload_Trace",
      "Workload_Synthetic",  "Trace_Rate_Hz"};
  std::uint64_t hash = 0xcbf29ce484222325ull;
  auto eat = [&hash](const std::string& s) {
    for (const char ch : s) {
      hash ^= static_cast<unsigned char>(ch);
      hash *= 0x100000001b3ull;
    }
  };
  for (const char* key : env_keys) {
    const KeyHandler* handler = find_key(key);
    eat(key);
    eat("=");
    eat(handler->get(cfg));
    eat("\n");
  }
  return hash;
}

namespace {

std::map<std::string, std::string> parse_kv_spec(const std::string& key,
                                                 const std::string& body) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      raise(Errc::ConfigInvalid, key + ": expected k=v, got '" + item + "'");
    }
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return kv;
}

double take(std::map<std::string, std::string>& kv, const std::string& name,
            const char* spec_kind) {
  const auto it = kv.find(name);
  if (it == kv.end()) {
    raise(Errc::ConfigInvalid, std::string("Workload_Synthetic ") + spec_kind +
                                   ": missing '" + name + "'");
  }
  const double x = parse_double("Workload_Synthetic " + name, it->second);
  kv.erase(it);
  return x;
}

}  // namespace

telemetry::PowerTrace load_workload(const WorkloadSpec& spec) {
  if (!spec.synthetic.empty()) {
    const auto colon = spec.synthetic.find(':');
    const std::string kind = spec.synthetic.substr(0, colon);
    auto kv = parse_kv_spec(
        "Workload_Synthetic",
        colon == std::string::npos ? "" : spec.synthetic.substr(colon + 1));
    telemetry::PowerTrace trace;
    if (kind == "constant") {
      const double watts = take(kv, "watts", "constant");
      const double duration = take(kv, "duration", "constant");
      const double rate = take(kv, "rate", "constant");
      trace = envsim::synth_constant(watts, duration, rate);
    } else if (kind == "square") {
      const double low = take(kv, "low", "square");
      const double high = take(kv, "high", "square");
      const double period = take(kv, "period", "square");
      const double duty = take(kv, "duty", "square");
      const double duration = take(kv, "duration", "square");
      const double rate = take(kv, "rate", "square");
      trace = envsim::synth_square(low, high, period, duty, duration, rate);
    } else if (kind == "ramp") {
      const double start = take(kv, "start", "ramp");
      const double end = take(kv, "end", "ramp");
      const double duration = take(kv, "duration", "ramp");
      const double rate = take(kv, "rate", "ramp");
      trace = envsim::synth_ramp(start, end, duration, rate);
    } else {
      raise(Errc::ConfigInvalid,
            "Workload_Synthetic: unknown kind '" + kind + "'");
    }
    if (!kv.empty()) {
      raise(Errc::ConfigInvalid,
            "Workload_Synthetic: unknown parameter '" + kv.begin()->first + "'");
    }
    return trace;
  }
  if (!spec.trace_path.empty()) {
    return telemetry::load_trace_csv(spec.trace_path, spec.trace_rate_hz);
  }
  raise(Errc::ConfigInvalid, "no workload configured");
}

}  // namespace wattgov::config
