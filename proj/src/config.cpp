#include "twbreather/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "twbreather/errors.hpp"

namespace twb {

namespace {

constexpr std::string_view kKeys[] = {
    "N",       "C",         "C_as_multiple_of_invN", "M",           "L",
    "t_final", "n_steps",   "n_traj",                "n_batches",   "master_seed",
    "snapshot_stride",      "g1_stride",             "grid_mode",   "deterministic_reduction",
    "outputs", "output_dir",
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const Settings& s, const std::string& key) {
  const auto it = s.values.find(key);
  if (it == s.values.end() || it->second.line == 0) return "key '" + key + "'";
  return s.source + ":" + std::to_string(it->second.line) + ": key '" + key + "'";
}

template <typename T>
T parse_number(const Settings& s, const std::string& key, const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = text.data() + text.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e) {
    throw ConfigError(where(s, key) + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

bool parse_bool(const Settings& s, const std::string& key, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(where(s, key) + ": expected true or false, got '" + text + "'");
}

const std::string* find(const Settings& s, const std::string& key) {
  const auto it = s.values.find(key);
  return it == s.values.end() ? nullptr : &it->second.value;
}

}  // namespace

bool operator==(const RunConfig& a, const RunConfig& b) {
  const RunPlan& p = a.plan;
  const RunPlan& q = b.plan;
  return p.n_traj == q.n_traj && p.n_batches == q.n_batches && p.master_seed == q.master_seed &&
         p.stepper.C == q.stepper.C && p.stepper.dt == q.stepper.dt && p.stepper.n_steps == q.stepper.n_steps &&
         p.stepper.snapshot_stride == q.stepper.snapshot_stride && p.initial.N == q.initial.N &&
         p.initial.center == q.initial.center && p.M == q.M && p.L == q.L && p.grid_mode == q.grid_mode &&
         p.g1_stride == q.g1_stride && p.deterministic == q.deterministic && p.keep_g1 == q.keep_g1 &&
         a.t_final == b.t_final && a.outputs == b.outputs && a.output_dir == b.output_dir;
}

void Settings::set(const std::string& key, const std::string& value, int line) {
  if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
    const std::string loc = line > 0 ? source + ":" + std::to_string(line) + ": " : "";
    throw ConfigError(loc + "unknown key '" + key + "'");
  }
  values[key] = Entry{value, line};
}

std::vector<std::string_view> known_keys() { return {std::begin(kKeys), std::end(kKeys)}; }

Settings parse_settings(std::string_view text, const std::string& source) {
  Settings s;
  s.source = source;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (s.values.count(key)) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": key '" + key + "' given twice");
    }
    s.set(key, value, lineno);
  }
  return s;
}

void apply_override(Settings& settings, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  settings.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig resolve_config(const Settings& s, bool require_N) {
  RunConfig cfg;
  RunPlan& plan = cfg.plan;

  auto real = [&](const char* key, double fallback) {
    const std::string* v = find(s, key);
    return v ? parse_number<double>(s, key, *v) : fallback;
  };
  auto integer = [&](const char* key, long long fallback) {
    const std::string* v = find(s, key);
    return v ? parse_number<long long>(s, key, *v) : fallback;
  };

  if (require_N && !find(s, "N")) throw ConfigError("missing required key 'N'");
  plan.initial.N = real("N", 1000);
  if (!(plan.initial.N > 0)) throw ConfigError(where(s, "N") + ": N must be positive");

  const std::string* c_abs = find(s, "C");
  const std::string* c_rel = find(s, "C_as_multiple_of_invN");
  if (c_abs && c_rel) throw ConfigError("keys 'C' and 'C_as_multiple_of_invN' are mutually exclusive");
  plan.stepper.C = c_abs ? real("C", 0) : real("C_as_multiple_of_invN", -8) / plan.initial.N;

  const long long M = integer("M", 256);
  if (M < 8 || (M & (M - 1)) != 0) throw ConfigError(where(s, "M") + ": M must be a power of two >= 8");
  plan.M = static_cast<Index>(M);
  plan.L = real("L", 20);
  if (!(plan.L > 0)) throw ConfigError(where(s, "L") + ": L must be positive");

  cfg.t_final = real("t_final", 5);
  if (!(cfg.t_final > 0)) throw ConfigError(where(s, "t_final") + ": t_final must be positive");
  const long long n_steps = integer("n_steps", 10000);
  if (n_steps < 1) throw ConfigError(where(s, "n_steps") + ": n_steps must be >= 1");
  plan.stepper.n_steps = static_cast<Index>(n_steps);
  plan.stepper.dt = cfg.t_final / static_cast<double>(n_steps);

  const long long stride = integer("snapshot_stride", 50);
  if (stride < 1) throw ConfigError(where(s, "snapshot_stride") + ": snapshot_stride must be >= 1");
  plan.stepper.snapshot_stride = static_cast<Index>(stride);

  const long long g1 = integer("g1_stride", 20);
  if (g1 < 0) throw ConfigError(where(s, "g1_stride") + ": g1_stride must be >= 0");
  plan.g1_stride = static_cast<Index>(g1);

  plan.n_traj = integer("n_traj", 1000);
  if (plan.n_traj < 1) throw ConfigError(where(s, "n_traj") + ": n_traj must be >= 1");
  const long long B = integer("n_batches", 10);
  if (B < 1 || B > plan.n_traj) {
    throw ConfigError(where(s, "n_batches") + ": n_batches must lie in [1, n_traj]");
  }
  plan.n_batches = static_cast<int>(B);

  if (const std::string* v = find(s, "master_seed")) plan.master_seed = parse_number<std::uint64_t>(s, "master_seed", *v);

  if (const std::string* v = find(s, "grid_mode")) {
    if (*v == "balanced") plan.grid_mode = GridMode::balanced;
    else if (*v == "periodic") plan.grid_mode = GridMode::periodic;
    else throw ConfigError(where(s, "grid_mode") + ": expected balanced or periodic, got '" + *v + "'");
  }
  if (const std::string* v = find(s, "deterministic_reduction")) {
    plan.deterministic = parse_bool(s, "deterministic_reduction", *v);
  }

  if (const std::string* v = find(s, "outputs")) {
    cfg.outputs.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        const Output o = parse_output(item);
        if (std::find(cfg.outputs.begin(), cfg.outputs.end(), o) == cfg.outputs.end()) cfg.outputs.push_back(o);
      } catch (const ConfigError& e) {
        throw ConfigError(where(s, "outputs") + ": " + e.what());
      }
    }
  }
  plan.keep_g1 = std::find(cfg.outputs.begin(), cfg.outputs.end(), Output::g1_matrix) != cfg.outputs.end();
  if (plan.keep_g1 && plan.g1_stride == 0) {
    throw ConfigError(where(s, "outputs") + ": g1_matrix output needs g1_stride > 0");
  }
  if (const std::string* v = find(s, "output_dir")) cfg.output_dir = *v;

  plan.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  Settings s = parse_settings(buf.str(), path.string());
  for (const auto& o : overrides) apply_override(s, o);
  return resolve_config(s, true);
}

RunConfig default_config(const std::vector<std::string>& overrides) {
  Settings s;
  for (const auto& o : overrides) apply_override(s, o);
  return resolve_config(s, false);
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  const RunPlan& p = c.plan;
  nlohmann::ordered_json j;
  j["N"] = p.initial.N;
  j["C"] = p.stepper.C;
  j["M"] = p.M;
  j["L"] = p.L;
  j["t_final"] = c.t_final;
  j["n_steps"] = p.stepper.n_steps;
  j["n_traj"] = p.n_traj;
  j["n_batches"] = p.n_batches;
  j["master_seed"] = p.master_seed;
  j["snapshot_stride"] = p.stepper.snapshot_stride;
  j["g1_stride"] = p.g1_stride;
  j["grid_mode"] = to_string(p.grid_mode);
  j["deterministic_reduction"] = p.deterministic;
  std::string outs;
  for (Output o : c.outputs) outs += (outs.empty() ? "" : ",") + std::string(output_name(o));
  j["outputs"] = outs;
  j["output_dir"] = c.output_dir;
  return j;
}

std::string config_to_text(const RunConfig& c) {
  std::ostringstream out;
  const nlohmann::ordered_json j = config_to_json(c);
  for (const auto& [key, value] : j.items()) {
    out << key << " = ";
    if (value.is_string()) {
      out << value.get<std::string>();
    } else if (value.is_number_float()) {
      out << format_double(value.get<double>());
    } else {
      out << value.dump();
    }
    out << '\n';
  }
  return out.str();
}

RunConfig config_from_json(const nlohmann::json& j) {
  Settings s;
  s.source = "<manifest>";
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      s.set(key, value.get<std::string>());
    } else if (value.is_number_float()) {
      s.set(key, format_double(value.get<double>()));
    } else {
      s.set(key, value.dump());
    }
  }
  return resolve_config(s, true);
}

}  // namespace twb
