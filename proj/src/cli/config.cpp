#include "cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>

namespace ionbell::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x))
    throw ConfigError("invalid number for '" + key + "': " + v);
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError("invalid integer for '" + key + "': " + v);
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for '" + key + "': " + v);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& v)>;

std::map<std::string, Setter> make_setters() {
  std::map<std::string, Setter> s;
  auto real = [](double RunConfig::*field) {
    return [field](RunConfig& c, const std::string& k, const std::string& v) {
      c.*field = to_double(k, v);
    };
  };
  auto flag = [](bool RunConfig::*field) {
    return [field](RunConfig& c, const std::string& k, const std::string& v) {
      c.*field = to_bool(k, v);
    };
  };
  auto list = [](std::vector<double> RunConfig::*field) {
    return [field](RunConfig& c, const std::string& k, const std::string& v) {
      try {
        c.*field = parse_list(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("invalid list for '" + k + "': " + e.what());
      }
    };
  };

  s["model"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    if (v == "full")
      c.model = Model::full;
    else if (v == "eliminated")
      c.model = Model::eliminated;
    else
      throw ConfigError("invalid value for '" + k + "': " + v + " (full|eliminated)");
  };
  for (const char* name : {"omega", "omega_r", "omega_rp", "gamma_s", "gamma_sp", "h_r", "xi"})
    s[name] = [](RunConfig& c, const std::string& k, const std::string& v) {
      param_by_name(c.params, k) = to_double(k, v);
    };
  s["n_motional"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    c.n_motional = static_cast<int>(to_integer(k, v));
  };
  s["dt"] = real(&RunConfig::dt);
  s["t_max"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    c.t_max = to_double(k, v);
  };
  s["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    std::uint64_t x = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end) throw ConfigError("invalid seed for '" + k + "': " + v);
    c.seed = x;
  };
  s["ensemble_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    c.ensemble_size = static_cast<int>(to_integer(k, v));
  };
  s["threads"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    c.threads = static_cast<int>(to_integer(k, v));
  };
  s["out"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; };
  s["initial"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    if (v != "gg" && v != "ee" && v != "dark")
      throw ConfigError("invalid value for '" + k + "': " + v + " (gg|ee|dark)");
    c.initial = v;
  };
  s["record_interval"] = real(&RunConfig::record_interval);
  s["truncation_threshold"] = real(&RunConfig::truncation_threshold);
  s["dt_safety"] = real(&RunConfig::dt_safety);
  s["stop_at_steady"] = flag(&RunConfig::stop_at_steady);
  s["slope_threshold"] = real(&RunConfig::slope_threshold);
  s["sustain"] = real(&RunConfig::sustain);
  s["check_interval"] = real(&RunConfig::check_interval);
  s["window"] = real(&RunConfig::window);
  s["asymptote_tolerance"] = real(&RunConfig::asymptote_tolerance);
  s["table1"] = flag(&RunConfig::table1);
  s["table1_h_r"] = list(&RunConfig::table1_h_r);
  s["table1_xi"] = list(&RunConfig::table1_xi);
  s["unraveling"] = [](RunConfig& c, const std::string& k, const std::string& v) {
    if (v == "per_ion")
      c.unraveling = Unraveling::per_ion;
    else if (v == "symmetric_antisymmetric")
      c.unraveling = Unraveling::symmetric_antisymmetric;
    else
      throw ConfigError("invalid value for '" + k + "': " + v +
                        " (per_ion|symmetric_antisymmetric)");
  };
  s["settle"] = real(&RunConfig::settle);
  s["axis1"] = [](RunConfig& c, const std::string&, const std::string& v) { c.axis1 = v; };
  s["axis2"] = [](RunConfig& c, const std::string&, const std::string& v) { c.axis2 = v; };
  s["values1"] = list(&RunConfig::values1);
  s["values2"] = list(&RunConfig::values2);
  s["fit"] = flag(&RunConfig::fit);
  return s;
}

const std::map<std::string, Setter>& setters() {
  static const auto s = make_setters();
  return s;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

SteadyCriteria RunConfig::criteria(double time_cap) const {
  SteadyCriteria c;
  c.slope_threshold = slope_threshold;
  c.sustain = sustain;
  c.time_cap = time_cap;
  c.check_interval = check_interval;
  return c;
}

PropagationOptions RunConfig::propagation() const {
  PropagationOptions o;
  o.record_interval = record_interval;
  o.truncation_threshold = truncation_threshold;
  o.dt_safety = dt_safety;
  return o;
}

void RunConfig::validate() const {
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (n_motional < 2) throw ConfigError("n_motional must be >= 2");
  if (dt < 0) throw ConfigError("dt must be >= 0");
  if (t_max && *t_max < 0) throw ConfigError("t_max must be >= 0");
  if (ensemble_size < 1) throw ConfigError("ensemble_size must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (record_interval < 0) throw ConfigError("record_interval must be >= 0");
  if (!(dt_safety > 0)) throw ConfigError("dt_safety must be > 0");
  if (!(check_interval > 0)) throw ConfigError("check_interval must be > 0");
  if (!(window > 0)) throw ConfigError("window must be > 0");
  if (settle < 0) throw ConfigError("settle must be >= 0");
  for (double x : table1_xi)
    if (!(x > 0 && x <= 1)) throw ConfigError("table1_xi entries must lie in (0, 1]");
  for (double h : table1_h_r)
    if (!(h >= 0)) throw ConfigError("table1_h_r entries must be >= 0");
  SchemeParams probe = params;
  for (const auto* axis : {&axis1, &axis2}) {
    try {
      param_by_name(probe, *axis);
    } catch (const std::invalid_argument&) {
      throw ConfigError("sweep axis '" + *axis + "' is not a scheme parameter");
    }
  }
  if (axis1 == axis2) throw ConfigError("sweep axes must differ");
  if (values1.empty() || values2.empty()) throw ConfigError("sweep value lists must be non-empty");
}

void apply_assignment(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key in '" + assignment + "'");
  cfg.set(key, value);
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<double> parse_list(const std::string& text) {
  const std::string t = trim(text);
  auto number = [](const std::string& s) {
    double x = 0;
    const std::string v = trim(s);
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (v.empty() || ec != std::errc() || p != end || !std::isfinite(x))
      throw std::invalid_argument("bad number '" + v + "'");
    return x;
  };
  std::vector<std::string> parts;
  const bool ranged = t.rfind("linspace:", 0) == 0 || t.rfind("logspace:", 0) == 0;
  const char sep = ranged ? ':' : ',';
  std::size_t start = ranged ? 9 : 0;
  while (true) {
    const auto next = t.find(sep, start);
    parts.push_back(t.substr(start, next == std::string::npos ? std::string::npos : next - start));
    if (next == std::string::npos) break;
    start = next + 1;
  }
  std::vector<double> out;
  if (!ranged) {
    for (const auto& p : parts) out.push_back(number(p));
    return out;
  }
  if (parts.size() != 3) throw std::invalid_argument("range needs start:stop:count");
  const double a = number(parts[0]), b = number(parts[1]);
  const double n = number(parts[2]);
  if (n < 1 || n != std::floor(n)) throw std::invalid_argument("range count must be a positive integer");
  const int count = static_cast<int>(n);
  const bool log = t[1] == 'o';
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : double(i) / double(count - 1);
    const double x = a + (b - a) * f;
    out.push_back(log ? std::pow(10.0, x) : x);
  }
  return out;
}

}  // namespace ionbell::cli
