#pragma once

// Flat key=value run configuration shared by all subcommands.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ionbell/analyze.hpp"
#include "ionbell/scheme.hpp"

namespace ionbell::cli {

/// Bad key, bad value or inconsistent settings. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Model model = Model::eliminated;
  SchemeParams params;
  int n_motional = 20;
  double dt = 0;  // 0: derived from the generator stiffness
  std::optional<double> t_max;  // per-command default when unset
  std::uint64_t seed = 1;
  int ensemble_size = 1;
  int threads = 1;
  std::string out_dir = ".";

  std::string initial = "gg";  // gg | ee | dark
  double record_interval = 1e-5;
  double truncation_threshold = 1e-6;
  double dt_safety = 1.5;

  // steady-state search
  bool stop_at_steady = true;
  double slope_threshold = 1e-3;
  double sustain = 1e-3;
  double check_interval = 1e-4;

  // conditional
  double window = 0.05;
  double asymptote_tolerance = 1e-3;
  bool table1 = true;
  std::vector<double> table1_h_r{1, 10, 100, 1000};
  std::vector<double> table1_xi{0.01, 0.03, 0.10};

  // trajectories
  Unraveling unraveling = Unraveling::per_ion;
  double settle = 2e-3;  // plateau estimate skips this long after each detection

  // sweep
  std::string axis1 = "omega";
  std::vector<double> values1{26e3};
  std::string axis2 = "omega_r";
  std::vector<double> values2{20e3};
  bool fit = false;

  double t_max_or(double fallback) const { return t_max ? *t_max : fallback; }
  SteadyCriteria criteria(double time_cap) const;
  PropagationOptions propagation() const;

  /// Set one key; throws ConfigError naming the key on failure.
  void set(const std::string& key, const std::string& value);
  /// Cross-field checks after all keys are applied.
  void validate() const;
};

/// Every key accepted by RunConfig::set, in documentation order.
const std::vector<std::string>& config_keys();

/// Parse "key=value" lines; '#' starts a comment. Later keys override earlier.
void load_config_file(RunConfig& cfg, const std::string& path);
void apply_assignment(RunConfig& cfg, const std::string& assignment);

/// "a,b,c", "linspace:a:b:n" or "logspace:a:b:n" (decades, as numpy).
std::vector<double> parse_list(const std::string& text);

}  // namespace ionbell::cli
