#include "cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "cli/output.hpp"
#include "ionbell/ionbell.hpp"

namespace ionbell::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

const char* model_name(Model m) { return m == Model::full ? "full" : "eliminated"; }

json params_json(const SchemeParams& p) {
  return {{"omega", p.omega},       {"omega_r", p.omega_r},   {"omega_rp", p.omega_rp},
          {"gamma_s", p.gamma_s},   {"gamma_sp", p.gamma_sp}, {"h_r", p.h_r},
          {"xi", p.xi}};
}

json run_json(const RunConfig& cfg, const char* command) {
  return {{"command", command},
          {"schema_version", kSchemaVersion},
          {"model", model_name(cfg.model)},
          {"params", params_json(cfg.params)},
          {"n_motional", cfg.n_motional},
          {"gamma_eff", cfg.params.gamma_eff()},
          {"elimination_valid", cfg.params.elimination_valid()}};
}

Generator<double> make_generator(const RunConfig& cfg, const SchemeParams& p) {
  auto gen = build_generator<double>(cfg.model, p, cfg.n_motional);
  if (cfg.unraveling != Unraveling::per_ion) gen = unraveling_variant(gen, cfg.unraveling);
  return gen;
}

DensityState<double> initial_state(const RunConfig& cfg, const HilbertSpec& spec) {
  if (cfg.initial == "ee") return product_state<double>(spec, Level::e, Level::e);
  if (cfg.initial == "dark") return dark_state<double>(spec);
  return product_state<double>(spec, Level::g, Level::g);
}

void write_series(const fs::path& path, const std::string& kind, const TimeSeries<double>& s) {
  CsvWriter w(path, kind, {"t", "fidelity", "error", "trace", "mean_phonon", "top_level_population"});
  for (std::size_t i = 0; i < s.size(); ++i) {
    w << s.times[i] << s.fidelity[i] << 1.0 - s.fidelity[i] << s.trace[i] << s.mean_phonon[i]
      << s.top_level_population[i];
    w.end_row();
  }
  w.close();
}

/// Run fn(0..n-1) over `threads` workers; the first exception is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int k = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < k; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

ConditionalOptions conditional_options(const RunConfig& cfg) {
  ConditionalOptions o;
  o.window = cfg.window;
  o.slope_threshold = cfg.slope_threshold;
  o.sustain = cfg.sustain;
  o.asymptote_tolerance = cfg.asymptote_tolerance;
  o.record_interval = cfg.record_interval;
  o.dt_safety = cfg.dt_safety;
  return o;
}

std::string xi_column(double xi) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "F_C_%.2f", xi);
  return buf;
}

}  // namespace

void cmd_steady(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const auto dir = prepare_out(cfg);
  const auto gen = make_generator(cfg, cfg.params);
  const auto rho0 = initial_state(cfg, gen.spec());
  const double t_max = cfg.t_max_or(0.1);

  json summary = run_json(cfg, "steady");
  PropagationResult<double> run;
  if (cfg.stop_at_steady) {
    auto ss = steady_state(gen, rho0, cfg.criteria(t_max), cfg.dt, cfg.propagation());
    summary["converged"] = ss.converged;
    run = std::move(ss.run);
  } else {
    run = integrate(gen, rho0, t_max, cfg.dt, cfg.propagation());
    summary["converged"] = nullptr;
  }
  write_series(dir / "timeseries.csv", "timeseries", run.series);

  const double f = run.series.fidelity.back();
  summary["fidelity"] = f;
  summary["error"] = 1.0 - f;
  summary["time"] = run.series.times.back();
  summary["dt"] = run.dt;
  summary["max_trace_error"] = run.max_trace_error;
  summary["max_top_level_population"] = run.max_top_level_population;
  summary["final_top_level_population"] = run.series.top_level_population.back();
  summary["truncation_violation"] = run.series.top_level_population.back() > cfg.truncation_threshold;
  summary["wall_time_s"] = seconds_since(t0);
  write_json(dir / "summary.json", summary);
}

void cmd_trajectory(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const auto dir = prepare_out(cfg);
  const auto gen = make_generator(cfg, cfg.params);
  const auto rho0 = initial_state(cfg, gen.spec());
  const double t_max = cfg.t_max_or(0.02);
  TrajectoryOptions topt;
  topt.record_interval = cfg.record_interval;
  topt.dt_safety = cfg.dt_safety;
  const double dt = cfg.dt > 0 ? cfg.dt : default_time_step(gen, cfg.dt_safety);

  const auto records = run_ensemble(gen, rho0, t_max, dt, cfg.seed, cfg.ensemble_size, cfg.threads, topt);
  const auto& first = records.front();
  {
    CsvWriter w(dir / "trajectory.csv", "trajectory",
                {"t", "fidelity", "survival", "mean_phonon", "top_level_population"});
    const auto& s = first.series;
    for (std::size_t i = 0; i < s.size(); ++i) {
      w << s.times[i] << s.fidelity[i] << s.trace[i] << s.mean_phonon[i] << s.top_level_population[i];
      w.end_row();
    }
    w.close();
  }
  {
    CsvWriter w(dir / "events.csv", "events", {"t", "channel"});
    for (const auto& e : first.events) {
      w << e.time << e.channel;
      w.end_row();
    }
    w.close();
  }

  json summary = run_json(cfg, "trajectory");
  summary["seed"] = cfg.seed;
  summary["ensemble_size"] = cfg.ensemble_size;
  summary["dt"] = dt;
  summary["unraveling"] = cfg.unraveling == Unraveling::per_ion ? "per_ion" : "symmetric_antisymmetric";
  summary["events_first_trajectory"] = first.events.size();

  if (records.size() >= 2) {
    CsvWriter ev(dir / "ensemble_events.csv", "ensemble_events", {"trajectory", "t", "channel"});
    std::size_t total = 0;
    for (std::size_t r = 0; r < records.size(); ++r)
      for (const auto& e : records[r].events) {
        ev << static_cast<int>(r) << e.time << e.channel;
        ev.end_row();
        ++total;
      }
    ev.close();

    const auto avg = ensemble_average(records);
    PropagationOptions popt = cfg.propagation();
    popt.record_interval = cfg.record_interval;
    const auto me = integrate(gen, rho0, t_max, dt, popt);
    if (me.series.size() != avg.times.size())
      throw std::logic_error("ensemble and master-equation grids differ");
    CsvWriter w(dir / "ensemble.csv", "ensemble",
                {"t", "mean_fidelity", "standard_error", "unconditional_fidelity"});
    double max_z = 0, max_dev = 0;
    int outside = 0;
    for (std::size_t i = 0; i < avg.times.size(); ++i) {
      const double dev = std::abs(avg.mean_fidelity[i] - me.series.fidelity[i]);
      max_dev = std::max(max_dev, dev);
      if (dev > 2 * avg.standard_error[i]) ++outside;
      if (avg.standard_error[i] > 0) max_z = std::max(max_z, dev / avg.standard_error[i]);
      w << avg.times[i] << avg.mean_fidelity[i] << avg.standard_error[i] << me.series.fidelity[i];
      w.end_row();
    }
    w.close();
    const auto plateau = conditional_plateau(records, cfg.settle);
    summary["events_total"] = total;
    summary["max_abs_deviation"] = max_dev;
    summary["max_z"] = max_z;
    summary["points_outside_2se"] = outside;
    summary["grid_points"] = avg.times.size();
    summary["plateau"] = {{"mean", plateau.mean},
                          {"standard_error", plateau.standard_error},
                          {"settle", cfg.settle},
                          {"trajectories", plateau.trajectories}};
  }
  summary["wall_time_s"] = seconds_since(t0);
  write_json(dir / "summary.json", summary);
}

void cmd_conditional(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const auto dir = prepare_out(cfg);
  const double cap = cfg.t_max_or(0.1);
  const auto crit = cfg.criteria(cap);
  const auto copt = conditional_options(cfg);

  const auto gen = make_generator(cfg, cfg.params);
  const auto ss = steady_state(gen, initial_state(cfg, gen.spec()), crit, cfg.dt, cfg.propagation());
  const auto cond = conditional_after_detection(gen, ss.state, copt, cfg.dt);
  {
    CsvWriter w(dir / "conditional.csv", "conditional", {"t", "conditional_fidelity", "survival"});
    for (std::size_t i = 0; i < cond.times.size(); ++i) {
      w << cond.times[i] << cond.conditional_fidelity[i] << cond.survival[i];
      w.end_row();
    }
    w.close();
  }
  json summary = run_json(cfg, "conditional");
  summary["F_U"] = ss.fidelity;
  summary["steady_converged"] = ss.converged;
  summary["F_C"] = cond.asymptote;
  summary["conditional_converged"] = cond.converged;
  summary["asymptote_time"] = cond.asymptote_time;
  summary["survival_at_asymptote"] = cond.survival_at_asymptote;
  summary["asymptote_tolerance"] = cfg.asymptote_tolerance;

  if (cfg.table1) {
    const auto& hs = cfg.table1_h_r;
    const auto& xis = cfg.table1_xi;
    std::vector<DensityState<double>> states(hs.size());
    std::vector<double> fu(hs.size());
    std::vector<std::vector<double>> fc(hs.size(), std::vector<double>(xis.size()));
    parallel_for(hs.size(), cfg.threads, [&](std::size_t i) {
      SchemeParams p = cfg.params;
      p.h_r = hs[i];
      const auto g = make_generator(cfg, p);
      auto s = steady_state(g, initial_state(cfg, g.spec()), crit, cfg.dt, cfg.propagation());
      fu[i] = s.fidelity;
      states[i] = std::move(s.state);
    });
    parallel_for(hs.size() * xis.size(), cfg.threads, [&](std::size_t k) {
      const std::size_t i = k / xis.size(), j = k % xis.size();
      SchemeParams p = cfg.params;
      p.h_r = hs[i];
      p.xi = xis[j];
      const auto g = make_generator(cfg, p);
      fc[i][j] = conditional_after_detection(g, states[i], copt, cfg.dt).asymptote;
    });
    std::vector<std::string> cols{"h_r", "F_U"};
    for (double x : xis) cols.push_back(xi_column(x));
    CsvWriter w(dir / "table1.csv", "table1", cols);
    for (std::size_t i = 0; i < hs.size(); ++i) {
      w << hs[i] << fu[i];
      for (double v : fc[i]) w << v;
      w.end_row();
    }
    w.close();
  }
  summary["wall_time_s"] = seconds_since(t0);
  write_json(dir / "summary.json", summary);
}

void cmd_sweep(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const auto dir = prepare_out(cfg);
  if (cfg.fit) {
    const std::set<std::string> axes{cfg.axis1, cfg.axis2};
    if (axes != std::set<std::string>{"h_r", "gamma_s"})
      throw ConfigError("fit=true needs sweep axes h_r and gamma_s");
  }
  SweepOptions opt;
  opt.model = cfg.model;
  opt.n_motional = cfg.n_motional;
  opt.criteria = cfg.criteria(cfg.t_max_or(0.1));
  opt.propagation = cfg.propagation();
  opt.dt = cfg.dt;
  opt.threads = cfg.threads;
  const auto grid = sweep<double>(cfg.axis1, cfg.values1, cfg.axis2, cfg.values2, cfg.params, opt);

  CsvWriter w(dir / "sweep.csv", "sweep",
              {"axis1", "axis2", "error", "log10_error", "converged", "valid"},
              "axis1=" + cfg.axis1 + " axis2=" + cfg.axis2);
  for (const auto& c : grid.cells) {
    w << c.axis1 << c.axis2 << c.error << std::log10(c.error) << c.converged << c.valid;
    w.end_row();
  }
  w.close();

  if (cfg.fit) {
    std::vector<ErrorSample<double>> samples;
    for (const auto& c : grid.cells) {
      if (!c.valid) continue;
      ErrorSample<double> s;
      s.h_r = cfg.axis1 == "h_r" ? c.axis1 : c.axis2;
      s.gamma_s = cfg.axis1 == "gamma_s" ? c.axis1 : c.axis2;
      s.error = c.error;
      samples.push_back(s);
    }
    if (samples.size() < 3)
      throw std::runtime_error("fit needs >= 3 truncation-valid cells, got " +
                               std::to_string(samples.size()));
    const auto fit = fit_error_model(samples);
    json j = run_json(cfg, "sweep");
    j["form"] = "error = a * h_r + b * gamma_s";
    j["a"] = fit.a;
    j["b"] = fit.b;
    j["residuals"] = fit.residuals;
    j["rms_residual"] = fit.rms_residual;
    j["max_relative_residual"] = fit.max_relative_residual;
    j["samples"] = samples.size();
    j["wall_time_s"] = seconds_since(t0);
    write_json(dir / "fit.json", j);
  }
}

void cmd_compare_models(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const auto dir = prepare_out(cfg);
  const double t_max = cfg.t_max_or(5e-3);
  const double rec = cfg.record_interval > 0 ? cfg.record_interval : 1e-5;
  const double n_rec = std::max(1.0, std::round(t_max / rec));
  const double grid_step = t_max > 0 ? t_max / n_rec : rec;

  RunConfig c = cfg;
  c.unraveling = Unraveling::per_ion;
  c.model = Model::full;
  const auto full = make_generator(c, cfg.params);
  c.model = Model::eliminated;
  const auto elim = make_generator(c, cfg.params);

  // One step size for both runs, landing exactly on the shared record grid.
  const double dt0 = cfg.dt > 0 ? cfg.dt
                                : std::min(default_time_step(full, cfg.dt_safety),
                                           default_time_step(elim, cfg.dt_safety));
  const double dt = grid_step / std::ceil(grid_step / dt0 - 1e-9);
  auto run = [&](const Generator<double>& g) {
    PropagationOptions o = cfg.propagation();
    o.record_interval = grid_step;
    return integrate(g, initial_state(cfg, g.spec()), t_max, dt, o);
  };
  const auto rf = run(full);
  const auto re = run(elim);
  if (rf.series.size() != re.series.size()) throw std::logic_error("model grids differ");

  CsvWriter w(dir / "compare.csv", "compare",
              {"t", "fidelity_full", "fidelity_eliminated", "abs_difference"});
  double max_dev = 0;
  for (std::size_t i = 0; i < rf.series.size(); ++i) {
    const double d = std::abs(rf.series.fidelity[i] - re.series.fidelity[i]);
    max_dev = std::max(max_dev, d);
    w << rf.series.times[i] << rf.series.fidelity[i] << re.series.fidelity[i] << d;
    w.end_row();
  }
  w.close();

  json summary = run_json(cfg, "compare-models");
  summary.erase("model");
  summary["t_max"] = t_max;
  summary["max_abs_difference"] = max_dev;
  summary["ratio_gamma_sp_omega_rp"] =
      cfg.params.omega_rp > 0 ? json(cfg.params.gamma_sp / cfg.params.omega_rp) : json(nullptr);
  summary["dt_full"] = rf.dt;
  summary["dt_eliminated"] = re.dt;
  summary["max_top_level_population_full"] = rf.max_top_level_population;
  summary["max_top_level_population_eliminated"] = re.max_top_level_population;
  summary["truncation_violation"] = rf.truncation_violation || re.truncation_violation;
  summary["wall_time_s"] = seconds_since(t0);
  write_json(dir / "summary.json", summary);
}

int run(int argc, char** argv) {
  CLI::App app{"Two-ion dissipative Bell-state preparation simulator", "ionbell"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;

  struct Entry {
    const char* name;
    const char* help;
    void (*fn)(const RunConfig&);
  };
  const Entry entries[] = {
      {"steady", "Integrate to the steady state (time series and final fidelity)", cmd_steady},
      {"trajectory", "Seeded quantum-jump trajectory or ensemble", cmd_trajectory},
      {"conditional", "Fidelity conditioned on one detection and no further ones", cmd_conditional},
      {"sweep", "Steady-state error over a two-parameter grid", cmd_sweep},
      {"compare-models", "Full versus eliminated model time series", cmd_compare_models},
  };
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--set", sets, "override one key (repeatable)")->type_name("KEY=VALUE");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "base RNG seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const Entry* chosen = nullptr;
  for (const auto& e : entries)
    if (app.got_subcommand(e.name)) chosen = &e;

  try {
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& s : sets) apply_assignment(cfg, s);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (threads > 0) cfg.threads = threads;
    if (seed_given) cfg.seed = seed;
    cfg.validate();
    chosen->fn(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ionbell::cli
