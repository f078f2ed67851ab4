#pragma once

// Photodetection-conditioned dynamics: seeded jump trajectories, ensembles,
// and the post-detection conditional statistics.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ionbell/evolve.hpp"

namespace ionbell {

template <typename Real = double>
struct JumpEvent {
  Real time = 0;
  int channel = 0;    // 1-based position among the detected channels
  std::string label;  // detected channel name ("ion1", "ion2", "sym", "anti")
};

template <typename Real = double>
struct TrajectoryRecord {
  TimeSeries<Real> series;  // fidelity is conditional; trace is survival since the last event
  std::vector<JumpEvent<Real>> events;
  std::uint64_t seed = 0;
};

/// Uniform draw in the open interval (0, 1) from the top 53 bits; portable
/// across standard libraries, unlike std::uniform_real_distribution.
inline double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

struct TrajectoryOptions {
  double record_interval = 1e-5;
  double dt_safety = 1.5;
};

/// One conditional trajectory. Between detections the unnormalized state
/// follows the linear no-detection generator; a detection fires when its trace
/// falls below a uniform draw, then the channel is picked in proportion to
/// Tr[A_k rho A_k^dag] and rho -> A_k rho A_k^dag / Tr.
template <typename Real = double>
TrajectoryRecord<Real> run_trajectory(const Generator<Real>& gen, const DensityState<Real>& rho0,
                                      Real t_max, Real dt, std::uint64_t seed,
                                      const TrajectoryOptions& opt = {}) {
  rho0.validate();
  if (!(t_max >= 0)) throw std::invalid_argument("t_max must be >= 0");
  if (dt <= 0) dt = default_time_step(gen, opt.dt_safety);
  const auto det = gen.detected_indices();
  const bool detecting = gen.xi() > 0 && !det.empty();

  const auto plan = detail::plan_steps(double(t_max), double(dt), opt.record_interval);
  const std::int64_t n_steps = plan.n_steps, stride = plan.stride;
  const Real h = Real(plan.h);

  TrajectoryRecord<Real> rec;
  rec.seed = seed;
  std::mt19937_64 rng(seed);
  Real threshold = detecting ? Real(open_uniform(rng)) : Real(0);

  OperatorMatrix<Real> rho = rho0.matrix;
  Rk4Stepper<Real> stepper(gen, detecting ? Dynamics::no_detection : Dynamics::unconditional, h);
  const auto& spec = gen.spec();
  rec.series.record(0, spec, rho);

  std::vector<Real> weights(det.size());
  for (std::int64_t s = 1; s <= n_steps; ++s) {
    stepper.step(rho);
    const Real t = Real(s) * h;
    const Real tr = rho.trace().real();
    if (!std::isfinite(tr)) {
      std::ostringstream os;
      os << "non-finite trace in trajectory (seed " << seed << ") at t = " << t << " s";
      throw NumericalError(os.str());
    }
    if (detecting && tr <= threshold) {
      Real total = 0;
      for (std::size_t k = 0; k < det.size(); ++k) {
        weights[k] = std::max<Real>(Real(0), gen.expectation_ada(det[k], rho));
        total += weights[k];
      }
      if (!(total > 0) || !std::isfinite(total)) {
        std::ostringstream os;
        os << "zero jump norm at sampled detection (seed " << seed << ", t = " << t << " s)";
        throw NumericalError(os.str());
      }
      Real pick = Real(open_uniform(rng)) * total;
      std::size_t k = 0;
      while (k + 1 < det.size() && pick > weights[k]) pick -= weights[k++];
      OperatorMatrix<Real> jumped = gen.jump(det[k], rho);
      jumped /= jumped.trace().real();
      rho = (jumped + jumped.adjoint()) / Real(2);
      rec.events.push_back({t, static_cast<int>(k) + 1, gen.channels()[det[k]].name});
      threshold = Real(open_uniform(rng));
    }
    if (s % stride == 0 || s == n_steps) rec.series.record(t, spec, rho);
  }
  return rec;
}

/// Fan out `count` trajectories with seeds seed0 + index over `threads`
/// workers. Results are ordered by index, independent of scheduling.
template <typename Real = double>
std::vector<TrajectoryRecord<Real>> run_ensemble(const Generator<Real>& gen,
                                                 const DensityState<Real>& rho0, Real t_max,
                                                 Real dt, std::uint64_t seed0, int count,
                                                 int threads = 1,
                                                 const TrajectoryOptions& opt = {}) {
  if (count < 0) throw std::invalid_argument("ensemble size must be >= 0");
  if (dt <= 0) dt = default_time_step(gen, opt.dt_safety);
  std::vector<TrajectoryRecord<Real>> out(count);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[i] = run_trajectory(gen, rho0, t_max, dt, seed0 + std::uint64_t(i), opt);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const int n = std::max(1, std::min(threads, count));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

template <typename Real = double>
struct EnsembleSummary {
  std::vector<Real> times, mean_fidelity, standard_error;
  int count = 0;
};

/// Pointwise mean conditional fidelity and its standard error.
template <typename Real = double>
EnsembleSummary<Real> ensemble_average(const std::vector<TrajectoryRecord<Real>>& records) {
  if (records.size() < 2) throw std::invalid_argument("ensemble_average needs >= 2 records");
  const auto& grid = records.front().series.times;
  for (const auto& r : records)
    if (r.series.times != grid) throw std::invalid_argument("trajectory time grids differ");
  const std::size_t m = records.size();
  EnsembleSummary<Real> s;
  s.times = grid;
  s.count = static_cast<int>(m);
  s.mean_fidelity.assign(grid.size(), 0);
  s.standard_error.assign(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Real mean = 0;
    for (const auto& r : records) mean += r.series.fidelity[i];
    mean /= Real(m);
    Real var = 0;
    for (const auto& r : records) {
      const Real d = r.series.fidelity[i] - mean;
      var += d * d;
    }
    var /= Real(m - 1);
    s.mean_fidelity[i] = mean;
    s.standard_error[i] = std::sqrt(var / Real(m));
  }
  return s;
}

template <typename Real = double>
struct PlateauEstimate {
  Real mean = 0;
  Real standard_error = 0;
  std::size_t samples = 0;
  int trajectories = 0;  // trajectories contributing at least one sample
};

/// Conditional-fidelity plateau from trajectories: the mean of recorded
/// fidelities at least `settle` seconds after the last detection (or after
/// `settle` from the start). The standard error is taken over per-trajectory
/// means, since samples within one trajectory are correlated.
template <typename Real = double>
PlateauEstimate<Real> conditional_plateau(const std::vector<TrajectoryRecord<Real>>& records,
                                          Real settle) {
  std::vector<Real> per_traj;
  PlateauEstimate<Real> est;
  for (const auto& r : records) {
    Real acc = 0;
    std::size_t n = 0;
    std::size_t next_event = 0;
    Real last = 0;
    for (std::size_t i = 0; i < r.series.size(); ++i) {
      const Real t = r.series.times[i];
      while (next_event < r.events.size() && r.events[next_event].time <= t)
        last = r.events[next_event++].time;
      if (t - last >= settle) {
        acc += r.series.fidelity[i];
        ++n;
      }
    }
    if (n == 0) continue;
    per_traj.push_back(acc / Real(n));
    est.samples += n;
  }
  est.trajectories = static_cast<int>(per_traj.size());
  if (per_traj.empty()) return est;
  Real mean = 0;
  for (Real v : per_traj) mean += v;
  mean /= Real(per_traj.size());
  Real var = 0;
  for (Real v : per_traj) var += (v - mean) * (v - mean);
  est.mean = mean;
  est.standard_error =
      per_traj.size() > 1 ? std::sqrt(var / Real(per_traj.size() - 1) / Real(per_traj.size()))
                          : Real(0);
  return est;
}

/// Normalized post-detection state sum_k rate_k A_k rho A_k^dag / Tr over the
/// detected channels. Throws when the detection rate vanishes.
template <typename Real = double>
DensityState<Real> post_detection_state(const Generator<Real>& gen, const DensityState<Real>& rho) {
  const auto det = gen.detected_indices();
  if (det.empty()) throw std::invalid_argument("generator has no detected channels");
  OperatorMatrix<Real> acc = OperatorMatrix<Real>::Zero(gen.dim(), gen.dim());
  for (int k : det) acc += gen.channels()[k].rate * gen.jump(k, rho.matrix);
  const Real tr = acc.trace().real();
  const Real scale = std::max<Real>(Real(1), rho.matrix.cwiseAbs().maxCoeff());
  if (!(tr > Real(1e-300) * scale))
    throw std::domain_error("post-detection state undefined: detection rate is zero in this state");
  acc /= tr;
  return {(acc + acc.adjoint()) / Real(2), true};
}

struct ConditionalOptions {
  double window = 0.05;          // cap on the no-detection window, seconds
  double slope_threshold = 1e-3; // conditional fidelity slope, 1/s
  double sustain = 1e-3;
  double check_interval = 1e-5;
  double asymptote_tolerance = 1e-3;  // |F - F_inf| defining arrival at the asymptote
  double record_interval = 1e-5;
  double dt_safety = 1.5;
};

template <typename Real = double>
struct ConditionalResult {
  std::vector<Real> times, conditional_fidelity, survival;
  DensityState<Real> post_jump;
  Real asymptote = 0;           // conditional fidelity at the end of the run
  Real asymptote_time = 0;      // first time after which |F - asymptote| <= tolerance
  Real survival_at_asymptote = 0;
  bool converged = false;
};

/// Conditional fidelity and survival after a detection in the state `rho_ss`,
/// conditioned on no further detections.
template <typename Real = double>
ConditionalResult<Real> conditional_after_detection(const Generator<Real>& gen,
                                                    const DensityState<Real>& rho_ss,
                                                    const ConditionalOptions& opt = {},
                                                    Real dt = 0) {
  ConditionalResult<Real> res;
  res.post_jump = post_detection_state(gen, rho_ss);
  SteadyCriteria crit;
  crit.slope_threshold = opt.slope_threshold;
  crit.sustain = opt.sustain;
  crit.time_cap = opt.window;
  crit.check_interval = opt.check_interval;
  PropagationOptions popt;
  popt.record_interval = opt.record_interval;
  popt.dt_safety = opt.dt_safety;
  auto [run, converged] =
      detail::propagate_until_flat(gen, res.post_jump, Dynamics::no_detection, crit, dt, popt);
  res.converged = converged;
  res.times = run.series.times;
  res.conditional_fidelity = run.series.fidelity;
  res.survival = run.series.trace;
  res.asymptote = res.conditional_fidelity.back();
  std::size_t first = res.times.size() - 1;
  while (first > 0 && std::abs(res.conditional_fidelity[first - 1] - res.asymptote) <=
                          Real(opt.asymptote_tolerance))
    --first;
  res.asymptote_time = res.times[first];
  res.survival_at_asymptote = res.survival[first];
  return res;
}

}  // namespace ionbell
