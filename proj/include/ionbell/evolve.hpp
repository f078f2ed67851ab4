#pragma once

// Deterministic propagation: the unconditional master equation, the linear
// no-detection (trace-decreasing) evolution, and steady-state search by
// long-time integration. All use classical fixed-step RK4.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <utility>
#include <stdexcept>
#include <vector>

#include "ionbell/errors.hpp"
#include "ionbell/observables.hpp"
#include "ionbell/scheme.hpp"

namespace ionbell {

template <typename Real = double>
struct DensityState {
  OperatorMatrix<Real> matrix;
  bool normalized = true;

  static DensityState pure(const StateVector<Real>& v) {
    return {v * v.adjoint() / v.squaredNorm(), true};
  }

  Real trace() const { return matrix.trace().real(); }

  /// Throws std::invalid_argument when the state breaks its invariants.
  void validate(Real tol = Real(1e-8)) const {
    if (matrix.rows() != matrix.cols()) throw std::invalid_argument("density matrix not square");
    if (!matrix.allFinite()) throw std::invalid_argument("density matrix has non-finite entries");
    if (hermiticity_error(matrix) > Real(1e-10))
      throw std::invalid_argument("density matrix is not Hermitian");
    const Real tr = trace();
    if (normalized && std::abs(tr - 1) > tol)
      throw std::invalid_argument("normalized density matrix has trace != 1");
    if (!normalized && !(tr > 0 && tr <= 1 + tol))
      throw std::invalid_argument("unnormalized density matrix trace outside (0, 1]");
  }
};

/// Ground-state initial condition |l1 l2> (x) |0>.
template <typename Real = double>
DensityState<Real> product_state(const HilbertSpec& spec, Level l1, Level l2, int n = 0) {
  return DensityState<Real>::pure(basis_state<Real>(spec, l1, l2, n));
}

template <typename Real = double>
DensityState<Real> dark_state(const HilbertSpec& spec) {
  return DensityState<Real>::pure(bell_antisymmetric_state<Real>(spec, 0));
}

template <typename Real = double>
struct TimeSeries {
  std::vector<Real> times, fidelity, trace, mean_phonon, top_level_population;

  std::size_t size() const { return times.size(); }

  /// Record the observables of rho at time t; fidelity is that of rho / Tr rho.
  void record(Real t, const HilbertSpec& spec, const OperatorMatrix<Real>& rho) {
    times.push_back(t);
    fidelity.push_back(ionbell::fidelity(spec, rho));
    trace.push_back(rho.trace().real());
    mean_phonon.push_back(ionbell::mean_phonon(spec, rho));
    top_level_population.push_back(ionbell::top_level_population(spec, rho));
  }
};

struct PropagationOptions {
  double record_interval = 1e-5;        // seconds between recorded rows; 0 records every step
  double truncation_threshold = 1e-6;   // top motional level population flag
  double dt_safety = 1.5;               // dt = dt_safety / stiffness when dt is not given
};

/// Default RK4 step: a fixed fraction of the inverse stiffness bound. RK4 is
/// stable along the negative real axis for |dt * lambda| < 2.78.
template <typename Real = double>
Real default_time_step(const Generator<Real>& gen, double safety = 1.5) {
  const Real s = gen.stiffness();
  if (s <= 0) return Real(1e-6);
  return Real(safety) / s;
}

/// Classical RK4 on rho' = L(rho) with a fixed step and preallocated stages.
template <typename Real = double>
class Rk4Stepper {
 public:
  using Matrix = OperatorMatrix<Real>;

  Rk4Stepper(const Generator<Real>& gen, Dynamics mode, Real dt) : gen_(gen), mode_(mode), dt_(dt) {
    const auto d = gen.dim();
    for (auto* m : {&k1_, &k2_, &k3_, &k4_, &tmp_}) m->setZero(d, d);
  }

  Real dt() const { return dt_; }

  void step(Matrix& rho) {
    const Real h = dt_;
    gen_.apply_hermitian(rho, k1_, ws_, mode_);
    tmp_ = rho + (h / 2) * k1_;
    gen_.apply_hermitian(tmp_, k2_, ws_, mode_);
    tmp_ = rho + (h / 2) * k2_;
    gen_.apply_hermitian(tmp_, k3_, ws_, mode_);
    tmp_ = rho + h * k3_;
    gen_.apply_hermitian(tmp_, k4_, ws_, mode_);
    rho += (h / 6) * (k1_ + 2 * k2_ + 2 * k3_ + k4_);
  }

 private:
  const Generator<Real>& gen_;
  Dynamics mode_;
  Real dt_;
  Matrix k1_, k2_, k3_, k4_, tmp_;
  typename Generator<Real>::Workspace ws_;
};

template <typename Real = double>
struct PropagationResult {
  TimeSeries<Real> series;
  DensityState<Real> final_state;
  Real dt = 0;
  Real max_trace_error = 0;           // max |Tr rho - 1| (unconditional only)
  Real max_top_level_population = 0;  // over recorded rows
  bool truncation_violation = false;
};

namespace detail {

struct StepPlan {
  std::int64_t n_steps = 0;
  double h = 0;
  std::int64_t stride = 1;
};

/// Fixed steps of at most dt covering [0, t_max]. When dt fits inside the record
/// interval, the step divides it so rows land on multiples of the interval.
inline StepPlan plan_steps(double t_max, double dt, double record_interval) {
  StepPlan p;
  if (!(t_max > 0)) {
    p.h = dt;
    return p;
  }
  if (record_interval > 0 && dt <= record_interval) {
    const double n_rec = std::max(1.0, std::round(t_max / record_interval));
    const double grid = t_max / n_rec;
    p.stride = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(grid / dt - 1e-9)));
    p.n_steps = static_cast<std::int64_t>(n_rec) * p.stride;
    p.h = t_max / double(p.n_steps);
    return p;
  }
  p.n_steps = static_cast<std::int64_t>(std::ceil(t_max / dt - 1e-9));
  p.h = t_max / double(p.n_steps);
  if (record_interval > 0) p.stride = std::max<std::int64_t>(1, std::llround(record_interval / p.h));
  return p;
}

/// Stop hook: called at every recorded row; return true to stop early.
template <typename Real>
using StopHook = std::function<bool(Real t, const OperatorMatrix<Real>& rho)>;

template <typename Real>
PropagationResult<Real> propagate(const Generator<Real>& gen, const DensityState<Real>& rho0,
                                  Real t_max, Real dt, Dynamics mode,
                                  const PropagationOptions& opt, const StopHook<Real>& stop = {}) {
  if (rho0.matrix.rows() != gen.dim())
    throw std::invalid_argument("initial state dimension does not match generator");
  if (!(t_max >= 0)) throw std::invalid_argument("t_max must be >= 0");
  if (dt <= 0) dt = default_time_step(gen, opt.dt_safety);
  const auto& spec = gen.spec();

  const auto plan = plan_steps(double(t_max), double(dt), opt.record_interval);
  const std::int64_t n_steps = plan.n_steps, stride = plan.stride;
  const Real h = Real(plan.h);

  PropagationResult<Real> res;
  res.dt = h;
  OperatorMatrix<Real> rho = rho0.matrix;
  Rk4Stepper<Real> stepper(gen, mode, h);

  auto record = [&](Real t) {
    if (!rho.allFinite()) {
      std::ostringstream os;
      os << "non-finite density matrix at t = " << t << " s (dt = " << h << ")";
      throw NumericalError(os.str());
    }
    res.series.record(t, spec, rho);
    const Real top = res.series.top_level_population.back();
    res.max_top_level_population = std::max(res.max_top_level_population, top);
    if (mode == Dynamics::unconditional)
      res.max_trace_error = std::max(res.max_trace_error, std::abs(rho.trace().real() - 1));
  };

  record(0);
  bool stopped = stop && stop(Real(0), rho);
  Real prev_trace = rho.trace().real();
  for (std::int64_t s = 1; s <= n_steps && !stopped; ++s) {
    stepper.step(rho);
    const Real t = Real(s) * h;
    const Real tr = rho.trace().real();
    if (!std::isfinite(tr)) {
      std::ostringstream os;
      os << "non-finite trace at t = " << t << " s (dt = " << h << ")";
      throw NumericalError(os.str());
    }
    if (mode == Dynamics::no_detection) {
      if (tr - prev_trace > Real(1e-10) * std::max<Real>(prev_trace, Real(1e-300))) {
        std::ostringstream os;
        os << "no-detection evolution increased the trace at t = " << t << " s";
        throw NumericalError(os.str());
      }
      prev_trace = tr;
    }
    if (s % stride == 0 || s == n_steps) {
      record(t);
      if (stop) stopped = stop(t, rho);
    }
  }
  res.truncation_violation = res.max_top_level_population > Real(opt.truncation_threshold);
  res.final_state = {rho, mode == Dynamics::unconditional};
  return res;
}

}  // namespace detail

/// Unconditional master-equation evolution from a normalized state.
template <typename Real = double>
PropagationResult<Real> integrate(const Generator<Real>& gen, const DensityState<Real>& rho0,
                                  Real t_max, Real dt = 0, const PropagationOptions& opt = {}) {
  rho0.validate();
  return detail::propagate(gen, rho0, t_max, dt, Dynamics::unconditional, opt);
}

/// Evolution conditioned on no detection: the trace of the result is the
/// survival probability and `series.fidelity` is the conditional fidelity.
template <typename Real = double>
PropagationResult<Real> propagate_no_detection(const Generator<Real>& gen,
                                               const DensityState<Real>& rho0, Real t_max,
                                               Real dt = 0, const PropagationOptions& opt = {}) {
  rho0.validate();
  return detail::propagate(gen, rho0, t_max, dt, Dynamics::no_detection, opt);
}

struct SteadyCriteria {
  double slope_threshold = 1e-3;  // |dF/dt| in 1/s
  double sustain = 1e-3;          // seconds the slope must stay below threshold
  double time_cap = 0.1;          // seconds
  double check_interval = 1e-4;   // seconds between slope evaluations
};

template <typename Real = double>
struct SteadyStateResult {
  DensityState<Real> state;
  bool converged = false;
  Real time = 0;  // time at which integration stopped
  Real fidelity = 0;
  Real top_level_population = 0;
  bool truncation_violation = false;
  PropagationResult<Real> run;
};

namespace detail {

/// Run until the (conditional) fidelity slope stays below threshold for
/// crit.sustain seconds, or to crit.time_cap. Rows are recorded on the slope
/// check grid, then thinned to opt.record_interval.
template <typename Real>
std::pair<PropagationResult<Real>, bool> propagate_until_flat(
    const Generator<Real>& gen, const DensityState<Real>& rho0, Dynamics mode,
    const SteadyCriteria& crit, Real dt, const PropagationOptions& opt) {
  if (!(crit.check_interval > 0 && crit.time_cap >= 0))
    throw std::invalid_argument("criteria need check_interval > 0 and time_cap >= 0");
  if (dt <= 0) dt = default_time_step(gen, opt.dt_safety);
  const double steps_per_check = std::max(1.0, std::ceil(crit.check_interval / double(dt)));
  const double check = crit.check_interval;
  PropagationOptions o = opt;
  o.record_interval = check;
  const auto thin = std::max<std::int64_t>(
      1, opt.record_interval > 0 ? std::llround(opt.record_interval / check) : 1);

  bool converged = false;
  Real last_f = 0, last_t = -1, sustained = 0;
  StopHook<Real> hook = [&](Real t, const OperatorMatrix<Real>& rho) {
    const Real f = fidelity(gen.spec(), rho);
    if (last_t >= 0) {
      const Real slope = std::abs(f - last_f) / (t - last_t);
      sustained = slope < Real(crit.slope_threshold) ? sustained + (t - last_t) : Real(0);
      if (sustained >= Real(crit.sustain) * Real(1 - 1e-9)) converged = true;
    }
    last_f = f;
    last_t = t;
    return converged;
  };
  const Real n_checks = std::ceil(Real(crit.time_cap / check) - Real(1e-9));
  auto run = propagate(gen, rho0, n_checks * Real(check), Real(check / steps_per_check), mode, o,
                       hook);
  if (thin > 1) {
    TimeSeries<Real> out;
    const auto& s = run.series;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i % thin != 0 && i + 1 != s.size()) continue;
      out.times.push_back(s.times[i]);
      out.fidelity.push_back(s.fidelity[i]);
      out.trace.push_back(s.trace[i]);
      out.mean_phonon.push_back(s.mean_phonon[i]);
      out.top_level_population.push_back(s.top_level_population[i]);
    }
    run.series = std::move(out);
  }
  return {std::move(run), converged};
}

}  // namespace detail

/// Integrate until the fidelity slope stays below threshold for `sustain`
/// seconds, or until the time cap. Hitting the cap is a flagged result.
template <typename Real = double>
SteadyStateResult<Real> steady_state(const Generator<Real>& gen, const DensityState<Real>& rho0,
                                     const SteadyCriteria& crit = {}, Real dt = 0,
                                     const PropagationOptions& opt = {}) {
  rho0.validate();
  auto [run, converged] =
      detail::propagate_until_flat(gen, rho0, Dynamics::unconditional, crit, dt, opt);
  SteadyStateResult<Real> res;
  res.state = run.final_state;
  res.converged = converged;
  res.time = run.series.times.back();
  res.fidelity = run.series.fidelity.back();
  res.top_level_population = run.series.top_level_population.back();
  res.truncation_violation = res.top_level_population > Real(opt.truncation_threshold);
  res.run = std::move(run);
  return res;
}

}  // namespace ionbell
