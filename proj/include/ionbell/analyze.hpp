#pragma once

// Parameter sweeps over steady states and the linear error model fit.

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "ionbell/evolve.hpp"
#include "ionbell/observables.hpp"

namespace ionbell {

/// Mutable reference to a SchemeParams field by its config-file name.
inline double& param_by_name(SchemeParams& p, const std::string& name) {
  if (name == "omega") return p.omega;
  if (name == "omega_r") return p.omega_r;
  if (name == "omega_rp") return p.omega_rp;
  if (name == "gamma_s") return p.gamma_s;
  if (name == "gamma_sp") return p.gamma_sp;
  if (name == "h_r") return p.h_r;
  if (name == "xi") return p.xi;
  throw std::invalid_argument("unknown scheme parameter: " + name);
}

enum class Model { full, eliminated };

template <typename Real = double>
Generator<Real> build_generator(Model model, const SchemeParams& p, int n_motional) {
  if (model == Model::full) return build_full_generator<Real>(p, HilbertSpec(3, n_motional));
  return build_eliminated_generator<Real>(p, HilbertSpec(2, n_motional));
}

template <typename Real = double>
struct SweepCell {
  Real axis1 = 0, axis2 = 0;
  Real error = 1;            // 1 - F at the end of the steady-state run
  Real time = 0;             // when the run stopped
  Real top_level_population = 0;
  bool converged = false;    // false: time cap reached first
  bool valid = false;        // false: top motional level above the truncation threshold
};

template <typename Real = double>
struct SweepGrid {
  std::string axis1_name, axis2_name;
  std::vector<Real> axis1, axis2;
  std::vector<SweepCell<Real>> cells;  // axis1-major

  const SweepCell<Real>& at(std::size_t i, std::size_t j) const { return cells[i * axis2.size() + j]; }

  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> error_matrix() const {
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> e(axis1.size(), axis2.size());
    for (std::size_t i = 0; i < axis1.size(); ++i)
      for (std::size_t j = 0; j < axis2.size(); ++j) e(i, j) = at(i, j).error;
    return e;
  }
};

struct SweepOptions {
  Model model = Model::eliminated;
  int n_motional = 20;
  SteadyCriteria criteria;
  PropagationOptions propagation;
  double dt = 0;
  int threads = 1;
};

/// Steady-state error on the grid axis1 x axis2 starting from |gg>|0>. Cells are
/// independent; their results do not depend on evaluation order or threading.
template <typename Real = double>
SweepGrid<Real> sweep(const std::string& axis1_name, const std::vector<Real>& axis1,
                      const std::string& axis2_name, const std::vector<Real>& axis2,
                      const SchemeParams& fixed, const SweepOptions& opt = {}) {
  SweepGrid<Real> grid;
  grid.axis1_name = axis1_name;
  grid.axis2_name = axis2_name;
  grid.axis1 = axis1;
  grid.axis2 = axis2;
  {
    SchemeParams probe = fixed;
    param_by_name(probe, axis1_name);
    param_by_name(probe, axis2_name);
  }
  const std::size_t n = axis1.size() * axis2.size();
  grid.cells.resize(n);

  auto eval = [&](std::size_t idx) {
    const std::size_t i = idx / axis2.size(), j = idx % axis2.size();
    SchemeParams p = fixed;
    param_by_name(p, axis1_name) = double(axis1[i]);
    param_by_name(p, axis2_name) = double(axis2[j]);
    const auto gen = build_generator<Real>(opt.model, p, opt.n_motional);
    const auto rho0 = product_state<Real>(gen.spec(), Level::g, Level::g);
    const auto ss = steady_state(gen, rho0, opt.criteria, Real(opt.dt), opt.propagation);
    SweepCell<Real> c;
    c.axis1 = axis1[i];
    c.axis2 = axis2[j];
    c.error = std::clamp<Real>(Real(1) - ss.fidelity, Real(0), Real(1));
    c.time = ss.time;
    c.top_level_population = ss.top_level_population;
    c.converged = ss.converged;
    c.valid = !ss.truncation_violation;
    grid.cells[idx] = c;
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&] {
    for (std::size_t idx = next++; idx < n; idx = next++) {
      try {
        eval(idx);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return grid;
}

/// Carrier versus red-sideband coupling map.
template <typename Real = double>
SweepGrid<Real> sweep_couplings(const std::vector<Real>& omega_grid,
                                const std::vector<Real>& omega_r_grid, const SchemeParams& fixed,
                                const SweepOptions& opt = {}) {
  return sweep<Real>("omega", omega_grid, "omega_r", omega_r_grid, fixed, opt);
}

template <typename Real = double>
struct ErrorSample {
  Real h_r = 0, gamma_s = 0, error = 0;
};

template <typename Real = double>
struct ErrorModelFit {
  Real a = 0;  // error per unit heating rate (s per phonon)
  Real b = 0;  // error per unit metastable decay rate (s)
  std::vector<Real> residuals;  // error - (a h_r + b gamma_s), per sample
  Real rms_residual = 0;
  Real max_relative_residual = 0;  // max |residual| / error over samples with error > 0
};

/// Least-squares fit error ~ a h_r + b gamma_s (no intercept).
template <typename Real = double>
ErrorModelFit<Real> fit_error_model(const std::vector<ErrorSample<Real>>& samples) {
  if (samples.size() < 3) throw std::invalid_argument("error model fit needs >= 3 samples");
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  const auto m = static_cast<Eigen::Index>(samples.size());
  Mat x(m, 2);
  Vec y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    x(i, 0) = samples[i].h_r;
    x(i, 1) = samples[i].gamma_s;
    y(i) = samples[i].error;
  }
  Eigen::ColPivHouseholderQR<Mat> qr(x);
  if (qr.rank() < 2)
    throw std::invalid_argument("degenerate design: samples must vary h_r and gamma_s independently");
  const Vec coef = qr.solve(y);
  ErrorModelFit<Real> fit;
  fit.a = coef(0);
  fit.b = coef(1);
  const Vec r = y - x * coef;
  fit.residuals.assign(r.data(), r.data() + m);
  fit.rms_residual = std::sqrt(r.squaredNorm() / Real(m));
  for (Eigen::Index i = 0; i < m; ++i)
    if (y(i) > 0) fit.max_relative_residual = std::max(fit.max_relative_residual, std::abs(r(i)) / y(i));
  return fit;
}

}  // namespace ionbell
