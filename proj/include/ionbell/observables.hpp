#pragma once

// Observables on composite-space density matrices.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "ionbell/qops.hpp"

namespace ionbell {

/// Internal-state reduced density matrix, motion traced out.
template <typename Real = double>
OperatorMatrix<Real> trace_out_motion(const HilbertSpec& spec, const OperatorMatrix<Real>& rho) {
  const int n = spec.n_motional;
  const int m = spec.internal_dim();
  OperatorMatrix<Real> r(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) r(a, b) = rho.block(a * n, b * n, n, n).diagonal().sum();
  return r;
}

/// Population of (|ge> - |eg>)/sqrt2 with motion traced out, for a state of
/// unit trace. Unnormalized states are divided by their trace.
template <typename Real = double>
Real fidelity(const HilbertSpec& spec, const OperatorMatrix<Real>& rho) {
  const int n = spec.n_motional;
  const int ge = spec.index(Level::g, Level::e, 0) / n;
  const int eg = spec.index(Level::e, Level::g, 0) / n;
  auto block_trace = [&](int a, int b) { return rho.block(a * n, b * n, n, n).diagonal().sum(); };
  const Complex<Real> f =
      (block_trace(ge, ge) + block_trace(eg, eg) - block_trace(ge, eg) - block_trace(eg, ge)) /
      Real(2);
  return f.real() / rho.trace().real();
}

/// <psi_-, 0| rho |psi_-, 0>: Bell population with motion projected on |0>.
template <typename Real = double>
Real fidelity_motional_ground(const HilbertSpec& spec, const OperatorMatrix<Real>& rho) {
  const auto v = bell_antisymmetric_state<Real>(spec, 0);
  return (v.adjoint() * rho * v)(0, 0).real() / rho.trace().real();
}

template <typename Real = double>
Real mean_phonon(const HilbertSpec& spec, const OperatorMatrix<Real>& rho) {
  const int n = spec.n_motional;
  Real acc = 0;
  for (int i = 0; i < spec.dim(); ++i) acc += Real(i % n) * rho(i, i).real();
  return acc / rho.trace().real();
}

/// Population in the highest retained motional level.
template <typename Real = double>
Real top_level_population(const HilbertSpec& spec, const OperatorMatrix<Real>& rho) {
  const int n = spec.n_motional;
  Real acc = 0;
  for (int a = 0; a < spec.internal_dim(); ++a) acc += rho(a * n + n - 1, a * n + n - 1).real();
  return acc / rho.trace().real();
}

/// Population of the temporary level |t> on either ion (full model only).
template <typename Real = double>
Real temporary_population(const HilbertSpec& spec, const OperatorMatrix<Real>& rho) {
  if (spec.internal_levels < 3) return 0;
  Real acc = 0;
  const int t = static_cast<int>(Level::t);
  for (int l1 = 0; l1 < 3; ++l1)
    for (int l2 = 0; l2 < 3; ++l2) {
      if (l1 != t && l2 != t) continue;
      for (int n = 0; n < spec.n_motional; ++n) {
        const int i = spec.index(static_cast<Level>(l1), static_cast<Level>(l2), n);
        acc += rho(i, i).real();
      }
    }
  return acc / rho.trace().real();
}

template <typename Real = double>
Real hermiticity_error(const OperatorMatrix<Real>& rho) {
  const Real scale = std::max<Real>(rho.cwiseAbs().maxCoeff(), std::numeric_limits<Real>::min());
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff() / scale;
}

template <typename Real = double>
Real min_eigenvalue(const OperatorMatrix<Real>& rho) {
  const OperatorMatrix<Real> h = (rho + rho.adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<OperatorMatrix<Real>> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Trace distance 0.5 * ||a - b||_1 between Hermitian matrices.
template <typename Real = double>
Real trace_distance(const OperatorMatrix<Real>& a, const OperatorMatrix<Real>& b) {
  const OperatorMatrix<Real> diff = a - b;
  const OperatorMatrix<Real> h = (diff + diff.adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<OperatorMatrix<Real>> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum() / Real(2);
}

}  // namespace ionbell
