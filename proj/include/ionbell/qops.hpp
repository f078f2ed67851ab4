#pragma once

// Composite Hilbert space (ion 1 internal) x (ion 2 internal) x (motional mode)
// and the elementary operators living on it.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ionbell {

template <typename Real>
using Complex = std::complex<Real>;

template <typename Real>
using OperatorMatrix = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using StateVector = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;

/// Internal level labels. Index order is the basis order of a single ion.
enum class Level : int { g = 0, e = 1, t = 2 };

enum class Ion : int { first = 1, second = 2 };

enum class IonOp { sigma_minus, sigma_plus, proj_g, b };

struct HilbertSpec {
  int internal_levels = 2;  // 2: |g>,|e>   3: |g>,|e>,|t>
  int n_motional = 20;

  HilbertSpec() = default;
  HilbertSpec(int levels, int n) : internal_levels(levels), n_motional(n) { validate(); }

  void validate() const {
    if (internal_levels != 2 && internal_levels != 3)
      throw std::invalid_argument("internal_levels must be 2 or 3, got " +
                                  std::to_string(internal_levels));
    if (n_motional < 2)
      throw std::invalid_argument("n_motional must be >= 2, got " + std::to_string(n_motional));
  }

  int internal_dim() const { return internal_levels * internal_levels; }
  int dim() const { return internal_dim() * n_motional; }

  /// Flat index of |l1 l2> (x) |n> under ion1 (x) ion2 (x) motion ordering.
  int index(Level l1, Level l2, int n) const {
    return (static_cast<int>(l1) * internal_levels + static_cast<int>(l2)) * n_motional + n;
  }
};

/// Kronecker product, A's index is the slow one.
template <typename DerivedA, typename DerivedB>
auto kron(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(A.rows() * B.rows(),
                                                            A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

template <typename Real = double>
OperatorMatrix<Real> identity(int n) {
  return OperatorMatrix<Real>::Identity(n, n);
}

/// Truncated motional annihilation operator, a|n> = sqrt(n)|n-1>.
template <typename Real = double>
OperatorMatrix<Real> annihilation(int n_levels) {
  if (n_levels < 2)
    throw std::invalid_argument("annihilation: need at least 2 motional levels");
  OperatorMatrix<Real> a = OperatorMatrix<Real>::Zero(n_levels, n_levels);
  for (int n = 1; n < n_levels; ++n) a(n - 1, n) = std::sqrt(static_cast<Real>(n));
  return a;
}

template <typename Real = double>
OperatorMatrix<Real> single_ion_op(int levels, IonOp op) {
  OperatorMatrix<Real> m = OperatorMatrix<Real>::Zero(levels, levels);
  const int g = static_cast<int>(Level::g);
  const int e = static_cast<int>(Level::e);
  switch (op) {
    case IonOp::sigma_minus: m(g, e) = 1; break;
    case IonOp::sigma_plus: m(e, g) = 1; break;
    case IonOp::proj_g: m(g, g) = 1; break;
    case IonOp::b:
      if (levels != 3)
        throw std::invalid_argument("b (|t> -> |g>) requires a three-level internal space");
      m(g, static_cast<int>(Level::t)) = 1;
      break;
  }
  return m;
}

/// Single-ion operator embedded into the composite space.
template <typename Real = double>
OperatorMatrix<Real> embed_ion_op(const HilbertSpec& spec, Ion ion, IonOp op) {
  spec.validate();
  const int L = spec.internal_levels;
  const auto local = single_ion_op<Real>(L, op);
  const auto idL = identity<Real>(L);
  const auto idN = identity<Real>(spec.n_motional);
  if (ion == Ion::first) return kron(kron(local, idL), idN);
  return kron(kron(idL, local), idN);
}

/// Motional operator embedded into the composite space.
template <typename Real = double, typename Derived>
OperatorMatrix<Real> embed_motional_op(const HilbertSpec& spec, const Eigen::MatrixBase<Derived>& m) {
  spec.validate();
  return kron(identity<Real>(spec.internal_dim()), m);
}

/// Bundle of the operators every generator needs.
template <typename Real = double>
struct OperatorSet {
  HilbertSpec spec;
  OperatorMatrix<Real> a, a_dag;
  OperatorMatrix<Real> sigma_minus[2], sigma_plus[2], proj_g[2];
  OperatorMatrix<Real> j_plus, j_minus;

  explicit OperatorSet(const HilbertSpec& s) : spec(s) {
    spec.validate();
    a = embed_motional_op<Real>(spec, annihilation<Real>(spec.n_motional));
    a_dag = a.adjoint();
    for (int i = 0; i < 2; ++i) {
      const Ion ion = i == 0 ? Ion::first : Ion::second;
      sigma_minus[i] = embed_ion_op<Real>(spec, ion, IonOp::sigma_minus);
      sigma_plus[i] = embed_ion_op<Real>(spec, ion, IonOp::sigma_plus);
      proj_g[i] = embed_ion_op<Real>(spec, ion, IonOp::proj_g);
    }
    j_plus = sigma_plus[0] + sigma_plus[1];
    j_minus = sigma_minus[0] + sigma_minus[1];
  }
};

/// (|ge> - |eg>)/sqrt(2) on the internal space (dimension levels^2).
template <typename Real = double>
StateVector<Real> bell_antisymmetric_internal(int levels) {
  HilbertSpec s(levels, 2);
  StateVector<Real> v = StateVector<Real>::Zero(s.internal_dim());
  const Real h = Real(1) / std::sqrt(Real(2));
  v(static_cast<int>(Level::g) * levels + static_cast<int>(Level::e)) = h;
  v(static_cast<int>(Level::e) * levels + static_cast<int>(Level::g)) = -h;
  return v;
}

/// |l1 l2> (x) |n> as a composite basis vector.
template <typename Real = double>
StateVector<Real> basis_state(const HilbertSpec& spec, Level l1, Level l2, int n) {
  StateVector<Real> v = StateVector<Real>::Zero(spec.dim());
  v(spec.index(l1, l2, n)) = 1;
  return v;
}

/// |psi_-> (x) |n>.
template <typename Real = double>
StateVector<Real> bell_antisymmetric_state(const HilbertSpec& spec, int n = 0) {
  StateVector<Real> motion = StateVector<Real>::Zero(spec.n_motional);
  motion(n) = 1;
  return kron(bell_antisymmetric_internal<Real>(spec.internal_levels), motion);
}

template <typename Real = double>
StateVector<Real> bell_symmetric_state(const HilbertSpec& spec, int n = 0) {
  StateVector<Real> v = StateVector<Real>::Zero(spec.dim());
  const Real h = Real(1) / std::sqrt(Real(2));
  v(spec.index(Level::g, Level::e, n)) = h;
  v(spec.index(Level::e, Level::g, n)) = h;
  return v;
}

template <typename Real = double>
OperatorMatrix<Real> projector(const StateVector<Real>& v) {
  return v * v.adjoint();
}

}  // namespace ionbell
