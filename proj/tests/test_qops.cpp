#include <doctest.h>

#include <random>

#include "ionbell/qops.hpp"

using namespace ionbell;
using M = OperatorMatrix<double>;
using V = StateVector<double>;

namespace {

M random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  M m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = {n(rng), n(rng)};
  return m;
}

// Index-formula Kronecker product, independent of the block implementation.
M kron_oracle(const M& a, const M& b) {
  M out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c)
      out(r, c) = a(r / b.rows(), c / b.cols()) * b(r % b.rows(), c % b.cols());
  return out;
}

}  // namespace

TEST_CASE("hilbert spec") {
  HilbertSpec s(3, 20);
  CHECK(s.dim() == 180);
  CHECK(HilbertSpec(2, 20).dim() == 80);
  CHECK(s.index(Level::e, Level::g, 3) == (1 * 3 + 0) * 20 + 3);
  CHECK_THROWS_AS(HilbertSpec(4, 20), std::invalid_argument);
  CHECK_THROWS_AS(HilbertSpec(2, 1), std::invalid_argument);
}

TEST_CASE("kron") {
  CHECK(kron(identity(2), identity(3)).isApprox(identity(6)));

  M sz = M::Zero(2, 2);
  sz(0, 0) = 1;
  sz(1, 1) = -1;
  const M op = kron(sz, identity(2));
  V eg = V::Zero(4);
  eg(2) = 1;  // |e>|g> with g = 0, e = 1
  CHECK((op * eg).isApprox(-eg));

  std::mt19937_64 rng(7);
  const M a = random_matrix(2, 2, rng), b = random_matrix(3, 3, rng);
  const M c = random_matrix(2, 2, rng), d = random_matrix(3, 3, rng);
  CHECK((kron(a, b) - kron_oracle(a, b)).norm() == doctest::Approx(0.0));
  CHECK((kron(a, b) * kron(c, d) - kron_oracle(a * c, b * d)).norm() < 1e-12);

  const M e = random_matrix(2, 3, rng);
  CHECK((kron(kron(a, b), e) - kron(a, kron(b, e))).norm() < 1e-13);
}

TEST_CASE("annihilation") {
  M two = M::Zero(2, 2);
  two(0, 1) = 1;
  CHECK(annihilation(2) == two);
  CHECK_THROWS_AS(annihilation(1), std::invalid_argument);

  const int n = 6;
  const M a = annihilation(n);
  const M num = a.adjoint() * a;
  for (int k = 0; k < n; ++k) CHECK(num(k, k).real() == doctest::Approx(k));
  CHECK((num - M(num.diagonal().asDiagonal())).norm() == 0.0);

  // Commutator by explicit elementwise sums.
  M comm = M::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        comm(i, j) += a(i, k) * std::conj(a(j, k)) - std::conj(a(k, i)) * a(k, j);
  for (int i = 0; i < n - 1; ++i) CHECK(comm(i, i).real() == doctest::Approx(1.0));
  CHECK(comm(n - 1, n - 1).real() == doctest::Approx(-(n - 1)));
  comm.diagonal().setZero();
  CHECK(comm.norm() < 1e-14);
}

TEST_CASE("ion operators") {
  const HilbertSpec s(2, 4);
  const M pg1 = embed_ion_op(s, Ion::first, IonOp::proj_g);
  const V ge0 = basis_state(s, Level::g, Level::e, 0);
  CHECK((pg1 * ge0).isApprox(ge0));

  const M sm1 = embed_ion_op(s, Ion::first, IonOp::sigma_minus);
  CHECK((sm1 * basis_state(s, Level::e, Level::g, 2)).isApprox(basis_state(s, Level::g, Level::g, 2)));
  CHECK((sm1 * ge0).norm() == 0.0);

  CHECK_THROWS_AS(embed_ion_op(s, Ion::second, IonOp::b), std::invalid_argument);
  const HilbertSpec s3(3, 3);
  const M b2 = embed_ion_op(s3, Ion::second, IonOp::b);
  CHECK((b2 * basis_state(s3, Level::e, Level::t, 1)).isApprox(basis_state(s3, Level::e, Level::g, 1)));
}

TEST_CASE("sparsity patterns") {
  const HilbertSpec s(3, 5);
  const OperatorSet<double> o(s);
  for (int r = 0; r < s.dim(); ++r)
    for (int c = 0; c < s.dim(); ++c) {
      const bool same_internal = r / s.n_motional == c / s.n_motional;
      if (o.a(r, c) != 0.0) {
        CHECK(same_internal);
        CHECK(c == r + 1);
      }
      if (o.sigma_minus[0](r, c) != 0.0) CHECK(r % s.n_motional == c % s.n_motional);
    }
}

TEST_CASE("different ions commute") {
  const HilbertSpec s(3, 3);
  for (auto op1 : {IonOp::sigma_minus, IonOp::sigma_plus, IonOp::proj_g, IonOp::b})
    for (auto op2 : {IonOp::sigma_minus, IonOp::sigma_plus, IonOp::proj_g, IonOp::b}) {
      const M a = embed_ion_op(s, Ion::first, op1);
      const M b = embed_ion_op(s, Ion::second, op2);
      CHECK((a * b - b * a).norm() == 0.0);
    }
}

TEST_CASE("antisymmetric Bell state is dark to the carrier") {
  for (int levels : {2, 3}) {
    const HilbertSpec s(levels, 3);
    const OperatorSet<double> o(s);
    const M drive = o.j_plus + o.j_minus;
    const V psi = bell_antisymmetric_state(s, 0);
    // Dense matrix-vector product written out.
    V out = V::Zero(s.dim());
    for (int r = 0; r < s.dim(); ++r)
      for (int c = 0; c < s.dim(); ++c) out(r) += drive(r, c) * psi(c);
    CHECK(out.norm() < 1e-15);
    CHECK(std::abs(psi.dot(drive * psi)) < 1e-15);
    // The symmetric state is not.
    CHECK((drive * bell_symmetric_state(s, 0)).norm() > 0.5);
  }
}
