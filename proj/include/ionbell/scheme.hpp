#pragma once

// Liouvillian generators for the two-ion scheme: the full three-level model
// and the model with the temporary level adiabatically eliminated.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ionbell/qops.hpp"

namespace ionbell {

/// Physical rates of the scheme. Angular frequencies in rad/s, rates in 1/s.
struct SchemeParams {
  double omega = 26e3;     // carrier
  double omega_r = 20e3;   // red sideband, |g> <-> |e>
  double omega_rp = 1e6;   // red sideband, |g> <-> |t>
  double gamma_s = 1.0;    // |e> -> |g>
  double gamma_sp = 1e8;   // |t> -> |g>
  double h_r = 10.0;       // anomalous heating, phonons/s
  double xi = 0.1;         // detection efficiency

  void validate() const {
    auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
    };
    nonneg(omega, "omega");
    nonneg(omega_r, "omega_r");
    nonneg(omega_rp, "omega_rp");
    nonneg(gamma_s, "gamma_s");
    nonneg(gamma_sp, "gamma_sp");
    nonneg(h_r, "h_r");
    if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in [0, 1]");
  }

  /// Effective |g>-projected cooling rate 4 omega_rp^2 / gamma_sp.
  double gamma_eff() const {
    if (omega_rp == 0.0) return 0.0;
    if (gamma_sp <= 0.0)
      throw std::invalid_argument("gamma_sp must be > 0 to eliminate the temporary level");
    return 4.0 * omega_rp * omega_rp / gamma_sp;
  }

  /// True when the temporary level decays fast enough for the eliminated model.
  bool elimination_valid() const { return gamma_sp >= 10.0 * omega_rp; }
};

/// Which part of the dissipator acts between detections.
enum class Dynamics {
  unconditional,  // full Lindblad generator
  no_detection    // detected recycling terms removed: the linear, trace-decreasing generator
};

template <typename Real = double>
struct Channel {
  std::string name;
  Real rate = 0;
  OperatorMatrix<Real> op;
  bool detected = false;
};

/// Hamiltonian plus rate-weighted Lindblad channels. Immutable once built; the
/// constructor compiles sparse copies used by the fast evaluation path.
template <typename Real = double>
class Generator {
 public:
  using Matrix = OperatorMatrix<Real>;
  using Sparse = Eigen::SparseMatrix<Complex<Real>, Eigen::RowMajor>;

  /// Scratch buffers for apply_hermitian; one per thread.
  struct Workspace {
    Matrix x, w;
  };

  Generator(HilbertSpec spec, Matrix hamiltonian, std::vector<Channel<Real>> channels, Real xi)
      : spec_(spec), hamiltonian_(std::move(hamiltonian)), channels_(std::move(channels)), xi_(xi) {
    spec_.validate();
    const auto d = spec_.dim();
    if (hamiltonian_.rows() != d || hamiltonian_.cols() != d)
      throw std::invalid_argument("hamiltonian dimension does not match the Hilbert space");
    if (!(xi_ >= 0 && xi_ <= 1)) throw std::invalid_argument("xi must lie in [0, 1]");
    const Real hnorm = std::max<Real>(Real(1), hamiltonian_.cwiseAbs().maxCoeff());
    if ((hamiltonian_ - hamiltonian_.adjoint()).cwiseAbs().maxCoeff() > Real(1e-12) * hnorm)
      throw std::invalid_argument("hamiltonian is not Hermitian");
    for (const auto& c : channels_) {
      if (!(c.rate >= 0)) throw std::invalid_argument("channel rate must be >= 0: " + c.name);
      if (c.op.rows() != d || c.op.cols() != d)
        throw std::invalid_argument("channel operator dimension mismatch: " + c.name);
    }
    compile();
  }

  const HilbertSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim(); }
  const Matrix& hamiltonian() const { return hamiltonian_; }
  const std::vector<Channel<Real>>& channels() const { return channels_; }
  Real xi() const { return xi_; }

  std::vector<int> detected_indices() const {
    std::vector<int> idx;
    for (int k = 0; k < static_cast<int>(channels_.size()); ++k)
      if (channels_[k].detected) idx.push_back(k);
    return idx;
  }

  /// Weight of the recycling term A rho A^dag for channel k under the given dynamics.
  Real jump_weight(int k, Dynamics mode) const {
    const auto& c = channels_[k];
    if (mode == Dynamics::no_detection && c.detected) return c.rate * (Real(1) - xi_);
    return c.rate;
  }

  /// L(rho) for an arbitrary square rho. Dense reference path.
  Matrix apply(const Matrix& rho, Dynamics mode = Dynamics::unconditional) const {
    const Complex<Real> i(0, 1);
    Matrix out = -i * (hamiltonian_ * rho - rho * hamiltonian_);
    for (int k = 0; k < static_cast<int>(channels_.size()); ++k) {
      const auto& c = channels_[k];
      if (c.rate == 0) continue;
      const Matrix ada = c.op.adjoint() * c.op;
      out += jump_weight(k, mode) * (c.op * rho * c.op.adjoint());
      out -= (c.rate / Real(2)) * (ada * rho + rho * ada);
    }
    return out;
  }

  /// out = L(rho) assuming rho is Hermitian. Uses the real-coefficient kernel
  /// when H is real, sum_k rate_k A_k^dag A_k is diagonal and every A_k is real
  /// (the case for all generators built here), the complex kernel otherwise.
  void apply_hermitian(const Matrix& rho, Matrix& out, Workspace& ws,
                       Dynamics mode = Dynamics::unconditional) const {
    if (real_kernel_)
      apply_real_kernel(rho, out, ws, mode);
    else
      apply_complex_kernel(rho, out, ws, mode);
    // The fast paths amplify anti-Hermitian round-off, so out is kept exactly
    // Hermitian (the real kernel does this by construction).
  }

  bool uses_real_kernel() const { return real_kernel_; }

  /// Tr[A_k^dag A_k rho] for channel k.
  Real expectation_ada(int k, const Matrix& rho) const {
    const auto& ada = ada_[k];
    Complex<Real> acc = 0;
    for (int r = 0; r < ada.outerSize(); ++r)
      for (typename Sparse::InnerIterator it(ada, r); it; ++it) acc += it.value() * rho(it.col(), r);
    return acc.real();
  }

  /// A_k rho A_k^dag, sparse.
  Matrix jump(int k, const Matrix& rho) const {
    const Sparse a = channels_[k].op.sparseView();
    Matrix y = a * rho;
    return y * Sparse(a.adjoint());
  }

  /// Upper bound on the magnitude of the fastest rate in L: largest channel
  /// decay rate plus twice the spectral radius of H.
  Real stiffness() const {
    Eigen::SelfAdjointEigenSolver<Matrix> hs(hamiltonian_, Eigen::EigenvaluesOnly);
    const Real h_rad = hs.eigenvalues().cwiseAbs().maxCoeff();
    Matrix decay = Matrix::Zero(dim(), dim());
    for (const auto& c : channels_) decay += c.rate * (c.op.adjoint() * c.op);
    Eigen::SelfAdjointEigenSolver<Matrix> ds(decay, Eigen::EigenvaluesOnly);
    const Real d_rad = ds.eigenvalues().cwiseAbs().maxCoeff();
    return d_rad + Real(2) * h_rad;
  }

 private:
  // L(rho) = W + W^dag - (D rho + rho D)/2 with
  //   W = rho' H + G/2,  rho' = i rho,  G = sum_k w_k A_k rho A_k^dag,
  // where H is real, D = sum_k rate_k A_k^dag A_k is diagonal and every A_k is
  // real with at most one entry per row. All accumulation is real-coefficient
  // axpy over the interleaved (re, im) storage.
  void apply_real_kernel(const Matrix& rho, Matrix& out, Workspace& ws, Dynamics mode) const {
    const Eigen::Index d = rho.rows();
    ws.x.resize(d, d);
    ws.w.setZero(d, d);
    {
      const Real* src = reinterpret_cast<const Real*>(rho.data());
      Real* dst = reinterpret_cast<Real*>(ws.x.data());
      for (Eigen::Index q = 0; q < d * d; ++q) {
        dst[2 * q] = -src[2 * q + 1];
        dst[2 * q + 1] = src[2 * q];
      }
    }
    const Real* rp = reinterpret_cast<const Real*>(ws.x.data());
    const Real* rr = reinterpret_cast<const Real*>(rho.data());
    Real* w = reinterpret_cast<Real*>(ws.w.data());
    const Eigen::Index ld = 2 * d;
    for (const auto& e : h_axpy_) {
      Real* dst = w + e.dst * ld;
      const Real* src = rp + e.src * ld;
      const Real c = e.coef;
      for (Eigen::Index q = 0; q < ld; ++q) dst[q] += c * src[q];
    }
    for (std::size_t k = 0; k < gathers_.size(); ++k) {
      const Real wk = jump_weight(active_[k], mode);
      if (wk == 0) continue;
      const auto& g = gathers_[k];
      const Real* vv = g.interleaved.data();
      for (Eigen::Index j = 0; j < d; ++j) {
        const int cj = g.col[j];
        if (cj < 0) continue;
        const Real s = Real(0.5) * wk * g.val[j].real();
        Real* dst = w + j * ld;
        const Real* src = rr + cj * ld;
        for (const auto& r : g.runs) {
          Real* dd = dst + 2 * r.start;
          const Real* ss = src + 2 * r.src;
          const Real* cc = vv + 2 * r.start;
          for (Eigen::Index q = 0; q < 2 * r.len; ++q) dd[q] += s * cc[q] * ss[q];
        }
      }
    }
    out.resize(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        out(i, j) = ws.w(i, j) + std::conj(ws.w(j, i)) - (half_decay_[i] + half_decay_[j]) * rho(i, j);
  }

  void apply_complex_kernel(const Matrix& rho, Matrix& out, Workspace& ws, Dynamics mode) const {
    const Complex<Real> i(0, 1);
    const auto d = rho.rows();
    ws.x.setZero(d, d);
    for (const auto& e : k_entries_) ws.x.col(e.row).noalias() += e.conj_value * rho.col(e.col);
    out = ws.x.adjoint();
    out -= ws.x;
    out *= -i;
    for (std::size_t k = 0; k < gathers_.size(); ++k) {
      const Real wk = jump_weight(active_[k], mode);
      if (wk == 0) continue;
      const auto& g = gathers_[k];
      for (Eigen::Index j = 0; j < d; ++j) {
        const int cj = g.col[j];
        if (cj < 0) continue;
        const Complex<Real> s = wk * std::conj(g.val[j]);
        for (const auto& r : g.runs)
          out.col(j).segment(r.start, r.len).noalias() +=
              s * g.val.segment(r.start, r.len).cwiseProduct(rho.col(cj).segment(r.src, r.len));
      }
    }
    ws.x = out.adjoint();
    out += ws.x;
    out *= Real(0.5);
  }

  // A operator with at most one nonzero per row: row i -> (col[i], val[i]).
  // runs are maximal row ranges whose source columns advance by one.
  struct RowGather {
    std::vector<int> col;
    Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1> val;
    struct Run {
      Eigen::Index start, src, len;
    };
    std::vector<Run> runs;
    std::vector<Real> interleaved;  // real parts of val, each repeated twice
  };

  struct Entry {
    int row, col;
    Complex<Real> conj_value;
  };

  static RowGather make_gather(const Matrix& a, const std::string& name) {
    RowGather g;
    const auto d = a.rows();
    g.col.assign(d, -1);
    g.val = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>::Zero(d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) {
        if (a(r, c) == Complex<Real>(0)) continue;
        if (g.col[r] >= 0)
          throw std::invalid_argument("channel operator has more than one entry per row: " + name);
        g.col[r] = static_cast<int>(c);
        g.val[r] = a(r, c);
      }
    for (Eigen::Index r = 0; r < d;) {
      if (g.col[r] < 0) {
        ++r;
        continue;
      }
      Eigen::Index len = 1;
      while (r + len < d && g.col[r + len] == g.col[r] + len) ++len;
      g.runs.push_back({r, g.col[r], len});
      r += len;
    }
    g.interleaved.resize(2 * d);
    for (Eigen::Index r = 0; r < d; ++r) g.interleaved[2 * r] = g.interleaved[2 * r + 1] = g.val[r].real();
    return g;
  }

  void compile() {
    const Complex<Real> i(0, 1);
    Matrix k = hamiltonian_;
    gathers_.clear();
    active_.clear();
    ada_.assign(channels_.size(), Sparse());
    for (int c = 0; c < static_cast<int>(channels_.size()); ++c) {
      const auto& ch = channels_[c];
      const Matrix ada = ch.op.adjoint() * ch.op;
      ada_[c] = ada.sparseView();
      if (ch.rate == 0) continue;
      k -= (i * (ch.rate / Real(2))) * ada;
      gathers_.push_back(make_gather(ch.op, ch.name));
      active_.push_back(c);
    }
    k_entries_.clear();
    for (int r = 0; r < k.rows(); ++r)
      for (int c = 0; c < k.cols(); ++c)
        if (k(r, c) != Complex<Real>(0)) k_entries_.push_back({r, c, std::conj(k(r, c))});

    // Real kernel eligibility.
    const Matrix decay = (k - hamiltonian_) * i * Real(2);  // sum_k rate_k A_k^dag A_k
    bool eligible = hamiltonian_.imag().cwiseAbs().maxCoeff() == Real(0);
    Matrix off = decay;
    off.diagonal().setZero();
    eligible = eligible && off.cwiseAbs().maxCoeff() <= Real(1e-14) * std::max<Real>(Real(1), decay.cwiseAbs().maxCoeff());
    for (int c : active_) eligible = eligible && channels_[c].op.imag().cwiseAbs().maxCoeff() == Real(0);
    real_kernel_ = eligible;
    half_decay_.resize(hamiltonian_.rows());
    for (Eigen::Index r = 0; r < hamiltonian_.rows(); ++r) half_decay_[r] = decay(r, r).real() / Real(2);
    h_axpy_.clear();
    for (int c = 0; c < hamiltonian_.cols(); ++c)
      for (int r = 0; r < hamiltonian_.rows(); ++r)
        if (hamiltonian_(r, c) != Complex<Real>(0)) h_axpy_.push_back({c, r, hamiltonian_(r, c).real()});
  }

  // W(:, dst) += coef * rho'(:, src)  for each nonzero H(src, dst).
  struct RealAxpy {
    Eigen::Index dst, src;
    Real coef;
  };

  HilbertSpec spec_;
  Matrix hamiltonian_;
  std::vector<Channel<Real>> channels_;
  Real xi_;

  std::vector<Entry> k_entries_;
  std::vector<RealAxpy> h_axpy_;
  std::vector<Real> half_decay_;
  bool real_kernel_ = false;
  std::vector<RowGather> gathers_;
  std::vector<Sparse> ada_;
  std::vector<int> active_;
};

namespace detail {

template <typename Real>
OperatorMatrix<Real> metastable_hamiltonian(const SchemeParams& p, const OperatorSet<Real>& o) {
  return Real(p.omega) * (o.j_plus + o.j_minus) +
         Real(p.omega_r) * (o.j_minus * o.a_dag + o.j_plus * o.a);
}

template <typename Real>
void append_background_channels(const SchemeParams& p, const OperatorSet<Real>& o,
                                std::vector<Channel<Real>>& ch) {
  ch.push_back({"decay_e1", Real(p.gamma_s), o.sigma_minus[0], false});
  ch.push_back({"decay_e2", Real(p.gamma_s), o.sigma_minus[1], false});
  ch.push_back({"heat_down", Real(p.h_r), o.a, false});
  ch.push_back({"heat_up", Real(p.h_r), o.a_dag, false});
}

}  // namespace detail

/// Three-level model with explicit temporary level |t>.
template <typename Real = double>
Generator<Real> build_full_generator(const SchemeParams& p, const HilbertSpec& spec) {
  p.validate();
  if (spec.internal_levels != 3)
    throw std::invalid_argument("full generator needs internal_levels = 3");
  const OperatorSet<Real> o(spec);
  const auto b1 = embed_ion_op<Real>(spec, Ion::first, IonOp::b);
  const auto b2 = embed_ion_op<Real>(spec, Ion::second, IonOp::b);
  const OperatorMatrix<Real> bsum = b1 + b2;
  OperatorMatrix<Real> h = detail::metastable_hamiltonian(p, o) +
                           Real(p.omega_rp) * (bsum * o.a_dag + bsum.adjoint() * o.a);
  std::vector<Channel<Real>> ch;
  ch.push_back({"ion1", Real(p.gamma_sp), b1, true});
  ch.push_back({"ion2", Real(p.gamma_sp), b2, true});
  detail::append_background_channels(p, o, ch);
  return Generator<Real>(spec, std::move(h), std::move(ch), Real(p.xi));
}

/// Two-level model, temporary level eliminated: detected channels |g><g|_i a at
/// rate 4 omega_rp^2 / gamma_sp.
template <typename Real = double>
Generator<Real> build_eliminated_generator(const SchemeParams& p, const HilbertSpec& spec) {
  p.validate();
  if (spec.internal_levels != 2)
    throw std::invalid_argument("eliminated generator needs internal_levels = 2");
  const OperatorSet<Real> o(spec);
  OperatorMatrix<Real> h = detail::metastable_hamiltonian(p, o);
  const Real gamma = Real(p.gamma_eff());
  std::vector<Channel<Real>> ch;
  ch.push_back({"ion1", gamma, o.proj_g[0] * o.a, true});
  ch.push_back({"ion2", gamma, o.proj_g[1] * o.a, true});
  detail::append_background_channels(p, o, ch);
  return Generator<Real>(spec, std::move(h), std::move(ch), Real(p.xi));
}

enum class Unraveling { per_ion, symmetric_antisymmetric };

/// Replace the two detected channels A1, A2 by (A1 + A2)/sqrt2 and (A1 - A2)/sqrt2.
/// The sum of A^dag A and of A rho A^dag over the pair is unchanged.
template <typename Real = double>
Generator<Real> unraveling_variant(const Generator<Real>& gen, Unraveling variant) {
  if (variant == Unraveling::per_ion) return gen;
  const auto det = gen.detected_indices();
  if (det.size() != 2) throw std::invalid_argument("unraveling variant needs two detected channels");
  auto ch = gen.channels();
  auto& c1 = ch[det[0]];
  auto& c2 = ch[det[1]];
  if (c1.rate != c2.rate)
    throw std::invalid_argument("unraveling variant needs equal detected channel rates");
  const Real h = Real(1) / std::sqrt(Real(2));
  const OperatorMatrix<Real> sym = h * (c1.op + c2.op);
  const OperatorMatrix<Real> anti = h * (c1.op - c2.op);
  c1.op = sym;
  c1.name = "sym";
  c2.op = anti;
  c2.name = "anti";
  return Generator<Real>(gen.spec(), gen.hamiltonian(), std::move(ch), gen.xi());
}

/// Expected detection rate xi * rate_k * Tr[A_k^dag A_k rho] per detected channel.
template <typename Real = double>
std::vector<Real> detection_rate(const Generator<Real>& gen, const OperatorMatrix<Real>& rho) {
  std::vector<Real> rates;
  const Real tr = rho.trace().real();
  for (int k : gen.detected_indices()) {
    const Real r = gen.xi() * gen.channels()[k].rate * gen.expectation_ada(k, rho) / tr;
    rates.push_back(std::max<Real>(Real(0), r));
  }
  return rates;
}

}  // namespace ionbell
