#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <vector>

#include "dirac_core.hpp"

namespace dirac_darboux {

template <int N>
struct BoundState {
  double energy = 0.0;
  SpinorField<N> spinor;           // normalized
  std::function<double(double)> density;
  double norm = 0.0;               // ∫|ψ|² before normalization
  double residual = 0.0;
  bool finite_norm = false;
};

struct BoundStateCheck {
  double residual = 0.0;
  double norm = 0.0;
  bool finite_norm = false;
  TailDecay decay;
};

template <int N>
BoundStateCheck bound_state_check(const DiracOperator<N>& h, double eps, const SpinorField<N>& psi, const Grid& grid,
                                  double min_decay_rate = 0.1, double step = 1e-3) {
  BoundStateCheck out;
  std::vector<double> p(grid.size());
  for (int i = 0; i < grid.size(); ++i) p[i] = psi(grid[i]).squaredNorm();
  out.residual = eigen_residual(h, eps, psi, grid, step);
  out.norm = simpson<double>(p, grid.step());
  out.decay = tail_decay(p, grid);
  out.finite_norm = out.decay.left >= min_decay_rate && out.decay.right >= min_decay_rate;
  return out;
}

namespace detail {

// RK4 for Y' = γ⁻¹(E − V(x))Y with overflow renormalization; the true
// solution is Y·e^{log_scale}.
template <int N, int C>
Eigen::Matrix<cplx, N, C> rk4(const DiracOperator<N>& h, double e, double x0, double x1,
                              Eigen::Matrix<cplx, N, C> y, double step, double& log_scale) {
  using Y = Eigen::Matrix<cplx, N, C>;
  if (!(step > 0.0)) throw Error(ErrorKind::invalid_input, "integration step must be positive");
  const Mat<N> ginv = h.gamma.inverse();
  auto g = [&](const Mat<N>& v) { return Mat<N>(ginv * (e * Mat<N>::Identity() - v)); };
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(x1 - x0) / step - 1e-9)));
  const double dx = (x1 - x0) / n;
  Mat<N> g0 = g(h.potential(x0));
  log_scale = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = x0 + i * dx;
    const Mat<N> gm = g(h.potential(x + 0.5 * dx));
    const Mat<N> g1 = g(h.potential(i + 1 == n ? x1 : x + dx));
    const Y k1 = g0 * y;
    const Y k2 = gm * (y + 0.5 * dx * k1);
    const Y k3 = gm * (y + 0.5 * dx * k2);
    const Y k4 = g1 * (y + dx * k3);
    y += (dx / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    g0 = g1;
    const double nrm = y.norm();
    if (!std::isfinite(nrm)) throw Error(ErrorKind::numerical_failure, "propagation produced non-finite values");
    if (nrm > 1e100) {
      y /= nrm;
      log_scale += std::log(nrm);
    }
  }
  return y;
}

}  // namespace detail

/// Solution of (H − E)ψ = 0 with ψ(x0) = psi0, evaluated at x1.
template <int N>
Vec<N> propagate(const DiracOperator<N>& h, double e, double x0, double x1, const Vec<N>& psi0, double step = 1e-3) {
  double log_scale = 0.0;
  Vec<N> y = detail::rk4<N, 1>(h, e, x0, x1, psi0, step, log_scale);
  if (log_scale > 0.0) {
    y *= std::exp(log_scale);
    if (!y.allFinite()) throw Error(ErrorKind::numerical_failure, "propagated solution overflows double range");
  }
  return y;
}

/// Fundamental matrix from x0 to x1.
template <int N>
Mat<N> transfer_matrix(const DiracOperator<N>& h, double e, double x0, double x1, double step = 1e-3) {
  double log_scale = 0.0;
  Mat<N> m = detail::rk4<N, N>(h, e, x0, x1, Mat<N>::Identity(), step, log_scale);
  if (log_scale > 0.0) {
    m *= std::exp(log_scale);
    if (!m.allFinite()) throw Error(ErrorKind::numerical_failure, "transfer matrix overflows double range");
  }
  return m;
}

template <int N>
struct Channel {
  cplx mu;       // ψ ∝ e^{μx}u
  double k;      // Im μ for propagating channels
  Vec<N> u;      // unit vector
  double flux;   // u†(iγ)u
};

template <int N>
struct Channels {
  std::vector<Channel<N>> right;
  std::vector<Channel<N>> left;
  int evanescent = 0;
};

/// Eigen-decomposition of γ⁻¹(E − V∞). Degenerate clusters are rotated so
/// that every channel carries a definite current.
template <int N>
Channels<N> channels(const Mat<N>& gamma, const Mat<N>& v_inf, double e) {
  const Mat<N> a = gamma.inverse() * (e * Mat<N>::Identity() - v_inf);
  Eigen::ComplexEigenSolver<Mat<N>> solver(a);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::numerical_failure, "asymptotic eigenproblem failed");
  const auto mu = solver.eigenvalues();
  const auto vecs = solver.eigenvectors();
  const Mat<N> current = I_unit * gamma;
  const double scale = 1.0 + op_norm_inf(a);
  Channels<N> out;
  std::vector<bool> used(N, false);
  for (int i = 0; i < N; ++i) {
    if (used[i]) continue;
    std::vector<int> cluster;
    for (int j = i; j < N; ++j)
      if (!used[j] && std::abs(mu(j) - mu(i)) < 1e-8 * scale) {
        cluster.push_back(j);
        used[j] = true;
      }
    const int m = static_cast<int>(cluster.size());
    Eigen::Matrix<cplx, N, Eigen::Dynamic> c(N, m);
    for (int j = 0; j < m; ++j) c.col(j) = vecs.col(cluster[j]);
    Eigen::HouseholderQR<Eigen::Matrix<cplx, N, Eigen::Dynamic>> qr(c);
    Eigen::Matrix<cplx, N, Eigen::Dynamic> q =
        qr.householderQ() * Eigen::Matrix<cplx, N, Eigen::Dynamic>::Identity(N, m);
    Eigen::MatrixXcd gram = q.adjoint() * current * q;
    gram = 0.5 * (gram + gram.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    for (int j = 0; j < m; ++j) {
      Vec<N> u = q * es.eigenvectors().col(j);
      u.normalize();
      int lead = 0;
      for (int t = 0; t < N; ++t)
        if (std::abs(u(t)) > 1e-8) {
          lead = t;
          break;
        }
      u *= std::conj(u(lead)) / std::abs(u(lead));
      const cplx muc = mu(cluster[0]);
      if (max_abs(Vec<N>(a * u - muc * u)) > 1e-10 * scale)
        throw Error(ErrorKind::numerical_failure, "asymptotic channel residual too large");
      const double flux = (u.adjoint() * current * u)(0).real();
      if (std::abs(muc.real()) > 1e-8 * scale) {
        ++out.evanescent;
        continue;
      }
      if (std::abs(flux) < 1e-12) throw Error(ErrorKind::not_a_scattering_energy, "channel carries no current (band edge)");
      Channel<N> ch{muc, muc.imag(), u, flux};
      (flux > 0 ? out.right : out.left).push_back(ch);
    }
  }
  return out;
}

struct ScatterOptions {
  double step = 1e-3;
  std::optional<double> box;  // half-width; automatic when empty
  double asymptotic_tol = 1e-10;
  double box_cap = 50.0;
};

struct ScatteringResult {
  double energy = 0.0;
  cplx R = 0.0;  // flux-normalized reflection amplitude of largest modulus
  cplx T = 0.0;  // flux-normalized transmission amplitude of largest modulus
  double transmission = 0.0;  // min over incident channels of Σ|t̂|²
  double flux_defect = 0.0;
  double box_halfwidth = 0.0;
  Eigen::MatrixXcd reflection;    // r̂(out, in)
  Eigen::MatrixXcd transmission_matrix;
};

template <int N>
double auto_box(const MatrixField<N>& v, const ScatterOptions& opt = {}) {
  if (!v.has_asymptotics()) throw Error(ErrorKind::invalid_input, "potential has no declared asymptotic limits");
  for (double l = 1.0; l < opt.box_cap; l += 0.5) {
    if (max_abs(Mat<N>(v(-l) - *v.minus_inf)) < opt.asymptotic_tol &&
        max_abs(Mat<N>(v(l) - *v.plus_inf)) < opt.asymptotic_tol)
      return l;
  }
  return opt.box_cap;
}

template <int N>
ScatteringResult reflection_transmission(const DiracOperator<N>& h, double e, const ScatterOptions& opt = {}) {
  const MatrixField<N>& v = h.potential;
  if (!v.has_asymptotics()) throw Error(ErrorKind::invalid_input, "potential has no declared asymptotic limits");
  const double l = opt.box ? *opt.box : auto_box(v, opt);
  const Channels<N> lc = channels(h.gamma, *v.minus_inf, e);
  const Channels<N> rc = channels(h.gamma, *v.plus_inf, e);
  if (lc.evanescent == N && rc.evanescent == N)
    throw Error(ErrorKind::not_a_scattering_energy, "energy lies in the asymptotic gap on both sides");
  if (lc.evanescent > 0 || rc.evanescent > 0)
    throw Error(ErrorKind::one_sided_scattering, "evanescent channels present at this energy");
  const int half = N / 2;
  if (static_cast<int>(lc.right.size()) != half || static_cast<int>(lc.left.size()) != half ||
      static_cast<int>(rc.right.size()) != half || static_cast<int>(rc.left.size()) != half)
    throw Error(ErrorKind::numerical_failure, "unbalanced channel count");

  const Mat<N> m = transfer_matrix(h, e, -l, l, opt.step);
  Mat<N> sys;
  for (int i = 0; i < half; ++i) {
    sys.col(i) = rc.right[i].u;
    sys.col(half + i) = -m * lc.left[i].u;
  }
  Eigen::FullPivLU<Mat<N>> lu(sys);
  if (!lu.isInvertible()) throw Error(ErrorKind::numerical_failure, "scattering system is singular");

  ScatteringResult out;
  out.energy = e;
  out.box_halfwidth = l;
  out.reflection = Eigen::MatrixXcd::Zero(half, half);
  out.transmission_matrix = Eigen::MatrixXcd::Zero(half, half);
  out.transmission = std::numeric_limits<double>::infinity();
  for (int j = 0; j < half; ++j) {
    const Vec<N> sol = lu.solve(Vec<N>(m * lc.right[j].u));
    const double fin = std::abs(lc.right[j].flux);
    double prob_r = 0.0;
    double prob_t = 0.0;
    for (int i = 0; i < half; ++i) {
      const cplx t = sol(i) * std::sqrt(std::abs(rc.right[i].flux) / fin);
      const cplx r = sol(half + i) * std::sqrt(std::abs(lc.left[i].flux) / fin);
      out.transmission_matrix(i, j) = t;
      out.reflection(i, j) = r;
      prob_r += std::norm(r);
      prob_t += std::norm(t);
      if (std::abs(r) >= std::abs(out.R)) out.R = r;
      if (std::abs(t) >= std::abs(out.T)) out.T = t;
    }
    out.flux_defect = std::max(out.flux_defect, std::abs(prob_r + prob_t - 1.0));
    out.transmission = std::min(out.transmission, prob_t);
  }
  return out;
}

}  // namespace dirac_darboux
