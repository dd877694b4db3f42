#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "numerics.hpp"

namespace dirac_darboux {

/// γ∂ + V(x) with γ anti-Hermitian and invertible.
template <int N>
struct DiracOperator {
  Mat<N> gamma;
  MatrixField<N> potential;
  bool hermitian = false;
};

/// A·∂ + B(x). Covers Dirac operators, intertwiners and their adjoints.
template <int N>
struct FirstOrderOperator {
  Mat<N> lead;
  MatrixField<N> zeroth;

  Vec<N> apply(const SpinorField<N>& psi, double x, double h) const {
    Vec<N> out = zeroth(x) * psi(x);
    if (max_abs(lead) > 0.0) out += lead * central_derivative(psi.value, x, h);
    return out;
  }

  /// (A∂ + B)† = −A†∂ + B† for constant A.
  FirstOrderOperator adjoint() const {
    auto b = zeroth;
    MatrixField<N> adj{[b](double x) { return Mat<N>(b(x).adjoint()); }, {}, {}};
    if (b.minus_inf) adj.minus_inf = b.minus_inf->adjoint();
    if (b.plus_inf) adj.plus_inf = b.plus_inf->adjoint();
    return {Mat<N>(-lead.adjoint()), adj};
  }
};

template <int N>
FirstOrderOperator<N> as_first_order(const DiracOperator<N>& h) {
  return {h.gamma, h.potential};
}

/// The field x ↦ (op ψ)(x), derivatives by central differences with step h.
template <int N>
SpinorField<N> act(const FirstOrderOperator<N>& op, const SpinorField<N>& psi, double h) {
  return {[op, psi, h](double x) { return op.apply(psi, x, h); }, {}};
}

template <int N>
double hermiticity_defect(const MatrixField<N>& field, const Grid& grid) {
  double worst = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const Mat<N> v = field(grid[i]);
    worst = std::max(worst, max_abs(v - v.adjoint()));
  }
  return worst;
}

template <int N>
DiracOperator<N> make_operator(const Mat<N>& gamma, MatrixField<N> potential, const Grid& sample = Grid::standard()) {
  if (max_abs(gamma + gamma.adjoint()) > 1e-12)
    throw Error(ErrorKind::invalid_operator, "gamma must be anti-Hermitian");
  if (std::abs(gamma.determinant()) < 1e-12)
    throw Error(ErrorKind::invalid_operator, "gamma must be invertible");
  if (!potential.eval) throw Error(ErrorKind::invalid_operator, "potential field has no evaluator");
  const bool herm = hermiticity_defect(potential, sample) < 1e-10;
  return {gamma, std::move(potential), herm};
}

/// (H − shift)ψ at x, derivative by central differences.
template <int N>
Vec<N> apply(const DiracOperator<N>& h, const SpinorField<N>& psi, double x, double step = 1e-3, double shift = 0.0) {
  return h.gamma * central_derivative(psi.value, x, step) + h.potential(x) * psi(x) - shift * psi(x);
}

/// (H − shift)ψ at x using the exact derivative when the field has one.
template <int N>
Vec<N> apply_exact(const DiracOperator<N>& h, const SpinorField<N>& psi, double x, double step = 1e-3,
                   double shift = 0.0) {
  const Vec<N> d = psi.has_derivative() ? psi.derivative(x) : central_derivative(psi.value, x, step);
  return h.gamma * d + h.potential(x) * psi(x) - shift * psi(x);
}

/// U(x) = (Φ_1 … Φ_N) with real factorization energies.
template <int N>
struct SeedMatrix {
  std::function<Mat<N>(double)> u;
  std::function<Mat<N>(double)> u_x;  // empty: use finite differences
  std::array<double, N> energies{};

  Mat<N> value(double x) const { return u(x); }
  Mat<N> derivative(double x, double fd_step) const {
    if (u_x) return u_x(x);
    return central_derivative(u, x, fd_step);
  }
  SpinorField<N> column(int k) const {
    auto uu = u;
    auto ux = u_x;
    SpinorField<N> out{[uu, k](double x) { return Vec<N>(uu(x).col(k)); }, {}};
    if (ux) out.derivative = [ux, k](double x) { return Vec<N>(ux(x).col(k)); };
    return out;
  }
};

template <int N>
SeedMatrix<N> seed_from_columns(const std::array<SpinorField<N>, N>& cols, const std::array<cplx, N>& energies) {
  SeedMatrix<N> seed;
  for (int k = 0; k < N; ++k) {
    if (std::abs(energies[k].imag()) > 0.0)
      throw Error(ErrorKind::invalid_seed, "factorization energies must be real");
    seed.energies[k] = energies[k].real();
  }
  seed.u = [cols](double x) {
    Mat<N> m;
    for (int k = 0; k < N; ++k) m.col(k) = cols[k](x);
    return m;
  };
  bool all_exact = true;
  for (const auto& c : cols) all_exact = all_exact && c.has_derivative();
  if (all_exact) {
    seed.u_x = [cols](double x) {
      Mat<N> m;
      for (int k = 0; k < N; ++k) m.col(k) = cols[k].derivative(x);
      return m;
    };
  }
  return seed;
}

struct DarbouxOptions {
  double tol_seed = 1e-8;
  double fd_step = 1e-4;
  double det_threshold = 1e-12;
  Grid grid = Grid::standard();
};

namespace detail {

// Column-normalized seed Û = U·diag(1/n_k). UₓU⁻¹ = ÛₓÛ⁻¹ and |det Û| ≤ 1
// is a scale-free singularity measure (Hadamard ratio).
template <int N>
struct NormalizedSeed {
  Mat<N> u;
  Mat<N> u_x;
  std::array<double, N> norms;
};

template <int N>
NormalizedSeed<N> normalize(const SeedMatrix<N>& seed, double x, double fd_step) {
  NormalizedSeed<N> out{seed.value(x), seed.derivative(x, fd_step), {}};
  for (int k = 0; k < N; ++k) {
    const double n = out.u.col(k).norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw Error(ErrorKind::singular_seed, "seed column vanishes or overflows at x = " + std::to_string(x), x);
    out.norms[k] = n;
    out.u.col(k) /= n;
    out.u_x.col(k) /= n;
  }
  return out;
}

template <int N>
double hadamard_ratio(const SeedMatrix<N>& seed, double x) {
  Mat<N> u = seed.value(x);
  for (int k = 0; k < N; ++k) {
    const double n = u.col(k).norm();
    if (!(n > 0.0) || !std::isfinite(n)) return 0.0;
    u.col(k) /= n;
  }
  return std::abs(u.determinant());
}

}  // namespace detail

/// UₓU⁻¹ at x; throws singular-seed carrying x.
template <int N>
Mat<N> seed_kernel(const SeedMatrix<N>& seed, double x, const DarbouxOptions& opt = {}) {
  const auto ns = detail::normalize(seed, x, opt.fd_step);
  try {
    return ns.u_x * invert<N>(ns.u, opt.det_threshold);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::singular_matrix) throw;
    throw Error(ErrorKind::singular_seed, "det U vanishes at x = " + std::to_string(x), x);
  }
}

/// Scans the Hadamard ratio on the grid and refines every local minimum
/// below 0.1 by golden-section search. Returns the smallest ratio and its x.
template <int N>
std::pair<double, double> min_seed_ratio(const SeedMatrix<N>& seed, const Grid& grid) {
  const int n = grid.size();
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) r[i] = detail::hadamard_ratio(seed, grid[i]);
  double best = r[0];
  double best_x = grid[0];
  for (int i = 0; i < n; ++i) {
    if (r[i] < best) {
      best = r[i];
      best_x = grid[i];
    }
  }
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 1; i + 1 < n; ++i) {
    if (!(r[i] <= r[i - 1] && r[i] <= r[i + 1] && r[i] < 0.1)) continue;
    double a = grid[i - 1];
    double b = grid[i + 1];
    double c = b - golden * (b - a);
    double d = a + golden * (b - a);
    double fc = detail::hadamard_ratio(seed, c);
    double fd = detail::hadamard_ratio(seed, d);
    for (int it = 0; it < 200 && (b - a) > 1e-15 * (1.0 + std::abs(a)); ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - golden * (b - a);
        fc = detail::hadamard_ratio(seed, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + golden * (b - a);
        fd = detail::hadamard_ratio(seed, d);
      }
    }
    const double fm = std::min(fc, fd);
    if (fm < best) {
      best = fm;
      best_x = fc < fd ? c : d;
    }
  }
  return {best, best_x};
}

/// Max relative residual ‖(H − ε_k)Φ_k‖∞ / ‖Φ_k‖∞ over grid and columns.
template <int N>
double seed_residual(const DiracOperator<N>& h, const SeedMatrix<N>& seed, const Grid& grid, double step = 1e-3) {
  double worst = 0.0;
  for (int k = 0; k < N; ++k) {
    const SpinorField<N> col = seed.column(k);
    for (int i = 2; i + 2 < grid.size(); ++i) {
      const double x = grid[i];
      const Vec<N> r = apply_exact(h, col, x, step, seed.energies[k]);
      const double scale = std::max(max_abs(col(x)), 1e-300);
      worst = std::max(worst, max_abs(r) / scale);
    }
  }
  return worst;
}

template <int N>
struct DarbouxPair {
  DiracOperator<N> original;
  DiracOperator<N> transformed;
  MatrixField<N> intertwiner_kernel;
  SeedMatrix<N> seed;

  /// L = ∂ − UₓU⁻¹.
  FirstOrderOperator<N> intertwiner() const {
    auto w = intertwiner_kernel;
    return {Mat<N>::Identity(), {[w](double x) { return Mat<N>(-w(x)); }, {}, {}}};
  }
};

template <int N>
DarbouxPair<N> darboux(const DiracOperator<N>& h, const SeedMatrix<N>& seed, const DarbouxOptions& opt = {}) {
  const double res = seed_residual(h, seed, opt.grid);
  if (!(res < opt.tol_seed))
    throw Error(ErrorKind::invalid_seed, "seed columns are not eigensolutions (relative residual " +
                                             std::to_string(res) + ")", res);
  const auto [ratio, where] = min_seed_ratio(seed, opt.grid);
  if (!(ratio > opt.det_threshold))
    throw Error(ErrorKind::singular_seed, "det U vanishes near x = " + std::to_string(where), where);

  MatrixField<N> kernel{[seed, opt](double x) { return seed_kernel(seed, x, opt); }, {}, {}};
  const Mat<N> gamma = h.gamma;
  const MatrixField<N> v = h.potential;
  MatrixField<N> vt{[v, kernel, gamma](double x) {
                      const Mat<N> w = kernel(x);
                      return Mat<N>(v(x) + gamma * w - w * gamma);
                    },
                    {},
                    {}};
  DarbouxPair<N> pair{h, make_operator(gamma, vt, opt.grid), kernel, seed};
  return pair;
}

/// x ↦ (∂ψ)(x) − UₓU⁻¹ψ(x).
template <int N>
SpinorField<N> intertwine_apply(const DarbouxPair<N>& pair, const SpinorField<N>& psi, double step = 1e-3) {
  auto w = pair.intertwiner_kernel;
  return {[w, psi, step](double x) {
            const Vec<N> d = psi.has_derivative() ? psi.derivative(x) : central_derivative(psi.value, x, step);
            return Vec<N>(d - w(x) * psi(x));
          },
          {}};
}

/// Gaussian-enveloped plane waves e^{-(x-x0)²/(2s²)} e^{ikx} c with exact derivatives.
template <int N>
std::vector<SpinorField<N>> default_test_spinors() {
  const double ks[3] = {0.5, 1.5, 3.0};
  const double centers[3] = {-2.0, 0.0, 2.0};
  const double s = 2.0;
  std::vector<SpinorField<N>> out;
  for (int j = 0; j < 3; ++j) {
    Vec<N> c;
    for (int i = 0; i < N; ++i) c(i) = cplx(1.0 + 0.3 * i + 0.1 * j, 0.2 * (i + 1) - 0.15 * j);
    const double k = ks[j];
    const double x0 = centers[j];
    auto val = [c, k, x0, s](double x) {
      return Vec<N>(std::exp(-(x - x0) * (x - x0) / (2 * s * s)) * std::exp(I_unit * k * x) * c);
    };
    auto der = [val, k, x0, s](double x) { return Vec<N>((-(x - x0) / (s * s) + I_unit * k) * val(x)); };
    out.push_back({val, der});
  }
  return out;
}

/// max over interior grid points and tests of ‖(P Q − R S)ψ‖∞.
template <int N>
double commutation_residual(const FirstOrderOperator<N>& p, const FirstOrderOperator<N>& q,
                            const FirstOrderOperator<N>& r, const FirstOrderOperator<N>& s,
                            const std::vector<SpinorField<N>>& tests, const Grid& grid, double h = 1e-3) {
  double worst = 0.0;
  for (const auto& psi : tests) {
    const SpinorField<N> qpsi = act(q, psi, h);
    const SpinorField<N> spsi = act(s, psi, h);
    for (int i = 2; i + 2 < grid.size(); ++i) {
      const double x = grid[i];
      const Vec<N> diff = p.apply(qpsi, x, h) - r.apply(spsi, x, h);
      worst = std::max(worst, max_abs(diff));
    }
  }
  return worst;
}

/// Residual of L H = H̃ L on a finite test family.
template <int N>
double intertwining_residual(const DiracOperator<N>& h, const DiracOperator<N>& ht, const FirstOrderOperator<N>& l,
                             const std::vector<SpinorField<N>>& tests, const Grid& grid, double step = 1e-3) {
  return commutation_residual(l, as_first_order(h), as_first_order(ht), l, tests, grid, step);
}

template <int N>
double intertwining_residual(const DarbouxPair<N>& pair, const std::vector<SpinorField<N>>& tests,
                             const Grid& grid, double step = 1e-3) {
  return intertwining_residual(pair.original, pair.transformed, pair.intertwiner(), tests, grid, step);
}

/// (γ∂ + V)† = γ∂ + V†.
template <int N>
DiracOperator<N> adjoint_operator(const DiracOperator<N>& h) {
  auto v = h.potential;
  MatrixField<N> adj{[v](double x) { return Mat<N>(v(x).adjoint()); }, {}, {}};
  if (v.minus_inf) adj.minus_inf = v.minus_inf->adjoint();
  if (v.plus_inf) adj.plus_inf = v.plus_inf->adjoint();
  return {h.gamma, adj, h.hermitian};
}

template <int N>
struct MissingState {
  double energy = 0.0;
  SpinorField<N> field;  // normalized when finite_norm, else scaled to unit peak on the grid
  bool finite_norm = false;
  double raw_norm = 0.0;  // ∫|Φ̃|² of the unscaled column over the grid
  double residual = 0.0;
  TailDecay decay;
};

template <int N>
struct MissingStateSet {
  std::vector<MissingState<N>> states;
};

struct MissingStateOptions {
  double min_decay_rate = 0.1;
  double fd_step = 1e-4;
  double residual_step = 1e-3;
  Grid grid = Grid::standard();
};

namespace detail {

template <int N>
std::vector<double> density_on(const SpinorField<N>& f, const Grid& grid) {
  std::vector<double> p(grid.size());
  for (int i = 0; i < grid.size(); ++i) p[i] = f(grid[i]).squaredNorm();
  return p;
}

}  // namespace detail

/// Max residual ‖(H − ε)ψ‖∞ over the grid interior.
template <int N>
double eigen_residual(const DiracOperator<N>& h, double eps, const SpinorField<N>& psi, const Grid& grid,
                      double step = 1e-3) {
  double worst = 0.0;
  for (int i = 2; i + 2 < grid.size(); ++i) worst = std::max(worst, max_abs(apply(h, psi, grid[i], step, eps)));
  return worst;
}

/// Columns of (U⁻¹)†, classified and checked against `target` (H̃, or H̃† for
/// non-Hermitian transforms).
template <int N>
MissingStateSet<N> missing_states(const SeedMatrix<N>& seed, const DiracOperator<N>& target,
                                  const MissingStateOptions& opt = {}) {
  MissingStateSet<N> out;
  const Grid& grid = opt.grid;
  for (int k = 0; k < N; ++k) {
    SpinorField<N> raw{[seed, k, opt](double x) {
                         const auto ns = detail::normalize(seed, x, opt.fd_step);
                         Mat<N> inv;
                         try {
                           inv = invert<N>(ns.u);
                         } catch (const Error& e) {
                           if (e.kind() != ErrorKind::singular_matrix) throw;
                           throw Error(ErrorKind::singular_seed, "det U vanishes at x = " + std::to_string(x), x);
                         }
                         return Vec<N>(inv.adjoint().col(k) / ns.norms[k]);
                       },
                       {}};
    const std::vector<double> p = detail::density_on(raw, grid);
    MissingState<N> st;
    st.energy = seed.energies[k];
    st.raw_norm = simpson<double>(p, grid.step());
    st.decay = tail_decay(p, grid);
    st.finite_norm = st.decay.left >= opt.min_decay_rate && st.decay.right >= opt.min_decay_rate && st.raw_norm > 0.0;
    double scale;
    if (st.finite_norm) {
      scale = 1.0 / std::sqrt(st.raw_norm);
    } else {
      const double peak = *std::max_element(p.begin(), p.end());
      scale = peak > 0.0 ? 1.0 / std::sqrt(peak) : 1.0;
    }
    st.field = {[raw, scale](double x) { return Vec<N>(scale * raw(x)); }, {}};
    st.residual = eigen_residual(target, st.energy, st.field, grid, opt.residual_step);
    out.states.push_back(std::move(st));
  }
  return out;
}

template <int N>
MissingStateSet<N> missing_states(const DarbouxPair<N>& pair, const MissingStateOptions& opt = {}) {
  return missing_states(pair.seed, pair.transformed, opt);
}

}  // namespace dirac_darboux
