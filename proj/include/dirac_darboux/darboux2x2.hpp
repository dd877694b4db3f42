#pragma once

#include <cmath>
#include <vector>

#include "free2x2.hpp"
#include "scatter.hpp"

namespace dirac_darboux {

/// Closed-form seed U = (ψ_ε₁, ψ̄_ε₂) with z_j = κ_j x + δ_j.
struct Seed2x2 {
  FreeParams params;
  double eps1 = 0.0, eps2 = 0.0;
  double delta1 = 0.0, delta2 = 0.0;
  double kappa1 = 0.0, kappa2 = 0.0;

  double A() const { return params.v - eps2; }
  double B() const { return params.w - eps1; }
  double im() const { return params.a.imag(); }
  double re() const { return params.a.real(); }
  bool degenerate() const { return eps1 == eps2; }

  double z1(double x) const { return kappa1 * x + delta1; }
  double z2(double x) const { return kappa2 * x + delta2; }

  double D_at(double t1, double t2) const { return A() * B() + (kappa1 * t1 + im()) * (kappa2 * t2 - im()); }
  double D(double x) const { return D_at(std::tanh(z1(x)), std::tanh(z2(x))); }

  Mat2 U(double x) const {
    const double c1 = std::cosh(z1(x)), s1 = std::sinh(z1(x));
    const double c2 = std::cosh(z2(x)), s2 = std::sinh(z2(x));
    const cplx ph = std::exp(-I_unit * re() * x);
    return ph * pauli::make(c1, I_unit / A() * (-im() * c2 + kappa2 * s2), I_unit / B() * (im() * c1 + kappa1 * s1), c2);
  }

  Mat2 U_x(double x) const {
    const double c1 = std::cosh(z1(x)), s1 = std::sinh(z1(x));
    const double c2 = std::cosh(z2(x)), s2 = std::sinh(z2(x));
    const double k1 = kappa1, k2 = kappa2;
    const cplx ph = std::exp(-I_unit * re() * x);
    const Mat2 d = ph * pauli::make(k1 * s1, I_unit / A() * (-im() * k2 * s2 + k2 * k2 * c2),
                                    I_unit / B() * (im() * k1 * s1 + k1 * k1 * c1), k2 * s2);
    return Mat2(-I_unit * re() * U(x) + d);
  }

  cplx det_closed(double x) const {
    return std::exp(-2.0 * I_unit * re() * x) * std::cosh(z1(x)) * std::cosh(z2(x)) * D(x) / (A() * B());
  }

  /// D·(UₓU⁻¹ + i Re a) as a function of t_j = tanh z_j.
  Mat2 F_at(double t1, double t2) const {
    const double k1 = kappa1, k2 = kappa2, a = A(), b = B(), i = im();
    const double f11 = a * b * k1 * t1 + (k2 * k2 - i * k2 * t2) * (i + k1 * t1);
    const cplx f12 = I_unit * b * (k2 * k2 + i * k1 * t1 - k2 * t2 * (i + k1 * t1));
    const cplx f21 = I_unit * a * (k1 * k1 + i * k1 * t1 - k2 * t2 * (i + k1 * t1));
    const double f22 = a * b * k2 * t2 + (k1 * k1 + i * k1 * t1) * (k2 * t2 - i);
    return pauli::make(f11, f12, f21, f22);
  }

  Mat2 kernel_at(double t1, double t2) const {
    return Mat2(-I_unit * re() * pauli::s0 + F_at(t1, t2) / D_at(t1, t2));
  }

  Mat2 kernel(double x) const {
    if (degenerate() && delta1 == delta2) return kernel_at(0.0, 0.0);
    return kernel_at(std::tanh(z1(x)), std::tanh(z2(x)));
  }

  SeedMatrix<2> seed_matrix() const {
    const Seed2x2 s = *this;
    SeedMatrix<2> out;
    out.u = [s](double x) { return s.U(x); };
    out.u_x = [s](double x) { return s.U_x(x); };
    out.energies = {eps1, eps2};
    return out;
  }
};

inline Seed2x2 build_seed(const FreeParams& p, double eps1, double eps2, double delta1 = 0.0, double delta2 = 0.0) {
  if (!std::isfinite(eps1) || !std::isfinite(eps2) || !std::isfinite(delta1) || !std::isfinite(delta2))
    throw Error(ErrorKind::invalid_seed_energy, "seed parameters must be finite");
  const Band band = band_edges(p);
  for (double e : {eps1, eps2}) {
    if (!band.contains(e))
      throw Error(ErrorKind::invalid_seed_energy,
                  "factorization energy " + std::to_string(e) + " is not strictly inside the band (" +
                      std::to_string(band.eps_minus) + ", " + std::to_string(band.eps_plus) + ")");
    if (detail::near_pole(e - p.v, p.v) || detail::near_pole(e - p.w, p.w))
      throw Error(ErrorKind::invalid_seed_energy, "factorization energy coincides with v or w");
  }
  Seed2x2 s{p, eps1, eps2, delta1, delta2, kappa(eps1, p).real(), kappa(eps2, p).real()};
  if (!(s.kappa1 > 0.0) || !(s.kappa2 > 0.0))
    throw Error(ErrorKind::invalid_seed_energy, "kappa vanishes at a factorization energy");
  return s;
}

enum class Orientation { standard, mirrored, none };

struct Regularity {
  bool sufficient_condition_holds = false;
  Orientation orientation = Orientation::none;
  double lhs = 0.0;
  double rhs = 0.0;
  double min_abs_D = 0.0;
  double min_x = 0.0;
  bool node_detected = false;
  double node_x = 0.0;
};

/// Sufficient nodelessness condition (advisory) plus an authoritative grid
/// scan of D(x) for sign changes and near-zero interior minima.
inline Regularity regularity(const Seed2x2& s, const Grid& grid = Grid::standard()) {
  Regularity r;
  const double v = s.params.v, w = s.params.w, i = s.im(), k1 = s.kappa1, k2 = s.kappa2;
  const auto between = [](double e, double lo, double hi) { return lo < e && e < hi; };
  if (v < w && i >= 0.0 && between(s.eps1, v, w) && between(s.eps2, v, w)) {
    r.orientation = Orientation::standard;
    r.lhs = (w - s.eps1) * (s.eps2 - v) + i * i;
    r.rhs = k1 * k2 + i * (k1 + k2);
  } else if (w < v && i <= 0.0 && between(s.eps1, w, v) && between(s.eps2, w, v)) {
    r.orientation = Orientation::mirrored;
    r.lhs = (v - s.eps2) * (s.eps1 - w) + i * i;
    r.rhs = k1 * k2 - i * (k1 + k2);
  }
  r.sufficient_condition_holds = r.orientation != Orientation::none && r.lhs > r.rhs;

  const int n = grid.size();
  if (s.degenerate() && s.delta1 == s.delta2) {
    // D = −κ² sech² z: its zeros sit at infinity while det U stays constant.
    r.min_abs_D = s.kappa1 * s.kappa1;
    return r;
  }
  std::vector<double> d(n);
  double peak = 0.0;
  for (int j = 0; j < n; ++j) {
    d[j] = s.D(grid[j]);
    peak = std::max(peak, std::abs(d[j]));
  }
  r.min_abs_D = std::abs(d[0]);
  r.min_x = grid[0];
  for (int j = 0; j < n; ++j) {
    if (std::abs(d[j]) < r.min_abs_D) {
      r.min_abs_D = std::abs(d[j]);
      r.min_x = grid[j];
    }
    if (j + 1 < n && !r.node_detected && (d[j] == 0.0 || d[j] * d[j + 1] < 0.0)) {
      r.node_detected = true;
      r.node_x = grid[j];
    }
  }
  if (!r.node_detected) {
    // Tangential zeros: refine interior minima of |D|.
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    auto f = [&](double x) { return std::abs(s.D(x)); };
    for (int j = 1; j + 1 < n && !r.node_detected; ++j) {
      const double aj = std::abs(d[j]);
      if (!(aj <= std::abs(d[j - 1]) && aj <= std::abs(d[j + 1]) && aj < 1e-3 * peak)) continue;
      double a = grid[j - 1], b = grid[j + 1];
      double c = b - golden * (b - a), e = a + golden * (b - a);
      double fc = f(c), fe = f(e);
      for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
        if (fc < fe) {
          b = e, e = c, fe = fc, c = b - golden * (b - a), fc = f(c);
        } else {
          a = c, c = e, fc = fe, e = a + golden * (b - a), fe = f(e);
        }
      }
      if (std::min(fc, fe) < 1e-12 * peak) {
        r.node_detected = true;
        r.node_x = fc < fe ? c : e;
      }
    }
  }
  return r;
}

/// ṽ, w̃, ã of the transformed 2×2 potential.
struct Transformed2x2 {
  Seed2x2 seed;

  struct Entries {
    double v_t;
    double w_t;
    cplx a_t;
  };

  Entries entries_at(double t1, double t2) const {
    const Seed2x2& s = seed;
    const FreeParams& p = s.params;
    if (s.degenerate()) return {p.w, p.v, std::conj(p.a)};
    const double de = s.eps1 - s.eps2;
    const double d = s.D_at(t1, t2);
    const double frac = 2.0 * de * s.A() * s.B() / d;
    const double num = s.im() * (p.v - p.w + de) + s.A() * s.kappa1 * t1 + s.B() * s.kappa2 * t2;
    return {p.w + s.eps2 - s.eps1 + frac, p.v - s.eps2 + s.eps1 - frac,
            cplx(s.re(), -(s.im() + de * num / d))};
  }

  Entries entries(double x) const { return entries_at(std::tanh(seed.z1(x)), std::tanh(seed.z2(x))); }
  double v_t(double x) const { return entries(x).v_t; }
  double w_t(double x) const { return entries(x).w_t; }
  cplx a_t(double x) const { return entries(x).a_t; }

  Entries limit(int side) const { return entries_at(side, side); }

  static Mat2 assemble(const Entries& e) { return pauli::make(e.v_t, e.a_t, std::conj(e.a_t), e.w_t); }
  Mat2 potential(double x) const { return assemble(entries(x)); }

  MatrixField<2> field() const {
    const Transformed2x2 t = *this;
    return {[t](double x) { return t.potential(x); }, assemble(limit(-1)), assemble(limit(1))};
  }

  DiracOperator<2> op() const { return {Mat2(-I_unit * pauli::s1), field(), true}; }

  // Expressions exactly as typeset; kept to document how they relate to
  // the implemented ones.
  double printed_v_t(double x) const {
    const Seed2x2& s = seed;
    return s.params.w + s.eps2 - s.eps1 - 2.0 * (s.eps1 - s.eps2) * s.B() * s.A() / s.D(x);
  }
  double printed_w_t(double x) const {
    const Seed2x2& s = seed;
    return s.params.v - s.eps2 + s.eps1 + 2.0 * (s.eps1 - s.eps2) * s.B() * s.A() / s.D(x);
  }
  double printed_a_t(double x) const {
    const Seed2x2& s = seed;
    const double t1 = std::tanh(s.z1(x)), t2 = std::tanh(s.z2(x));
    return s.im() + (s.eps1 - s.eps2) *
                        (s.im() * (s.params.v - s.params.w + s.eps1 - s.eps2) + s.A() * s.kappa1 * t1 +
                         s.B() * s.kappa2 * t2) /
                        s.D(x);
  }
};

inline Transformed2x2 transform(const Seed2x2& s, const Grid& grid = Grid::standard()) {
  const Regularity r = regularity(s, grid);
  if (r.node_detected)
    throw Error(ErrorKind::singular_seed, "D(x) has a node near x = " + std::to_string(r.node_x), r.node_x);
  return {s};
}

/// Missing states of the transformed operator in closed form, normalized on
/// the grid. Degenerate seeds give none.
inline std::vector<BoundState<2>> bound_states(const Transformed2x2& t, const Grid& grid = Grid::standard()) {
  std::vector<BoundState<2>> out;
  const Seed2x2& s = t.seed;
  if (s.degenerate()) return out;
  const DiracOperator<2> ht = t.op();
  const double min_decay = 0.5 * std::min(s.kappa1, s.kappa2);
  for (int j = 0; j < 2; ++j) {
    std::function<Vec2(double)> raw;
    if (j == 0) {
      raw = [s](double x) {
        const double t2 = std::tanh(s.z2(x));
        const cplx pre = std::exp(-I_unit * s.re() * x) / (std::cosh(s.z1(x)) * s.D(x));
        return Vec2(pre * Vec2(1.0, I_unit / s.A() * (-s.im() + s.kappa2 * t2)));
      };
    } else {
      raw = [s](double x) {
        const double t1 = std::tanh(s.z1(x));
        const cplx pre = std::exp(-I_unit * s.re() * x) / (std::cosh(s.z2(x)) * s.D(x));
        return Vec2(pre * Vec2(I_unit / s.B() * (s.im() + s.kappa1 * t1), 1.0));
      };
    }
    std::vector<double> p(grid.size());
    for (int i = 0; i < grid.size(); ++i) p[i] = raw(grid[i]).squaredNorm();
    const double norm = simpson<double>(p, grid.step());
    const TailDecay decay = tail_decay(p, grid);
    if (!(decay.left >= min_decay && decay.right >= min_decay) || !(norm > 0.0)) continue;
    const double scale = 1.0 / std::sqrt(norm);
    BoundState<2> b;
    b.energy = j == 0 ? s.eps1 : s.eps2;
    b.spinor = {[raw, scale](double x) { return Vec2(scale * raw(x)); }, {}};
    auto spinor = b.spinor;
    b.density = [spinor](double x) { return spinor(x).squaredNorm(); };
    b.norm = norm;
    b.finite_norm = true;
    b.residual = eigen_residual(ht, b.energy, b.spinor, grid);
    out.push_back(std::move(b));
  }
  return out;
}

struct ChiralResult {
  std::function<double(double)> omega3_t;
  DiracOperator<2> transformed;
  SeedMatrix<2> seed;  // U₁ = (ξ₁, σ₂ξ₁), energies (ε₁, −ε₁)
};

/// ω̃₃ = ω₃ + 2 ξᵀσ₂ξ' / (ξᵀξ) for h₁ = −iσ₁∂ + ω₃σ₃.
inline ChiralResult chiral_transform(const std::function<double(double)>& omega3, const SpinorField<2>& xi1,
                                     double eps1, const Grid& grid = Grid::standard(), double tol_seed = 1e-8) {
  const DiracOperator<2> h1{Mat2(-I_unit * pauli::s1),
                            {[omega3](double x) { return Mat2(omega3(x) * pauli::s3); }, {}, {}},
                            true};
  SpinorField<2> xi = xi1;
  if (!xi.has_derivative()) {
    auto val = xi1.value;
    xi.derivative = [val](double x) { return central_derivative(val, x, 1e-4); };
  }
  auto correction = [xi](double x) {
    const Vec2 f = xi(x);
    const Vec2 d = xi.derivative(x);
    return cplx(2.0 * (f.transpose() * pauli::s2 * d)(0) / (f.transpose() * f)(0));
  };
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    const Vec2 f = xi(x);
    const double scale = std::max(max_abs(f), 1e-300);
    if (max_abs(apply_exact(h1, xi, x, 1e-3, eps1)) > tol_seed * scale)
      throw Error(ErrorKind::invalid_seed, "xi1 is not an eigensolution at eps1");
    if (std::abs((f.transpose() * f)(0)) < 1e-12 * scale * scale)
      throw Error(ErrorKind::singular_seed, "xi1^T xi1 vanishes at x = " + std::to_string(x), x);
    const cplx c = correction(x);
    if (std::abs(c.imag()) > 1e-8 * (1.0 + std::abs(c.real())))
      throw Error(ErrorKind::invalid_seed, "chiral correction is not real-valued");
  }
  ChiralResult out;
  out.omega3_t = [omega3, correction](double x) { return omega3(x) + correction(x).real(); };
  auto wt = out.omega3_t;
  out.transformed = {Mat2(-I_unit * pauli::s1), {[wt](double x) { return Mat2(wt(x) * pauli::s3); }, {}, {}}, true};
  out.seed.u = [xi](double x) {
    const Vec2 f = xi(x);
    Mat2 m;
    m.col(0) = f;
    m.col(1) = pauli::s2 * f;
    return m;
  };
  out.seed.u_x = [xi](double x) {
    const Vec2 d = xi.derivative(x);
    Mat2 m;
    m.col(0) = d;
    m.col(1) = pauli::s2 * d;
    return m;
  };
  out.seed.energies = {eps1, -eps1};
  return out;
}

struct AsymptoticIntertwiner {
  Mat2 w_minus;
  Mat2 w_plus;
  cplx c1, c2, c1_t, c2_t;
  double D_plus = 0.0, D_minus = 0.0;
};

/// Limits of UₓU⁻¹ at ±∞ from the constants c₁, c₂, c̃₁, c̃₂ and D±.
inline AsymptoticIntertwiner asymptotics(const Seed2x2& s) {
  AsymptoticIntertwiner out;
  const double i = s.im(), re = s.re(), k1 = s.kappa1, k2 = s.kappa2, ab = s.A() * s.B();
  const cplx a = s.params.a;
  out.c1 = i * i * re - I_unit * i * k2 * k2 - re * ab;
  out.c2 = I_unit * i * re + k2 * k2 + ab;
  out.c1_t = i * i * re + I_unit * i * k1 * k1 - re * ab;
  out.c2_t = -I_unit * i * re + k1 * k1 + ab;
  out.D_plus = ab + k1 * k2 - i * k1 + i * k2 - i * i;
  out.D_minus = ab + k1 * k2 + i * k1 - i * k2 - i * i;
  if (s.degenerate() && s.delta1 == s.delta2) {
    out.w_minus = out.w_plus = s.kernel_at(0.0, 0.0);
    return out;
  }
  const double scale = std::abs(ab) + k1 * k2 + i * i;
  if (std::abs(out.D_plus) < 1e-12 * scale || std::abs(out.D_minus) < 1e-12 * scale)
    throw Error(ErrorKind::degenerate_asymptotics, "D+ or D- vanishes");
  auto w = [&](double t, double d) {
    const cplx f11 = I_unit * out.c1 + k1 * out.c2 * t - I_unit * std::conj(a) * k2 * (i + k1 * t) * t;
    const cplx f22 = I_unit * out.c1_t + k2 * out.c2_t * t + I_unit * a * k1 * (i - k2 * t) * t;
    const cplx f12 = I_unit * s.B() * (k2 * k2 + i * k1 * t - k2 * (i + k1 * t) * t);
    const cplx f21 = I_unit * s.A() * (k1 * k1 + i * k1 * t - k2 * (i + k1 * t) * t);
    return Mat2(pauli::make(f11, f12, f21, f22) / d);
  };
  out.w_plus = w(1.0, out.D_plus);
  out.w_minus = w(-1.0, out.D_minus);
  return out;
}

struct AsymptoticActionCheck {
  double minus = 0.0;  // relative mismatch at −L
  double plus = 0.0;   // relative mismatch at +L
};

/// Propagates Lψ_E (ψ_E the free right-moving plane wave) with H̃ from 0 to
/// ±L and compares with e^{ikx}(ik − w±)u.
inline AsymptoticActionCheck asymptotic_action_check(const Transformed2x2& t, double e, double box = 30.0,
                                                     double step = 1e-3) {
  const Seed2x2& s = t.seed;
  const AsymptoticIntertwiner as = asymptotics(s);
  const PlaneWave pw = scattering_channel(e, s.params, 1);
  const Vec2 start = (I_unit * pw.k * pauli::s0 - s.kernel(0.0)) * pw.u;
  const DiracOperator<2> ht = t.op();
  AsymptoticActionCheck out;
  for (int side : {-1, 1}) {
    const double x = side * box;
    const Vec2 got = propagate(ht, e, 0.0, x, start, step);
    const Mat2& w = side < 0 ? as.w_minus : as.w_plus;
    const Vec2 want = std::exp(I_unit * pw.k * x) * (I_unit * pw.k * pauli::s0 - w) * pw.u;
    const double rel = (got - want).norm() / want.norm();
    (side < 0 ? out.minus : out.plus) = rel;
  }
  return out;
}

}  // namespace dirac_darboux
