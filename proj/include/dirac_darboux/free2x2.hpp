#pragma once

#include <cmath>
#include <optional>

#include "dirac_core.hpp"

namespace dirac_darboux {

/// Constant potential [[v, a], [a*, w]].
struct FreeParams {
  double v = 0.0;
  double w = 0.0;
  cplx a = 0.0;

  Mat2 potential() const { return pauli::make(v, a, std::conj(a), w); }
};

struct Band {
  double eps_minus;
  double eps_plus;
  bool contains(double e) const { return eps_minus < e && e < eps_plus; }
};

inline Band band_edges(const FreeParams& p) {
  const double im = p.a.imag();
  const double root = std::sqrt((p.v - p.w) * (p.v - p.w) + 4.0 * im * im);
  return {0.5 * (p.v + p.w - root), 0.5 * (p.v + p.w + root)};
}

inline double kappa_squared(double e, const FreeParams& p) {
  const double im = p.a.imag();
  return im * im - (p.v - e) * (p.w - e);
}

// Real and non-negative inside the band, i·ℝ₊ outside.
inline cplx kappa(double e, const FreeParams& p) {
  const double k2 = kappa_squared(e, p);
  return k2 >= 0.0 ? cplx(std::sqrt(k2), 0.0) : cplx(0.0, std::sqrt(-k2));
}

inline DiracOperator<2> free_operator(const FreeParams& p) {
  return {Mat2(-I_unit * pauli::s1), MatrixField<2>::constant(p.potential()), true};
}

namespace detail {

inline bool near_pole(double denom, double scale) { return std::abs(denom) <= 1e-14 * (1.0 + std::abs(scale)); }

}  // namespace detail

struct SolutionPair {
  double energy = 0.0;
  cplx kappa = 0.0;
  cplx delta = 0.0;
  std::optional<SpinorField<2>> psi_field;      // absent when E = w
  std::optional<SpinorField<2>> psi_bar_field;  // absent when E = v

  const SpinorField<2>& psi() const {
    if (!psi_field) throw Error(ErrorKind::pole_in_formula, "psi_E has a pole at E = w; use psi_bar");
    return *psi_field;
  }
  const SpinorField<2>& psi_bar() const {
    if (!psi_bar_field) throw Error(ErrorKind::pole_in_formula, "psi_bar_E has a pole at E = v; use psi");
    return *psi_bar_field;
  }
};

/// ψ_E and ψ̄_E of the free Hamiltonian, translated by x ↦ x + delta.
inline SolutionPair fundamental_solutions(double e, const FreeParams& p, cplx delta = 0.0) {
  SolutionPair out;
  out.energy = e;
  out.kappa = kappa(e, p);
  out.delta = delta;
  const cplx k = out.kappa;
  const double re = p.a.real();
  const double im = p.a.imag();
  if (!detail::near_pole(p.w - e, p.w)) {
    const double b = p.w - e;
    auto val = [=](double x) {
      const cplx y = x + delta;
      const cplx ph = std::exp(-I_unit * re * y);
      const cplx c = std::cosh(k * y), s = std::sinh(k * y);
      return Vec2(ph * c, ph * I_unit / b * (im * c + k * s));
    };
    auto der = [=](double x) {
      const cplx y = x + delta;
      const cplx ph = std::exp(-I_unit * re * y);
      const cplx c = std::cosh(k * y), s = std::sinh(k * y);
      const Vec2 v(ph * c, ph * I_unit / b * (im * c + k * s));
      const Vec2 dv(ph * k * s, ph * I_unit / b * (im * k * s + k * k * c));
      return Vec2(-I_unit * re * v + dv);
    };
    out.psi_field = SpinorField<2>{val, der};
  }
  if (!detail::near_pole(p.v - e, p.v)) {
    const double a = p.v - e;
    auto val = [=](double x) {
      const cplx y = x + delta;
      const cplx ph = std::exp(-I_unit * re * y);
      const cplx c = std::cosh(k * y), s = std::sinh(k * y);
      return Vec2(ph * I_unit / a * (-im * c + k * s), ph * c);
    };
    auto der = [=](double x) {
      const cplx y = x + delta;
      const cplx ph = std::exp(-I_unit * re * y);
      const cplx c = std::cosh(k * y), s = std::sinh(k * y);
      const Vec2 v(ph * I_unit / a * (-im * c + k * s), ph * c);
      const Vec2 dv(ph * I_unit / a * (-im * k * s + k * k * c), ph * k * s);
      return Vec2(-I_unit * re * v + dv);
    };
    out.psi_bar_field = SpinorField<2>{val, der};
  }
  if (!out.psi_field && !out.psi_bar_field)
    throw Error(ErrorKind::pole_in_formula, "both fundamental solutions are singular at this energy");
  return out;
}

/// e^{ikx}u with (kσ₁ + V − E)u = 0.
struct PlaneWave {
  double k;
  Vec2 u;
  SpinorField<2> field() const {
    const double kk = k;
    const Vec2 uu = u;
    return {[kk, uu](double x) { return Vec2(std::exp(I_unit * kk * x) * uu); },
            [kk, uu](double x) { return Vec2(I_unit * kk * std::exp(I_unit * kk * x) * uu); }};
  }
};

namespace detail {

// Unit null vector of a singular 2×2 matrix, phase fixed so the first
// non-negligible component is real positive.
inline Vec2 null_vector(const Mat2& m) {
  Vec2 a(-m(0, 1), m(0, 0));
  Vec2 b(m(1, 1), -m(1, 0));
  Vec2 u = a.norm() >= b.norm() ? a : b;
  if (u.norm() == 0.0) u = Vec2(1.0, 0.0);
  u.normalize();
  const int lead = std::abs(u(0)) > 1e-12 ? 0 : 1;
  u *= std::conj(u(lead)) / std::abs(u(lead));
  return u;
}

}  // namespace detail

/// Plane wave at E ∉ [ε₋, ε₊] whose group velocity has the sign of `direction`.
inline PlaneWave scattering_channel(double e, const FreeParams& p, int direction) {
  const Band band = band_edges(p);
  if (e >= band.eps_minus && e <= band.eps_plus)
    throw Error(ErrorKind::not_a_scattering_energy, "energy lies inside the closed band");
  if (direction != 1 && direction != -1) throw Error(ErrorKind::invalid_input, "direction must be +1 or -1");
  const double q = std::sqrt(-kappa_squared(e, p));
  for (double sign : {1.0, -1.0}) {
    const double k = -p.a.real() + sign * q;
    const Mat2 m = k * pauli::s1 + p.potential() - e * pauli::s0;
    const Vec2 u = detail::null_vector(m);
    const double velocity = (u.adjoint() * pauli::s1 * u)(0).real();
    if (velocity * direction > 0) return {k, u};
  }
  throw Error(ErrorKind::numerical_failure, "no plane wave with the requested direction");
}

inline SpinorField<2> scattering_state(double e, const FreeParams& p, int direction) {
  return scattering_channel(e, p, direction).field();
}

}  // namespace dirac_darboux
