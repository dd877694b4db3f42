#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "darboux2x2.hpp"

namespace dirac_darboux {

enum class SchemeKind { distortion, spin_orbit };

struct ReductionScheme {
  SchemeKind kind;
  double alpha;
  Mat4 unitary;
  Mat4 gamma;

  static ReductionScheme distortion(double alpha) {
    const cplx em = std::exp(-I_unit * alpha), ep = std::exp(I_unit * alpha);
    Mat4 u;
    u << 0.0, 1.0, 0.0, -em,
         1.0, 0.0, -em, 0.0,
         0.0, -ep, 0.0, -1.0,
         ep, 0.0, 1.0, 0.0;
    return {SchemeKind::distortion, alpha, Mat4(u * (std::sqrt(2.0) / 2.0)), Mat4(-I_unit * kron(pauli::s3, pauli::s1))};
  }

  static ReductionScheme spin_orbit() {
    const double alpha = std::numbers::pi / 2.0;
    const cplx em = std::exp(-I_unit * alpha), ep = std::exp(I_unit * alpha);
    Mat4 u;
    u << 1.0, 0.0, -em, 0.0,
         0.0, 1.0, 0.0, -em,
         0.0, ep, 0.0, 1.0,
         ep, 0.0, 1.0, 0.0;
    return {SchemeKind::spin_orbit, alpha, Mat4(u * (std::sqrt(2.0) / 2.0)), Mat4(-I_unit * kron(pauli::s0, pauli::s1))};
  }

  Mat4 conjugate_blocks(const Mat2& top, const Mat2& bottom) const {
    return unitary * block_diag(top, bottom) * unitary.adjoint();
  }
  Vec4 embed(const Vec2& top, const Vec2& bottom) const { return unitary * stack(top, bottom); }
};

namespace detail {

inline void require_block(const DiracOperator<2>& h) {
  if (max_abs(Mat2(h.gamma + I_unit * pauli::s1)) > 1e-12)
    throw Error(ErrorKind::invalid_input, "block operators must have gamma = -i sigma_1");
}

}  // namespace detail

/// 𝒰(𝕊₁⊗h₁ + 𝕊₂⊗h₂)𝒰†.
inline DiracOperator<4> assemble(const ReductionScheme& scheme, const DiracOperator<2>& h1,
                                 const DiracOperator<2>& h2) {
  detail::require_block(h1);
  detail::require_block(h2);
  const auto v1 = h1.potential, v2 = h2.potential;
  MatrixField<4> v{[scheme, v1, v2](double x) { return scheme.conjugate_blocks(v1(x), v2(x)); }, {}, {}};
  if (v1.has_asymptotics() && v2.has_asymptotics()) {
    v.minus_inf = scheme.conjugate_blocks(*v1.minus_inf, *v2.minus_inf);
    v.plus_inf = scheme.conjugate_blocks(*v1.plus_inf, *v2.plus_inf);
  }
  return {scheme.gamma, v, h1.hermitian && h2.hermitian};
}

/// Entries of a distortion-type potential, positions as in the H_dis layout.
struct DistortionComponents {
  double V_A = 0.0, V_B = 0.0;
  cplx V = 0.0, V_prime = 0.0;
  cplx W_A = 0.0, W_B = 0.0, W_plus = 0.0, W_minus = 0.0;

  Mat4 matrix() const {
    Mat4 m;
    m << V_A, V, W_A, W_plus,
         std::conj(V), V_B, W_minus, W_B,
         std::conj(W_A), std::conj(W_minus), V_A, V_prime,
         std::conj(W_plus), std::conj(W_B), std::conj(V_prime), V_B;
    return m;
  }

  static DistortionComponents from_matrix(const Mat4& m) {
    return {m(0, 0).real(), m(1, 1).real(), m(0, 1), m(2, 3), m(0, 2), m(1, 3), m(0, 3), m(1, 2)};
  }

  /// Combination formulas in terms of the block entries (ṽ_j, w̃_j, ã_j).
  static DistortionComponents from_blocks(const Mat2& v1, const Mat2& v2, double alpha) {
    const cplx em = std::exp(-I_unit * alpha);
    const cplx a1 = v1(0, 1), a2 = v2(0, 1);
    DistortionComponents c;
    c.V_A = 0.5 * (v1(1, 1) + v2(1, 1)).real();
    c.V_B = 0.5 * (v1(0, 0) + v2(0, 0)).real();
    c.V = 0.5 * (std::conj(a1) + std::conj(a2));
    c.V_prime = -c.V;
    c.W_minus = -0.5 * em * (a1 - a2);
    c.W_A = -0.5 * em * (v1(1, 1) - v2(1, 1));
    c.W_B = 0.5 * em * (v1(0, 0) - v2(0, 0));
    c.W_plus = 0.5 * em * (std::conj(a1) - std::conj(a2));
    return c;
  }

  /// The same combinations with the overall signs of W⁻, W_A, W_B, W⁺ as typeset.
  static DistortionComponents printed_from_blocks(const Mat2& v1, const Mat2& v2, double alpha) {
    DistortionComponents c = from_blocks(v1, v2, alpha);
    c.W_minus = -c.W_minus;
    c.W_A = -c.W_A;
    c.W_B = -c.W_B;
    c.W_plus = -c.W_plus;
    return c;
  }

  double c_A(double alpha) const { return (std::exp(I_unit * alpha) * W_A).real(); }
  double c_B(double alpha) const { return (std::exp(I_unit * alpha) * W_B).real(); }
};

/// V, Δ, λ under the convention [[V+Δ,0,0,0],[0,V−Δ,iλ,0],[0,−iλ,V−Δ,0],[0,0,0,V+Δ]].
struct SpinOrbitComponents {
  double V = 0.0, Delta = 0.0, lambda = 0.0;

  Mat4 matrix() const {
    Mat4 m = Mat4::Zero();
    m(0, 0) = m(3, 3) = V + Delta;
    m(1, 1) = m(2, 2) = V - Delta;
    m(1, 2) = I_unit * lambda;
    m(2, 1) = -I_unit * lambda;
    return m;
  }

  static SpinOrbitComponents from_matrix(const Mat4& m) {
    const double p = m(0, 0).real(), q = m(1, 1).real();
    return {0.5 * (p + q), 0.5 * (p - q), m(1, 2).imag()};
  }

  /// Max deviation from the soc zero pattern and the equal-diagonal pairs.
  static double pattern_defect(const Mat4& m) {
    double d = 0.0;
    for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {0, 3}, {1, 3}, {2, 3}}) {
      d = std::max(d, std::abs(m(i, j)));
      d = std::max(d, std::abs(m(j, i)));
    }
    d = std::max(d, std::abs(m(0, 0) - m(3, 3)));
    d = std::max(d, std::abs(m(1, 1) - m(2, 2)));
    return d;
  }
};

struct ReducedPair {
  DiracOperator<2> h1;
  DiracOperator<2> h2;
  double leakage = 0.0;
};

/// 𝒰†H𝒰 split into blocks; the off-diagonal blocks must vanish on the grid.
inline ReducedPair reduce(const ReductionScheme& scheme, const DiracOperator<4>& h, const Grid& grid = Grid::standard(),
                          double tol = 1e-10) {
  if (max_abs(Mat4(h.gamma - scheme.gamma)) > 1e-12)
    throw Error(ErrorKind::invalid_input, "operator gamma does not match the reduction scheme");
  const Mat4 u = scheme.unitary;
  double leak = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const Mat4 b = u.adjoint() * h.potential(grid[i]) * u;
    leak = std::max(leak, std::max(max_abs(b.block<2, 2>(0, 2)), max_abs(b.block<2, 2>(2, 0))));
  }
  if (!(leak < tol)) throw Error(ErrorKind::not_reducible, "off-diagonal blocks do not vanish", leak);
  const auto v = h.potential;
  auto block = [u, v](int k) {
    MatrixField<2> f{[u, v, k](double x) { return Mat2((u.adjoint() * v(x) * u).block<2, 2>(2 * k, 2 * k)); }, {}, {}};
    if (v.has_asymptotics()) {
      f.minus_inf = (u.adjoint() * *v.minus_inf * u).block<2, 2>(2 * k, 2 * k);
      f.plus_inf = (u.adjoint() * *v.plus_inf * u).block<2, 2>(2 * k, 2 * k);
    }
    return f;
  };
  const Mat2 g = -I_unit * pauli::s1;
  return {{g, block(0), h.hermitian}, {g, block(1), h.hermitian}, leak};
}

/// A block of a reducible intertwiner: ∂ − W (Darboux) or the identity.
struct BlockIntertwiner {
  bool identity = false;
  MatrixField<2> kernel;

  static BlockIntertwiner darboux(MatrixField<2> w) { return {false, std::move(w)}; }
  static BlockIntertwiner unit() { return {true, MatrixField<2>::constant(Mat2::Zero())}; }
};

/// 𝒰(𝕊₁⊗L₁ + 𝕊₂⊗L₂)𝒰†.
inline FirstOrderOperator<4> reducible_intertwiner(const ReductionScheme& scheme, const BlockIntertwiner& l1,
                                                   const BlockIntertwiner& l2) {
  if (!l1.kernel.eval || !l2.kernel.eval) throw Error(ErrorKind::invalid_input, "block intertwiner has no kernel");
  const Mat2 lead1 = l1.identity ? Mat2(Mat2::Zero()) : Mat2(Mat2::Identity());
  const Mat2 lead2 = l2.identity ? Mat2(Mat2::Zero()) : Mat2(Mat2::Identity());
  auto zeroth = [](const BlockIntertwiner& l) {
    auto k = l.kernel;
    const bool id = l.identity;
    return std::function<Mat2(double)>([k, id](double x) { return id ? Mat2::Identity().eval() : Mat2(-k(x)); });
  };
  auto b1 = zeroth(l1), b2 = zeroth(l2);
  return {scheme.conjugate_blocks(lead1, lead2),
          {[scheme, b1, b2](double x) { return scheme.conjugate_blocks(b1(x), b2(x)); }, {}, {}}};
}

template <class T>
struct Relation {
  T lhs;
  T rhs;
};

struct DistortionModel {
  ReductionScheme scheme;
  Transformed2x2 block1;
  Transformed2x2 block2;
  DiracOperator<4> H;
  DiracOperator<4> H_t;
  SeedMatrix<4> seed;  // 𝒰·blockdiag(U₁, U₂): eigencolumns of H
  FirstOrderOperator<4> intertwiner;
  std::vector<BoundState<4>> bound_states;
  double component_crosscheck = 0.0;  // max |formula − direct conjugation| on the grid

  DistortionComponents components(double x) const { return DistortionComponents::from_matrix(H_t.potential(x)); }
};

namespace detail {

inline BoundState<4> embed_state(const ReductionScheme& scheme, const BoundState<2>& b, int block,
                                 const DiracOperator<4>& ht, const Grid& grid) {
  BoundState<4> out;
  out.energy = b.energy;
  auto s = b.spinor;
  out.spinor = {[scheme, s, block](double x) {
                  const Vec2 f = s(x);
                  return block == 0 ? scheme.embed(f, Vec2::Zero()) : scheme.embed(Vec2::Zero(), f);
                },
                {}};
  auto sp = out.spinor;
  out.density = [sp](double x) { return sp(x).squaredNorm(); };
  out.norm = b.norm;
  out.finite_norm = b.finite_norm;
  out.residual = eigen_residual(ht, out.energy, out.spinor, grid);
  return out;
}

}  // namespace detail

inline DistortionModel build_distortion_model(const Seed2x2& s1, const Seed2x2& s2, double alpha,
                                              const Grid& grid = Grid::standard()) {
  const ReductionScheme scheme = ReductionScheme::distortion(alpha);
  const Transformed2x2 t1 = transform(s1, grid);
  const Transformed2x2 t2 = transform(s2, grid);
  DistortionModel m{scheme, t1, t2,
                    assemble(scheme, free_operator(s1.params), free_operator(s2.params)),
                    assemble(scheme, t1.op(), t2.op()),
                    {}, {}, {}, 0.0};
  const Mat4 u = scheme.unitary;
  m.seed.u = [u, s1, s2](double x) { return Mat4(u * block_diag(s1.U(x), s2.U(x))); };
  m.seed.u_x = [u, s1, s2](double x) { return Mat4(u * block_diag(s1.U_x(x), s2.U_x(x))); };
  m.seed.energies = {s1.eps1, s1.eps2, s2.eps1, s2.eps2};
  m.intertwiner = reducible_intertwiner(scheme, BlockIntertwiner::darboux({[s1](double x) { return s1.kernel(x); }, {}, {}}),
                                        BlockIntertwiner::darboux({[s2](double x) { return s2.kernel(x); }, {}, {}}));
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    const Mat4 direct = m.H_t.potential(x);
    const Mat4 formula = DistortionComponents::from_blocks(t1.potential(x), t2.potential(x), alpha).matrix();
    m.component_crosscheck = std::max(m.component_crosscheck, max_abs(Mat4(direct - formula)));
  }
  if (!(m.component_crosscheck < 1e-10))
    throw Error(ErrorKind::numerical_failure, "component formulas disagree with direct conjugation",
                m.component_crosscheck);
  for (const auto& b : bound_states(t1, grid)) m.bound_states.push_back(detail::embed_state(scheme, b, 0, m.H_t, grid));
  for (const auto& b : bound_states(t2, grid)) m.bound_states.push_back(detail::embed_state(scheme, b, 1, m.H_t, grid));
  return m;
}

/// ṽ₁(x) = v₁ − 2κ²/(v₁ + ε₁ cosh 2κx), κ = √(v₁² − ε₁²).
inline double soc_v1_tilde(double v1, double eps1, double x) {
  const double k = std::sqrt(v1 * v1 - eps1 * eps1);
  return v1 - 2.0 * k * k / (v1 + eps1 * std::cosh(2.0 * k * x));
}

/// ∫₀ˣ ṽ₁ = v₁x − 2 artanh(√((v₁−ε₁)/(v₁+ε₁)) tanh κx).
inline double soc_phase(double v1, double eps1, double x) {
  const double k = std::sqrt(v1 * v1 - eps1 * eps1);
  return v1 * x - 2.0 * std::atanh(std::sqrt((v1 - eps1) / (v1 + eps1)) * std::tanh(k * x));
}

enum class LambdaMode { constant, equal_to_v1_tilde };

struct SpinOrbitModel {
  ReductionScheme scheme;
  Transformed2x2 block1;
  double v1 = 0.0, eps1 = 0.0;
  std::function<double(double)> lambda;
  DiracOperator<2> h1_t;
  DiracOperator<2> h2;
  DiracOperator<4> H;
  DiracOperator<4> H_t;
  FirstOrderOperator<4> intertwiner;  // partial: identity on the second block
  std::vector<BoundState<4>> bound_states;
  bool klein = false;

  SpinOrbitComponents components(double x) const { return SpinOrbitComponents::from_matrix(H_t.potential(x)); }
  double v1_tilde(double x) const { return block1.v_t(x); }

  /// 𝒰((1,0)ᵀ⊗ξ̃_E), ξ̃_E = L₁ψ_E, for E away from ±ε₁ (any λ).
  SpinorField<4> block1_eigenstate(double e) const {
    const SolutionPair sp = fundamental_solutions(e, block1.seed.params);
    const SpinorField<2> psi = sp.psi_field ? *sp.psi_field : *sp.psi_bar_field;
    const Seed2x2 s = block1.seed;
    const ReductionScheme u = scheme;
    return {[psi, s, u](double x) { return u.embed(Vec2(psi.derivative(x) - s.kernel(x) * psi(x)), Vec2::Zero()); }, {}};
  }

  /// Klein-case solutions of h₂: e^{−iσ₁Φ}(c₁e^{iEx}(1,1) + c₂e^{−iEx}(1,−1)).
  SpinorField<2> klein_solution(double e, cplx c1, cplx c2) const {
    if (!klein) throw Error(ErrorKind::invalid_input, "closed-form h2 solutions exist only for lambda = v1_tilde");
    const double v = v1, ep = eps1;
    return {[=](double x) {
              const double phi = soc_phase(v, ep, x);
              const Mat2 rot = std::cos(phi) * pauli::s0 - I_unit * std::sin(phi) * pauli::s1;
              const Vec2 free = c1 * std::exp(I_unit * e * x) * Vec2(1.0, 1.0) +
                                c2 * std::exp(-I_unit * e * x) * Vec2(1.0, -1.0);
              return Vec2(rot * free);
            },
            {}};
  }
};

inline SpinOrbitModel build_spinorbit_model(double v1, double eps1, LambdaMode mode, double lambda_value = 0.0,
                                            const Grid& grid = Grid::standard()) {
  if (!(eps1 > 0.0 && eps1 < v1))
    throw Error(ErrorKind::invalid_parameter, "eps1 must lie in (0, v1)");
  const ReductionScheme scheme = ReductionScheme::spin_orbit();
  const FreeParams p{v1, -v1, 0.0};
  const Transformed2x2 t = transform(build_seed(p, eps1, -eps1, 0.0, 0.0), grid);
  SpinOrbitModel m;
  m.scheme = scheme;
  m.block1 = t;
  m.v1 = v1;
  m.eps1 = eps1;
  m.klein = mode == LambdaMode::equal_to_v1_tilde;
  if (m.klein) {
    m.lambda = [t](double x) { return t.v_t(x); };
  } else {
    m.lambda = [lambda_value](double) { return lambda_value; };
  }
  m.h1_t = t.op();
  auto lam = m.lambda;
  MatrixField<2> v2{[t, lam](double x) {
                      const double w = t.v_t(x);
                      return Mat2(pauli::make(w, 0.0, 0.0, 2.0 * lam(x) - w));
                    },
                    {},
                    {}};
  const double wm = t.limit(-1).v_t, wp = t.limit(1).v_t;
  const double lm = m.klein ? wm : lambda_value, lp = m.klein ? wp : lambda_value;
  v2.minus_inf = pauli::make(wm, 0.0, 0.0, 2.0 * lm - wm);
  v2.plus_inf = pauli::make(wp, 0.0, 0.0, 2.0 * lp - wp);
  m.h2 = {Mat2(-I_unit * pauli::s1), v2, true};
  m.H = assemble(scheme, free_operator(p), m.h2);
  m.H_t = assemble(scheme, m.h1_t, m.h2);
  const Seed2x2 s = t.seed;
  m.intertwiner = reducible_intertwiner(
      scheme, BlockIntertwiner::darboux({[s](double x) { return s.kernel(x); }, {}, {}}), BlockIntertwiner::unit());
  for (const auto& b : bound_states(t, grid)) m.bound_states.push_back(detail::embed_state(scheme, b, 0, m.H_t, grid));
  return m;
}

}  // namespace dirac_darboux
