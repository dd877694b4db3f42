#pragma once

#include <vector>

#include "reduce4x4.hpp"

namespace dirac_darboux {

struct BlockSeedParams {
  FreeParams block1;
  FreeParams block2;
  double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0, eps4 = 0.0;
  double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0, delta4 = 0.0;
  double delta3_bar = 0.0, delta4_bar = 0.0;
  bool coupled = true;  // false: U₃ ≡ 0
};

/// U = [[U₁, U₃], [0, U₂]] for H = 𝕊₁⊗h₁ + 𝕊₂⊗h₂. U₃ holds eigensolutions of
/// h₁ at ε₃, ε₄ so that H U = U diag(Λ₁, Λ₂).
struct BlockSeed {
  Seed2x2 s1;
  Seed2x2 s2;
  std::optional<Seed2x2> s3;

  Mat2 U3(double x) const { return s3 ? s3->U(x) : Mat2::Zero().eval(); }
  Mat2 U3_x(double x) const { return s3 ? s3->U_x(x) : Mat2::Zero().eval(); }

  Mat4 U(double x) const {
    Mat4 m = block_diag(s1.U(x), s2.U(x));
    m.block<2, 2>(0, 2) = U3(x);
    return m;
  }
  Mat4 U_x(double x) const {
    Mat4 m = block_diag(s1.U_x(x), s2.U_x(x));
    m.block<2, 2>(0, 2) = U3_x(x);
    return m;
  }

  /// [[U₁⁻¹, −U₁⁻¹U₃U₂⁻¹], [0, U₂⁻¹]].
  Mat4 U_inverse(double x) const {
    const Mat2 i1 = s1.U(x).inverse(), i2 = s2.U(x).inverse();
    Mat4 m = block_diag(i1, i2);
    m.block<2, 2>(0, 2) = -i1 * U3(x) * i2;
    return m;
  }

  /// U₃ₓU₂⁻¹ − (U₁ₓU₁⁻¹)U₃U₂⁻¹, the coupling block of UₓU⁻¹.
  Mat2 coupling_kernel(double x) const {
    if (!s3) return Mat2::Zero();
    const Mat2 i2 = s2.U(x).inverse();
    return Mat2(U3_x(x) * i2 - s1.kernel(x) * U3(x) * i2);
  }

  Mat4 kernel(double x) const {
    Mat4 m = block_diag(s1.kernel(x), s2.kernel(x));
    m.block<2, 2>(0, 2) = coupling_kernel(x);
    return m;
  }

  SeedMatrix<4> seed_matrix() const {
    const BlockSeed b = *this;
    SeedMatrix<4> out;
    out.u = [b](double x) { return b.U(x); };
    out.u_x = [b](double x) { return b.U_x(x); };
    out.energies = {s1.eps1, s1.eps2, s2.eps1, s2.eps2};
    return out;
  }
};

inline BlockSeed build_block_seed(const BlockSeedParams& p, const Grid& grid = Grid::standard()) {
  BlockSeed b{build_seed(p.block1, p.eps1, p.eps2, p.delta1, p.delta2),
              build_seed(p.block2, p.eps3, p.eps4, p.delta3, p.delta4), std::nullopt};
  for (const Seed2x2* s : {&b.s1, &b.s2}) {
    const Regularity r = regularity(*s, grid);
    if (r.node_detected)
      throw Error(ErrorKind::singular_seed, "block seed D(x) has a node near x = " + std::to_string(r.node_x),
                  r.node_x);
  }
  if (p.coupled) b.s3 = build_seed(p.block1, p.eps3, p.eps4, p.delta3_bar, p.delta4_bar);
  return b;
}

struct NonHermitianResult {
  DiracOperator<4> H;
  DiracOperator<4> H_t;
  MatrixField<2> upper_block;  // upper-right block of Ṽ − V
  double hermiticity_defect = 0.0;
  double lower_block_defect = 0.0;
  double diagonal_block_mismatch = 0.0;  // vs the 2×2 closed forms
  double span_residual = 0.0;            // coupling kernel off span{σ₀, σ₁}
  FirstOrderOperator<4> intertwiner;
};

inline NonHermitianResult nonreducible_transform(const BlockSeed& seed, const Grid& grid = Grid::standard()) {
  const Mat2 g2 = -I_unit * pauli::s1;
  const Mat4 gamma = -I_unit * kron(pauli::s0, pauli::s1);
  const FreeParams p1 = seed.s1.params, p2 = seed.s2.params;
  const Mat4 v0 = block_diag(p1.potential(), p2.potential());
  NonHermitianResult out;
  out.H = {gamma, MatrixField<4>::constant(v0), true};
  const Transformed2x2 t1{seed.s1}, t2{seed.s2};
  MatrixField<4> vt{[seed, v0, gamma](double x) {
                      const Mat4 w = seed.kernel(x);
                      return Mat4(v0 + gamma * w - w * gamma);
                    },
                    {},
                    {}};
  out.H_t = {gamma, vt, false};
  out.upper_block = {[seed, g2](double x) {
                       const Mat2 k = seed.coupling_kernel(x);
                       return Mat2(g2 * k - k * g2);
                     },
                     {},
                     {}};
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    const Mat4 v = vt(x);
    out.hermiticity_defect = std::max(out.hermiticity_defect, max_abs(Mat4(v - v.adjoint())));
    out.lower_block_defect = std::max(out.lower_block_defect, max_abs(v.block<2, 2>(2, 0)));
    out.diagonal_block_mismatch =
        std::max({out.diagonal_block_mismatch, max_abs(Mat2(v.block<2, 2>(0, 0) - t1.potential(x))),
                  max_abs(Mat2(v.block<2, 2>(2, 2) - t2.potential(x)))});
    const Mat2 k = seed.coupling_kernel(x);
    const cplx f0 = 0.5 * k.trace();
    const cplx f1 = 0.5 * (k * pauli::s1).trace();
    out.span_residual = std::max(out.span_residual, max_abs(Mat2(k - f0 * pauli::s0 - f1 * pauli::s1)));
  }
  out.H_t.hermitian = out.hermiticity_defect < 1e-10;
  MatrixField<4> w{[seed](double x) { return Mat4(-seed.kernel(x)); }, {}, {}};
  out.intertwiner = {Mat4::Identity(), w};
  return out;
}

template <int N>
struct AdjointMissingState {
  double energy = 0.0;
  SpinorField<N> spinor;  // normalized
  std::function<double(double)> density;
  double norm = 0.0;
  double residual = 0.0;  // ‖(H̃† − ε)Φ̄‖∞
  bool finite_norm = false;
};

struct AdjointMissingSet {
  std::vector<AdjointMissingState<4>> states;
};

/// Columns of (U⁻¹)† as eigenstates of H̃†.
inline AdjointMissingSet adjoint_missing_states(const BlockSeed& seed, const NonHermitianResult& result,
                                                const Grid& grid = Grid::standard()) {
  AdjointMissingSet out;
  const DiracOperator<4> adj = adjoint_operator(result.H_t);
  const double min_decay =
      0.5 * std::min({seed.s1.kappa1, seed.s1.kappa2, seed.s2.kappa1, seed.s2.kappa2});
  const std::array<double, 4> energies = {seed.s1.eps1, seed.s1.eps2, seed.s2.eps1, seed.s2.eps2};
  for (int k = 0; k < 4; ++k) {
    auto raw = [seed, k](double x) { return Vec4(seed.U_inverse(x).adjoint().col(k)); };
    std::vector<double> p(grid.size());
    for (int i = 0; i < grid.size(); ++i) p[i] = raw(grid[i]).squaredNorm();
    AdjointMissingState<4> st;
    st.energy = energies[k];
    st.norm = simpson<double>(p, grid.step());
    const TailDecay d = tail_decay(p, grid);
    st.finite_norm = d.left >= min_decay && d.right >= min_decay && st.norm > 0.0;
    const double scale = 1.0 / std::sqrt(st.norm);
    st.spinor = {[raw, scale](double x) { return Vec4(scale * raw(x)); }, {}};
    auto sp = st.spinor;
    st.density = [sp](double x) { return sp(x).squaredNorm(); };
    st.residual = eigen_residual(adj, st.energy, st.spinor, grid);
    out.states.push_back(std::move(st));
  }
  return out;
}

}  // namespace dirac_darboux
