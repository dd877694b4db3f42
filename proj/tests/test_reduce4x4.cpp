#include <catch_amalgamated.hpp>

#include "dirac_darboux/reduce4x4.hpp"
#include "support.hpp"

using namespace dirac_darboux;
using Catch::Matchers::WithinAbs;

namespace {

const Mat2 kGamma = -I_unit * pauli::s1;

struct Fig3 {
  Seed2x2 s1 = build_seed({3.0, -2.0, cplx(0.0, 1.0)}, 1.25, 0.25, 1.0, -1.0);
  Seed2x2 s2 = build_seed({2.5, -1.5, cplx(1.0, 0.0)}, 0.75, -0.5, 0.0, 0.0);
};

const DistortionModel& fig3_model() {
  static const DistortionModel m = [] {
    const Fig3 f;
    return build_distortion_model(f.s1, f.s2, 0.0);
  }();
  return m;
}

const SpinOrbitModel& soc_model() {
  static const SpinOrbitModel m = build_spinorbit_model(1.0, 0.6, LambdaMode::equal_to_v1_tilde);
  return m;
}

DiracOperator<2> block(const Mat2& v) { return {kGamma, MatrixField<2>::constant(v), true}; }

}  // namespace

TEST_CASE("property: reduction unitaries are unitary and map block gamma to the scheme gamma") {
  for (int trial = 0; trial < 10; ++trial) {
    const double alpha = dd_test::uniform(-3.0, 3.0);
    for (const ReductionScheme& s : {ReductionScheme::distortion(alpha), ReductionScheme::spin_orbit()}) {
      CHECK(max_abs(Mat4(s.unitary * s.unitary.adjoint() - Mat4::Identity())) < 1e-14);
      CHECK(max_abs(Mat4(s.conjugate_blocks(kGamma, kGamma) - s.gamma)) < 1e-14);
    }
  }
}

TEST_CASE("property: reduce inverts assemble") {
  for (int trial = 0; trial < 10; ++trial) {
    const double alpha = dd_test::uniform(-3.0, 3.0);
    const Mat2 a = dd_test::random_hermitian<2>(), b = dd_test::random_hermitian<2>();
    for (const ReductionScheme& s : {ReductionScheme::distortion(alpha), ReductionScheme::spin_orbit()}) {
      const ReducedPair r = reduce(s, assemble(s, block(a), block(b)), Grid(-1.0, 1.0, 5));
      CHECK(r.leakage < 1e-14);
      CHECK(max_abs(Mat2(r.h1.potential(0.0) - a)) < 1e-14);
      CHECK(max_abs(Mat2(r.h2.potential(0.0) - b)) < 1e-14);
    }
  }
}

TEST_CASE("reduce reports the leakage of a non-reducible operator") {
  const ReductionScheme s = ReductionScheme::distortion(0.0);
  const Mat4 v = s.unitary * kron(pauli::s1, pauli::s0) * s.unitary.adjoint();
  const DiracOperator<4> h{s.gamma, MatrixField<4>::constant(v), true};
  try {
    reduce(s, h, Grid(-1.0, 1.0, 5));
    FAIL("expected not-reducible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_reducible);
    REQUIRE(e.value());
    CHECK_THAT(*e.value(), WithinAbs(1.0, 1e-14));
  }
  CHECK_THROWS_AS(reduce(ReductionScheme::spin_orbit(), h, Grid(-1.0, 1.0, 5)), Error);
}

TEST_CASE("property: distortion component formulas equal direct conjugation") {
  for (int trial = 0; trial < 30; ++trial) {
    const double alpha = dd_test::uniform(-3.0, 3.0);
    const Mat2 a = dd_test::random_hermitian<2>(2.0), b = dd_test::random_hermitian<2>(2.0);
    const ReductionScheme s = ReductionScheme::distortion(alpha);
    const Mat4 direct = s.conjugate_blocks(a, b);
    const DistortionComponents c = DistortionComponents::from_blocks(a, b, alpha);
    CHECK(max_abs(Mat4(c.matrix() - direct)) < 1e-13);
    const DistortionComponents back = DistortionComponents::from_matrix(direct);
    CHECK(max_abs(Mat4(back.matrix() - direct)) < 1e-13);
    const DistortionComponents printed = DistortionComponents::printed_from_blocks(a, b, alpha);
    CHECK(std::abs(printed.W_A + c.W_A) < 1e-14);
    CHECK(std::abs(printed.W_plus + c.W_plus) < 1e-14);
  }
}

TEST_CASE("c_A and c_B read back the real amplitudes") {
  const double alpha = 0.7;
  DistortionComponents c;
  c.W_A = std::exp(-I_unit * alpha) * 1.3;
  c.W_B = std::exp(-I_unit * alpha) * -0.4;
  CHECK_THAT(c.c_A(alpha), WithinAbs(1.3, 1e-14));
  CHECK_THAT(c.c_B(alpha), WithinAbs(-0.4, 1e-14));
}

TEST_CASE("fig3 distortion model is Hermitian and reducible") {
  const DistortionModel& m = fig3_model();
  const Grid g = Grid::standard();
  CHECK(hermiticity_defect(m.H_t.potential, g) < 1e-10);
  CHECK(m.component_crosscheck < 1e-10);
  const ReducedPair r = reduce(m.scheme, m.H_t, g);
  for (double x : {-2.0, 0.0, 3.0}) {
    CHECK(max_abs(Mat2(r.h1.potential(x) - m.block1.potential(x))) < 1e-12);
    CHECK(max_abs(Mat2(r.h2.potential(x) - m.block2.potential(x))) < 1e-12);
  }
}

TEST_CASE("fig3 closed form matches the generic engine") {
  const DistortionModel& m = fig3_model();
  const DarbouxPair<4> pair = darboux(m.H, m.seed);
  const Grid g = Grid::standard();
  double worst = 0.0;
  for (int i = 0; i < g.size(); ++i) worst = std::max(worst, max_abs(Mat4(m.H_t.potential(g[i]) - pair.transformed.potential(g[i]))));
  CHECK(worst < 1e-8);
}

TEST_CASE("fig3 intertwining") {
  const DistortionModel& m = fig3_model();
  CHECK(intertwining_residual(m.H, m.H_t, m.intertwiner, default_test_spinors<4>(), Grid::standard()) < 1e-6);
}

TEST_CASE("fig3 relation suite") {
  const DistortionModel& m = fig3_model();
  for (double x : {-4.0, -0.5, 0.0, 1.0, 6.0}) {
    const DistortionComponents c = m.components(x);
    CHECK_THAT(c.V_B, WithinAbs(-c.V_A + 1.0, 1e-10));
    CHECK(std::abs(c.W_B - c.W_A) < 1e-10);
    CHECK(std::abs(c.V_prime + c.V) < 1e-10);
    // Measured offset is +1: the typeset "W⁻ = W⁺ − 1" has the opposite sign.
    CHECK(std::abs(c.W_minus - c.W_plus - 1.0) < 1e-10);
  }
  // Real parts of W⁺ and V are constant at α = 0.
  CHECK_THAT(m.components(-3.0).W_plus.real(), WithinAbs(m.components(2.0).W_plus.real(), 1e-12));
  CHECK_THAT(m.components(-3.0).V.real(), WithinAbs(m.components(2.0).V.real(), 1e-12));
}

TEST_CASE("fig3 has four bound states at the factorization energies") {
  const DistortionModel& m = fig3_model();
  const Grid g = Grid::standard();
  REQUIRE(m.bound_states.size() == 4);
  const double want[4] = {1.25, 0.25, 0.75, -0.5};
  for (int k = 0; k < 4; ++k) {
    const auto& b = m.bound_states[k];
    CHECK(b.energy == want[k]);
    CHECK(b.residual < 1e-8);
    std::vector<double> p;
    for (double x : g.points()) p.push_back(b.density(x));
    CHECK_THAT(simpson<double>(p, g.step()), WithinAbs(1.0, 5e-6));
  }
}

TEST_CASE("fig3 embedded states match the generic missing states") {
  const DistortionModel& m = fig3_model();
  const MissingStateSet<4> ms = missing_states(m.seed, m.H_t);
  for (int k = 0; k < 4; ++k) {
    CHECK(ms.states[k].finite_norm);
    for (double x : {-2.0, 0.0, 1.5}) CHECK_THAT(ms.states[k].field(x).squaredNorm(), WithinAbs(m.bound_states[k].density(x), 1e-10));
  }
}

TEST_CASE("spin-orbit closed form and phase") {
  CHECK_THAT(soc_v1_tilde(1.0, 0.6, 0.0), WithinAbs(0.2, 1e-15));
  CHECK_THAT(soc_v1_tilde(1.0, 0.6, 0.5), WithinAbs(0.289860, 1e-6));
  CHECK_THAT(soc_v1_tilde(1.0, 0.6, 1.3), WithinAbs(0.627779, 1e-6));
  const SpinOrbitModel& m = soc_model();
  for (double x : {-1.0, 0.0, 0.5, 2.0}) CHECK_THAT(m.v1_tilde(x), WithinAbs(soc_v1_tilde(1.0, 0.6, x), 1e-12));
  for (double x : {0.7, 2.0, -1.5}) {
    const Grid g(std::min(0.0, x), std::max(0.0, x), 2001);
    const double q = simpson_integrate([](double s) { return cplx(soc_v1_tilde(1.0, 0.6, s)); }, g).real();
    CHECK_THAT(soc_phase(1.0, 0.6, x), WithinAbs(x > 0 ? q : -q, 1e-10));
  }
}

TEST_CASE("spin-orbit transformed potential has the expected pattern") {
  const SpinOrbitModel& m = soc_model();
  for (double x : {-3.0, -0.2, 0.0, 1.1, 5.0}) {
    const Mat4 v = m.H_t.potential(x);
    CHECK(SpinOrbitComponents::pattern_defect(v) < 1e-12);
    CHECK(std::abs(v(0, 0) - v(3, 3)) < 1e-12);
    CHECK(std::abs(v(1, 1) - v(2, 2)) < 1e-12);
    const SpinOrbitComponents c = m.components(x);
    CHECK_THAT(c.lambda, WithinAbs(m.v1_tilde(x), 1e-12));
    CHECK(max_abs(Mat4(c.matrix() - v)) < 1e-12);
  }
}

TEST_CASE("spin-orbit partial intertwiner") {
  const SpinOrbitModel& m = soc_model();
  CHECK(intertwining_residual(m.H, m.H_t, m.intertwiner, default_test_spinors<4>(), Grid::standard()) < 1e-6);
}

TEST_CASE("spin-orbit bound states at plus and minus eps1") {
  const SpinOrbitModel& m = soc_model();
  REQUIRE(m.bound_states.size() == 2);
  CHECK(m.bound_states[0].energy == 0.6);
  CHECK(m.bound_states[1].energy == -0.6);
  for (const auto& b : m.bound_states) {
    CHECK(b.finite_norm);
    CHECK(b.residual < 1e-8);
  }
}

TEST_CASE("Klein solutions solve the second block") {
  const SpinOrbitModel& m = soc_model();
  const Grid g(-10.0, 10.0, 2001);
  for (double e : {-2.0, 0.3, 1.7}) {
    const SpinorField<2> chi = m.klein_solution(e, cplx(0.4, 0.1), cplx(-0.2, 0.9));
    CHECK(eigen_residual(m.h2, e, chi, g) < 1e-8);
    // Unit transmission: |χ| does not change across the barrier.
    const SpinorField<2> right = m.klein_solution(e, 1.0, 0.0);
    CHECK_THAT(right(-8.0).norm(), WithinAbs(right(8.0).norm(), 1e-12));
  }
}

TEST_CASE("block-1 eigenstates of the transformed spin-orbit operator") {
  const SpinOrbitModel& m = soc_model();
  for (double e : {-1.8, 0.2, 2.5}) CHECK(eigen_residual(m.H_t, e, m.block1_eigenstate(e), Grid(-8.0, 8.0, 801)) < 1e-7);
}

TEST_CASE("constant lambda mode and parameter validation") {
  const SpinOrbitModel m = build_spinorbit_model(1.0, 0.6, LambdaMode::constant, 0.3);
  CHECK_THAT(m.components(0.4).lambda, WithinAbs(0.3, 1e-14));
  CHECK_THROWS_AS(m.klein_solution(1.0, 1.0, 0.0), Error);
  for (double eps : {0.0, 1.0, 1.5, -0.2}) {
    try {
      build_spinorbit_model(1.0, eps, LambdaMode::constant, 0.0);
      FAIL("expected invalid-parameter");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_parameter);
    }
  }
}
