#include <catch_amalgamated.hpp>

#include <unsupported/Eigen/MatrixFunctions>

#include "dirac_darboux/reduce4x4.hpp"
#include "support.hpp"

using namespace dirac_darboux;
using Catch::Matchers::WithinAbs;

namespace {

const FreeParams kFig1{-2.0, 5.0, 0.0};
const Mat2 kGamma = -I_unit * pauli::s1;

// Smooth non-reflectionless barrier with a different band on each side.
DiracOperator<2> smooth_step(double height) {
  const Mat2 base = kFig1.potential();
  const Mat2 bump = pauli::make(1.0, 0.3, 0.3, -0.5);
  MatrixField<2> v{[base, bump, height](double x) { return Mat2(base + height * (1.0 + std::tanh(3.0 * x)) * bump); }, base,
                   Mat2(base + 2.0 * height * bump)};
  return {kGamma, v, true};
}

// Oracle: product of exact exponentials over midpoint slices.
Mat2 expm_transfer(const DiracOperator<2>& h, double e, double x0, double x1, int slices) {
  const Mat2 ginv = h.gamma.inverse();
  const double dx = (x1 - x0) / slices;
  Mat2 m = Mat2::Identity();
  for (int i = 0; i < slices; ++i) {
    const double xm = x0 + (i + 0.5) * dx;
    const Mat2 a = ginv * (e * Mat2::Identity() - h.potential(xm)) * dx;
    m = Mat2(a.exp()) * m;
  }
  return m;
}

// 2×2 reflection amplitude from a transfer matrix and the asymptotic channels.
cplx oracle_reflection(const DiracOperator<2>& h, double e, double l, int slices) {
  const Channels<2> lc = channels(h.gamma, *h.potential.minus_inf, e);
  const Channels<2> rc = channels(h.gamma, *h.potential.plus_inf, e);
  const Mat2 m = expm_transfer(h, e, -l, l, slices);
  Mat2 sys;
  sys.col(0) = rc.right[0].u;
  sys.col(1) = -m * lc.left[0].u;
  const Vec2 sol = sys.inverse() * (m * lc.right[0].u);
  return sol(1) * std::sqrt(std::abs(lc.left[0].flux / lc.right[0].flux));
}

}  // namespace

TEST_CASE("channels of the free operator outside the band") {
  const Channels<2> c = channels(kGamma, kFig1.potential(), 7.0);
  REQUIRE(c.right.size() == 1);
  REQUIRE(c.left.size() == 1);
  CHECK(c.evanescent == 0);
  CHECK(c.right[0].flux > 0.0);
  CHECK(c.left[0].flux < 0.0);
  const PlaneWave pw = scattering_channel(7.0, kFig1, 1);
  CHECK_THAT(c.right[0].k, WithinAbs(pw.k, 1e-12));
  const Channels<2> in_band = channels(kGamma, kFig1.potential(), 0.0);
  CHECK(in_band.evanescent == 2);
}

TEST_CASE("propagate reproduces a free plane wave") {
  const DiracOperator<2> h = free_operator({1.0, -1.0, cplx(0.3, 0.2)});
  const PlaneWave pw = scattering_channel(3.0, {1.0, -1.0, cplx(0.3, 0.2)}, 1);
  const Vec2 got = propagate(h, 3.0, 0.0, 5.0, pw.u, 1e-3);
  CHECK(max_abs(Vec2(got - std::exp(I_unit * pw.k * 5.0) * pw.u)) < 1e-8);
}

TEST_CASE("propagate follows a bound state through the barrier") {
  const Transformed2x2 t = transform(build_seed(kFig1, -1.0, 2.0));
  const auto states = bound_states(t);
  const SpinorField<2> psi = states[0].spinor;
  // Forward integration from the decaying tail is stable up to the core.
  const Vec2 got = propagate(t.op(), -1.0, -20.0, 2.0, psi(-20.0), 1e-3);
  CHECK(max_abs(Vec2(got - psi(2.0))) < 1e-6 * max_abs(psi(2.0)));
}

TEST_CASE("property: transfer matrices of Hermitian potentials have unit determinant modulus") {
  for (int trial = 0; trial < 8; ++trial) {
    const Mat2 a = dd_test::random_hermitian<2>(), b = dd_test::random_hermitian<2>();
    const DiracOperator<2> h{kGamma, {[a, b](double x) { return Mat2(a + std::exp(-x * x) * b); }, {}, {}}, true};
    const Mat2 m = transfer_matrix(h, dd_test::uniform(-3.0, 3.0), -4.0, 4.0, 1e-2);
    CHECK_THAT(std::abs(m.determinant()), WithinAbs(1.0, 1e-8));
  }
}

TEST_CASE("transfer matrix matches the exponential-product oracle") {
  const DiracOperator<2> h = smooth_step(0.8);
  const Mat2 rk = transfer_matrix(h, 7.5, -3.0, 3.0, 1e-3);
  const Mat2 ex = expm_transfer(h, 7.5, -3.0, 3.0, 20000);
  CHECK(max_abs(Mat2(rk - ex)) < 1e-6 * max_abs(ex));
}

TEST_CASE("free model is reflectionless with unit transmission") {
  for (double e : {-6.0, 7.0, 12.0}) {
    const ScatteringResult r = reflection_transmission(free_operator(kFig1), e);
    CHECK(std::abs(r.R) < 1e-12);
    CHECK_THAT(r.transmission, WithinAbs(1.0, 1e-9));
    CHECK(r.flux_defect < 1e-9);
  }
}

TEST_CASE("smooth step reflects and conserves flux") {
  const DiracOperator<2> h = smooth_step(0.6);
  const double e = 6.0;
  ScatterOptions opt;
  opt.box = 25.0;
  const ScatteringResult r = reflection_transmission(h, e, opt);
  CHECK(std::abs(r.R) > 1e-3);
  CHECK(r.flux_defect < 1e-9);
  const cplx want = oracle_reflection(h, e, 25.0, 40000);
  CHECK_THAT(std::abs(r.R), WithinAbs(std::abs(want), 1e-5));
}

TEST_CASE("fig1 transformed model is reflectionless at out-of-band energies") {
  const Transformed2x2 t = transform(build_seed(kFig1, -1.0, 2.0));
  for (double e : {-6.0, -4.5, -3.0, -2.5, 5.5, 6.0, 7.0, 10.0}) {
    CAPTURE(e);
    const ScatteringResult r = reflection_transmission(t.op(), e);
    CHECK(std::abs(r.R) < 1e-6);
    CHECK(r.flux_defect < 1e-6);
    CHECK_THAT(r.transmission, WithinAbs(1.0, 1e-6));
  }
}

TEST_CASE("fig3 distortion model is reflectionless at out-of-band energies") {
  const Seed2x2 s1 = build_seed({3.0, -2.0, cplx(0.0, 1.0)}, 1.25, 0.25, 1.0, -1.0);
  const Seed2x2 s2 = build_seed({2.5, -1.5, cplx(1.0, 0.0)}, 0.75, -0.5, 0.0, 0.0);
  const DistortionModel m = build_distortion_model(s1, s2, 0.0);
  for (double e : {-6.0, -4.0, -3.0, -2.5, 3.5, 4.0, 5.0, 7.0}) {
    CAPTURE(e);
    const ScatteringResult r = reflection_transmission(m.H_t, e);
    CHECK(std::abs(r.R) < 1e-6);
    CHECK(r.flux_defect < 1e-6);
  }
}

TEST_CASE("step halving shows fourth-order convergence of the reflection floor") {
  const DiracOperator<2> h = smooth_step(0.6);
  ScatterOptions opt;
  opt.box = 25.0;
  opt.step = 1e-3;
  const cplx ref = reflection_transmission(h, 6.0, opt).R;
  double prev = 0.0;
  for (double step : {0.1, 0.05, 0.025}) {
    opt.step = step;
    const double err = std::abs(reflection_transmission(h, 6.0, opt).R - ref);
    if (prev > 0.0) {
      CHECK(prev / err > 12.0);
      CHECK(prev / err < 20.0);
    }
    prev = err;
  }
}

TEST_CASE("scattering energies in or across the band are rejected") {
  const Transformed2x2 t = transform(build_seed(kFig1, -1.0, 2.0));
  try {
    reflection_transmission(t.op(), 0.5);
    FAIL("expected not-a-scattering-energy");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_a_scattering_energy);
  }
  // The step shrinks the band on the right: E = 4.7 propagates only there.
  try {
    reflection_transmission(smooth_step(0.6), 4.7);
    FAIL("expected one-sided-scattering");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::one_sided_scattering);
  }
}

TEST_CASE("auto box stops where the potential reaches its limits") {
  const Transformed2x2 t = transform(build_seed(kFig1, -1.0, 2.0));
  const double l = auto_box(t.field());
  CHECK(l < 30.0);
  CHECK(max_abs(Mat2(t.potential(l) - *t.field().plus_inf)) < 1e-10);
  const MatrixField<2> no_limits{[](double) { return Mat2::Zero().eval(); }, {}, {}};
  CHECK_THROWS_AS(auto_box(no_limits), Error);
}

TEST_CASE("bound_state_check separates bound from scattering states") {
  const Transformed2x2 t = transform(build_seed(kFig1, -1.0, 2.0));
  const auto states = bound_states(t);
  const BoundStateCheck good = bound_state_check(t.op(), -1.0, states[0].spinor, Grid::standard());
  CHECK(good.finite_norm);
  CHECK(good.residual < 1e-8);
  const BoundStateCheck wave = bound_state_check(free_operator(kFig1), 7.0, scattering_state(7.0, kFig1, 1), Grid::standard());
  CHECK_FALSE(wave.finite_norm);
  CHECK(wave.residual < 1e-8);
}
