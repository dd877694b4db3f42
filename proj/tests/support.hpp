#pragma once

#include <random>

#include "dirac_darboux/darboux2x2.hpp"

namespace dd_test {

using namespace dirac_darboux;

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20240611);
  return gen;
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline cplx random_cplx(double r) { return {uniform(-r, r), uniform(-r, r)}; }

template <int N>
Mat<N> random_matrix(double r = 1.0) {
  Mat<N> m;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) m(i, j) = random_cplx(r);
  return m;
}

template <int N>
Mat<N> random_hermitian(double r = 1.0) {
  const Mat<N> m = random_matrix<N>(r);
  return Mat<N>(0.5 * (m + m.adjoint()));
}

/// Free parameters with v > w and both seed energies strictly inside the band,
/// drawn from the region where the sufficient regularity condition holds.
struct SeedCase {
  FreeParams p;
  double eps1, eps2, delta1, delta2;
};

inline SeedCase random_regular_case() {
  for (;;) {
    const double w = uniform(-4.0, -1.0);
    const double v = uniform(1.0, 4.0);
    const double im = uniform(-0.8, 0.0);
    FreeParams p{v, w, cplx(uniform(-1.0, 1.0), im)};
    const Band b = band_edges(p);
    const double e2 = uniform(w + 0.2, v - 0.2);
    const double e1 = uniform(w + 0.2, v - 0.2);
    if (std::abs(e1 - e2) < 0.3 || e1 <= b.eps_minus || e2 >= b.eps_plus) continue;
    SeedCase c{p, e1, e2, uniform(-1.5, 1.5), uniform(-1.5, 1.5)};
    const Seed2x2 s = build_seed(p, e1, e2, c.delta1, c.delta2);
    if (regularity(s).sufficient_condition_holds) return c;
  }
}

}  // namespace dd_test
