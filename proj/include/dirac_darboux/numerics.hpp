#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"

namespace dirac_darboux {

using cplx = std::complex<double>;
inline constexpr cplx I_unit{0.0, 1.0};

template <int N>
concept SupportedDim = (N == 2 || N == 4);

template <int N>
  requires SupportedDim<N>
using Mat = Eigen::Matrix<cplx, N, N>;

template <int N>
  requires SupportedDim<N>
using Vec = Eigen::Matrix<cplx, N, 1>;

using Mat2 = Mat<2>;
using Mat4 = Mat<4>;
using Vec2 = Vec<2>;
using Vec4 = Vec<4>;

namespace pauli {

inline Mat2 make(cplx a, cplx b, cplx c, cplx d) {
  Mat2 m;
  m << a, b, c, d;
  return m;
}

inline const Mat2 s0 = make(1.0, 0.0, 0.0, 1.0);
inline const Mat2 s1 = make(0.0, 1.0, 1.0, 0.0);
inline const Mat2 s2 = make(0.0, -I_unit, I_unit, 0.0);
inline const Mat2 s3 = make(1.0, 0.0, 0.0, -1.0);
inline const Mat2 S1 = make(1.0, 0.0, 0.0, 0.0);
inline const Mat2 S2 = make(0.0, 0.0, 0.0, 1.0);

inline const Mat2& sigma(int i) {
  switch (i) {
    case 0: return s0;
    case 1: return s1;
    case 2: return s2;
    case 3: return s3;
  }
  throw Error(ErrorKind::invalid_input, "Pauli index must be 0..3");
}

}  // namespace pauli

/// Kronecker product A ⊗ B of two 2×2 matrices.
inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

inline Mat4 block_diag(const Mat2& top, const Mat2& bottom) {
  Mat4 out = Mat4::Zero();
  out.block<2, 2>(0, 0) = top;
  out.block<2, 2>(2, 2) = bottom;
  return out;
}

inline Vec4 stack(const Vec2& top, const Vec2& bottom) {
  Vec4 out;
  out << top, bottom;
  return out;
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Operator infinity norm (max row sum).
template <class Derived>
double op_norm_inf(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }
template <class Derived>
bool is_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

class Grid {
 public:
  Grid(double x_min, double x_max, int n_points) : x_min_(x_min), x_max_(x_max), n_(n_points) {
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < x_max))
      throw Error(ErrorKind::invalid_input, "grid requires finite x_min < x_max");
    if (n_points < 3 || n_points % 2 == 0)
      throw Error(ErrorKind::invalid_input, "grid n_points must be odd and >= 3");
  }

  static Grid standard() { return Grid(-30.0, 30.0, 6001); }

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  int size() const { return n_; }
  double step() const { return (x_max_ - x_min_) / (n_ - 1); }
  double operator[](int i) const { return i == n_ - 1 ? x_max_ : x_min_ + i * step(); }

  std::vector<double> points() const {
    std::vector<double> xs(n_);
    for (int i = 0; i < n_; ++i) xs[i] = (*this)[i];
    return xs;
  }

 private:
  double x_min_;
  double x_max_;
  int n_;
};

/// x ↦ complex N×N matrix with optional limits at ±∞.
template <int N>
struct MatrixField {
  std::function<Mat<N>(double)> eval;
  std::optional<Mat<N>> minus_inf;
  std::optional<Mat<N>> plus_inf;

  Mat<N> operator()(double x) const { return eval(x); }
  bool has_asymptotics() const { return minus_inf.has_value() && plus_inf.has_value(); }

  static MatrixField constant(const Mat<N>& m) { return {[m](double) { return m; }, m, m}; }
};

/// x ↦ complex N-vector, optionally with an exact derivative.
template <int N>
struct SpinorField {
  std::function<Vec<N>(double)> value;
  std::function<Vec<N>(double)> derivative;

  Vec<N> operator()(double x) const { return value(x); }
  bool has_derivative() const { return static_cast<bool>(derivative); }
};

/// Composite Simpson rule on uniformly spaced samples (odd count).
template <class T>
T simpson(std::span<const T> samples, double h) {
  const std::size_t n = samples.size();
  if (n < 3 || n % 2 == 0) throw Error(ErrorKind::invalid_input, "Simpson needs an odd number >= 3 of samples");
  T acc = samples[0] + samples[n - 1];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!is_finite(samples[i])) throw Error(ErrorKind::numerical_failure, "non-finite sample in quadrature");
    acc += (i % 2 == 1 ? 4.0 : 2.0) * samples[i];
  }
  if (!is_finite(acc)) throw Error(ErrorKind::numerical_failure, "non-finite sample in quadrature");
  return acc * (h / 3.0);
}

inline cplx simpson_integrate(const std::function<cplx(double)>& f, const Grid& grid) {
  std::vector<cplx> ys(grid.size());
  for (int i = 0; i < grid.size(); ++i) ys[i] = f(grid[i]);
  return simpson<cplx>(ys, grid.step());
}

/// 5-point central difference, O(h^4).
template <class F>
auto central_derivative(F&& f, double x, double h) {
  using T = std::decay_t<decltype(f(x))>;
  if (!(h > 0.0)) throw Error(ErrorKind::invalid_input, "derivative step must be positive");
  const T fm2 = f(x - 2.0 * h);
  const T fm1 = f(x - h);
  const T fp1 = f(x + h);
  const T fp2 = f(x + 2.0 * h);
  if (!is_finite(fm2) || !is_finite(fm1) || !is_finite(fp1) || !is_finite(fp2))
    throw Error(ErrorKind::numerical_failure, "non-finite sample in derivative stencil");
  T out = ((fm2 - fp2) + 8.0 * (fp1 - fm1)) / (12.0 * h);
  return out;
}

/// Inverse with a singularity guard |det M| > rel_threshold·‖M‖^N.
template <int N>
Mat<N> invert(const Mat<N>& m, double rel_threshold = 1e-12) {
  if (!m.allFinite()) throw Error(ErrorKind::numerical_failure, "non-finite matrix entry");
  const double det = std::abs(m.determinant());
  const double scale = std::pow(op_norm_inf(m), N);
  if (!(det > rel_threshold * scale)) throw Error(ErrorKind::singular_matrix, "matrix is numerically singular", det);
  return m.inverse();
}

/// Amplitude decay rates from a log-linear fit of the density over the
/// outer tails of the grid. Positive means decaying away from the origin.
struct TailDecay {
  double left = 0.0;
  double right = 0.0;
};

inline TailDecay tail_decay(std::span<const double> density, const Grid& grid, double fraction = 0.1) {
  const int n = grid.size();
  const int m = std::max(3, static_cast<int>(std::lround(fraction * n)));
  const double peak = *std::max_element(density.begin(), density.end());
  auto fit = [&](int first, int last) {
    double tail_peak = 0.0;
    for (int i = first; i < last; ++i) tail_peak = std::max(tail_peak, density[i]);
    // The tail sits at the underflow floor: certainly decayed.
    if (peak > 0.0 && tail_peak < 1e-200 * peak) return std::numeric_limits<double>::infinity();
    if (peak == 0.0) return std::numeric_limits<double>::infinity();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int cnt = last - first;
    for (int i = first; i < last; ++i) {
      const double x = grid[i];
      const double y = std::log(std::max(density[i], 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  };
  TailDecay out;
  const double left_slope = fit(0, m);
  const double right_slope = fit(n - m, n);
  out.left = std::isinf(left_slope) ? left_slope : 0.5 * left_slope;
  out.right = std::isinf(right_slope) ? right_slope : -0.5 * right_slope;
  return out;
}

}  // namespace dirac_darboux
