#pragma once

#include "relax/core.hpp"

namespace relax {

enum class Frame { physical, spectral };

/// Samples of u and u' on the uniform grid τ_j = t0 + j dt; column j is
/// the sample at τ_j.
struct GridFunction {
  double t0 = 0.0;
  double dt = 1.0;
  Mat values;
  Mat derivs;
  Frame frame = Frame::physical;

  GridFunction() = default;
  GridFunction(int dim, int n, double t0_, double dt_)
      : t0(t0_), dt(dt_), values(Mat::Zero(dim, n)), derivs(Mat::Zero(dim, n)) {}

  int dim() const { return static_cast<int>(values.rows()); }
  int size() const { return static_cast<int>(values.cols()); }
  double tau(int j) const { return t0 + j * dt; }
  double t_end() const { return tau(size() - 1); }
  bool has_derivs() const { return derivs.rows() == values.rows() && derivs.cols() == values.cols(); }
};

inline int grid_points(double T, double dt) { return static_cast<int>(std::llround(T / dt)) + 1; }

template <class F, class DF>
GridFunction sample(int dim, double t0, double dt, int n, F&& f, DF&& df) {
  GridFunction g(dim, n, t0, dt);
  for (int j = 0; j < n; ++j) {
    g.values.col(j) = f(g.tau(j));
    g.derivs.col(j) = df(g.tau(j));
  }
  return g;
}

/// Trapezoidal (∫ e^{2ατ}|v(τ)|^2 dτ)^{1/2} over the grid.
inline double l2_alpha(const Mat& v, double t0, double dt, double alpha) {
  const auto n = v.cols();
  if (n < 2) return 0.0;
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
    s += w * std::exp(2.0 * alpha * (t0 + j * dt)) * v.col(j).squaredNorm();
  }
  return std::sqrt(s * dt);
}

inline double l2_alpha(const GridFunction& g, double alpha) { return l2_alpha(g.values, g.t0, g.dt, alpha); }

inline double h1_alpha(const GridFunction& g, double alpha) {
  require(g.has_derivs(), "h1_alpha: derivative channel missing");
  double a = l2_alpha(g.values, g.t0, g.dt, alpha);
  double b = l2_alpha(g.derivs, g.t0, g.dt, alpha);
  return std::sqrt(a * a + b * b);
}

inline double linf(const Mat& v) {
  double m = 0.0;
  for (Eigen::Index j = 0; j < v.cols(); ++j) m = std::max(m, v.col(j).norm());
  return m;
}

inline double linf(const GridFunction& g) { return linf(g.values); }

inline GridFunction operator-(const GridFunction& a, const GridFunction& b) {
  require(a.size() == b.size() && a.dim() == b.dim(), "grid difference: shape mismatch");
  GridFunction r = a;
  r.values -= b.values;
  if (a.has_derivs() && b.has_derivs()) r.derivs -= b.derivs;
  return r;
}

inline GridFunction operator+(const GridFunction& a, const GridFunction& b) {
  require(a.size() == b.size() && a.dim() == b.dim(), "grid sum: shape mismatch");
  GridFunction r = a;
  r.values += b.values;
  if (a.has_derivs() && b.has_derivs()) r.derivs += b.derivs;
  return r;
}

/// Columns [first, first+count) as a grid function starting at τ_first.
inline GridFunction slice(const GridFunction& g, int first, int count) {
  require(first >= 0 && count >= 0 && first + count <= g.size(), "slice: range out of bounds");
  GridFunction r;
  r.t0 = g.tau(first);
  r.dt = g.dt;
  r.frame = g.frame;
  r.values = g.values.middleCols(first, count);
  if (g.has_derivs()) r.derivs = g.derivs.middleCols(first, count);
  return r;
}

/// Membership in the closed H¹_α ball Ω_α(ε).
inline bool in_ball(const GridFunction& g, double alpha, double eps) { return h1_alpha(g, alpha) <= eps; }

}  // namespace relax
