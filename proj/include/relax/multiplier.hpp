#pragma once

#include "relax/grid.hpp"
#include "relax/spectral.hpp"

namespace relax {

/// Per-mode convolution with the Green kernel g_H: e^{tH} on t >= 0 if H < 0,
/// -e^{tH} on t < 0 if H > 0. The input y is piecewise linear between the
/// nodes and zero outside them; each step integrates the exponential exactly.
/// Nodes must be non-decreasing; a repeated node encodes a jump.
inline void green_convolve_nodes(double H, const std::vector<double>& nodes, const std::vector<double>& y,
                                 std::vector<double>& out) {
  const std::size_t n = nodes.size();
  out.assign(n, 0.0);
  if (n < 2) return;
  if (H < 0.0) {
    for (std::size_t j = 0; j + 1 < n; ++j) {
      double h = nodes[j + 1] - nodes[j];
      double z = h * H;
      double p1 = phi1(z), p2 = phi2(z);
      out[j + 1] = std::exp(z) * out[j] + h * ((p1 - p2) * y[j] + p2 * y[j + 1]);
    }
  } else {
    for (std::size_t j = n - 1; j-- > 0;) {
      double h = nodes[j + 1] - nodes[j];
      double z = -h * H;
      double p1 = phi1(z), p2 = phi2(z);
      out[j] = std::exp(z) * out[j + 1] - h * (p2 * y[j] + (p1 - p2) * y[j + 1]);
    }
  }
}

/// Same recurrence on a uniform grid for every row of Y; row k uses H(k).
inline Mat green_convolve(const Vec& H, const Mat& Y, double dt) {
  const int d = static_cast<int>(Y.rows());
  const int n = static_cast<int>(Y.cols());
  Mat out = Mat::Zero(d, n);
  if (n < 2) return out;
  for (int k = 0; k < d; ++k) {
    const double h = H(k);
    if (h < 0.0) {
      const double z = dt * h, e = std::exp(z), p1 = phi1(z), p2 = phi2(z);
      const double a = dt * (p1 - p2), b = dt * p2;
      double acc = 0.0;
      for (int j = 0; j + 1 < n; ++j) {
        acc = e * acc + a * Y(k, j) + b * Y(k, j + 1);
        out(k, j + 1) = acc;
      }
    } else {
      const double z = -dt * h, e = std::exp(z), p1 = phi1(z), p2 = phi2(z);
      const double a = dt * p2, b = dt * (p1 - p2);
      double acc = 0.0;
      for (int j = n - 1; j-- > 0;) {
        acc = e * acc - a * Y(k, j) - b * Y(k, j + 1);
        out(k, j) = acc;
      }
    }
  }
  return out;
}

/// Convolution with Φ(t,λ) = H e^{tH} (t>0, H<0), -H e^{tH} (t<0, H>0): the
/// scalar multiplier K̃ in the diagonal frame.
inline Mat phi_convolve(const Vec& H, const Mat& Y, double dt) { return H.asDiagonal() * green_convolve(H, Y, dt); }

inline void check_frame(const SpectralData& sd, const GridFunction& f) {
  require(f.frame == Frame::physical, "multiplier: expected a physical-frame grid function");
  require(f.dim() == sd.dim(), "multiplier: dimension mismatch");
  require(f.dt > 0.0, "multiplier: dt must be positive");
}

/// K f for data sampled on a uniform grid: g̃ = (U^T)^{-1} f, K̃ per mode,
/// then E^{-1} U^T back to the physical frame.
inline Mat apply_K_values(const SpectralData& sd, const Mat& F, double dt) {
  const Mat Ut = sd.U.transpose();
  Mat g = Ut.partialPivLu().solve(F);
  Mat y = phi_convolve(sd.H, g, dt);
  return sd.E_lu.solve(Ut * y);
}

/// K f with derivative channel from Γu' = Eu + f.
inline GridFunction apply_K(const ReducedSystem& r, const SpectralData& sd, const GridFunction& f) {
  require(r.dim() == sd.dim(), "apply_K: reduced/spectral mismatch");
  check_frame(sd, f);
  GridFunction u;
  u.t0 = f.t0;
  u.dt = f.dt;
  u.values = apply_K_values(sd, f.values, f.dt);
  u.derivs = sd.Gamma_lu.solve(sd.E * u.values + f.values);
  return u;
}

/// T_s(τ)P_s x on the grid, derivative S T_s(τ)P_s x.
inline GridFunction stable_orbit(const SpectralData& sd, const Vec& x, double t0, double dt, int n) {
  GridFunction g(sd.dim(), n, t0, dt);
  Vec w = sd.U * x;
  Mat wv = Mat::Zero(sd.dim(), n), wd = Mat::Zero(sd.dim(), n);
  for (int k : sd.lambda_minus)
    for (int j = 0; j < n; ++j) {
      double e = std::exp(sd.H(k) * (t0 + j * dt)) * w(k);
      wv(k, j) = e;
      wd(k, j) = sd.H(k) * e;
    }
  g.values = sd.U_inv * wv;
  g.derivs = sd.U_inv * wd;
  return g;
}

/// K_m f = (K f)|ℝ₊ - T_s(·)P_s E^{-1} f(0); derivative channel K(f').
inline GridFunction apply_Km(const ReducedSystem& r, const SpectralData& sd, const GridFunction& f) {
  require(r.dim() == sd.dim(), "apply_Km: reduced/spectral mismatch");
  check_frame(sd, f);
  require(f.has_derivs(), "apply_Km: derivative channel missing");
  require(std::abs(f.t0) < 1e-14, "apply_Km: grid must start at 0");
  Vec c = sd.E_lu.solve(Vec(f.values.col(0)));
  GridFunction corr = stable_orbit(sd, c, 0.0, f.dt, f.size());
  GridFunction u;
  u.t0 = 0.0;
  u.dt = f.dt;
  u.values = apply_K_values(sd, f.values, f.dt) - corr.values;
  u.derivs = apply_K_values(sd, f.derivs, f.dt);
  return u;
}

struct BoundaryValue {
  Vec km0;       // (K_m f)(0)
  Vec residual;  // P_s[(K_m f)(0) + P_s E^{-1} f(0)], zero when the boundary identity holds
};

inline BoundaryValue boundary_value_Km(const ReducedSystem& r, const SpectralData& sd, const GridFunction& f) {
  GridFunction km = apply_Km(r, sd, f);
  auto P = projections(sd);
  Vec km0 = km.values.col(0);
  Vec c = sd.E_lu.solve(Vec(f.values.col(0)));
  return {km0, P.P_s * (km0 + P.P_s * c)};
}

/// ∫_0^{τ_j} T_s(τ_j - s) P_s E^{-1} g(s) ds for g on the uniform grid, j = index.
inline Vec stable_duhamel(const SpectralData& sd, const Mat& g, double dt, int index) {
  require(index >= 0 && index < g.cols(), "stable_duhamel: index out of range");
  Mat h = sd.U * sd.E_lu.solve(g.leftCols(index + 1));
  Vec w = Vec::Zero(sd.dim());
  if (index > 0) {
    Vec Hs = sd.H;
    Mat stable_rows = Mat::Zero(sd.dim(), index + 1);
    for (int k : sd.lambda_minus) stable_rows.row(k) = h.row(k);
    Mat c = green_convolve(Hs, stable_rows, dt);
    for (int k : sd.lambda_minus) w(k) = c(k, index);
  }
  return sd.U_inv * w;
}

/// (G* * f)(τ) = ∫ G(τ-s)^T f(s) ds with the transposed Green kernel
/// G(t)^T = U^T g_H(t) U^{-T}. Since ΓG(t)Γ^{-1} = G(t)^T, this equals Γ K f.
inline Mat adjoint_green_convolve(const SpectralData& sd, const Mat& F, double dt) {
  Mat y = sd.U.transpose().partialPivLu().solve(F);
  return sd.U.transpose() * green_convolve(sd.H, y, dt);
}

/// sup-norm of K(ψf + ψ'(G* * f)) - ψ K f for scalar ψ with derivative.
inline double weight_commutator_residual(const ReducedSystem& r, const SpectralData& sd, const GridFunction& psi,
                                         const GridFunction& f) {
  require(psi.dim() == 1 && psi.has_derivs(), "weight_commutator_residual: psi must be scalar with derivative");
  require(psi.size() == f.size(), "weight_commutator_residual: grid mismatch");
  require(r.dim() == sd.dim(), "weight_commutator_residual: reduced/spectral mismatch");
  check_frame(sd, f);
  Mat kf = apply_K_values(sd, f.values, f.dt);
  Mat gs = adjoint_green_convolve(sd, f.values, f.dt);
  Mat arg = f.values * psi.values.row(0).asDiagonal();
  arg += gs * psi.derivs.row(0).asDiagonal();
  Mat lhs = apply_K_values(sd, arg, f.dt);
  Mat rhs = kf * psi.values.row(0).asDiagonal();
  return linf(Mat(lhs - rhs));
}

/// ψ_n(τ) = e^{α⟨τ⟩} φ_n(τ), with φ_n a smooth cutoff equal to 1 on |τ| <= n
/// and 0 on |τ| >= n+1.
inline GridFunction tapered_weight(double alpha, double n_cut, double t0, double dt, int n) {
  auto smooth = [](double x) {  // C^∞ step from 0 at x<=0 to 1 at x>=1
    auto f = [](double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; };
    auto df = [f](double t) { return t > 0 ? f(t) / (t * t) : 0.0; };
    double a = f(x), b = f(1 - x);
    double s = a / (a + b);
    double ds = (df(x) * b + a * df(1 - x)) / ((a + b) * (a + b));
    return std::pair{s, ds};
  };
  GridFunction g(1, n, t0, dt);
  for (int j = 0; j < n; ++j) {
    double t = g.tau(j);
    double br = std::sqrt(1 + t * t);
    double e = std::exp(alpha * br), de = alpha * t / br * e;
    auto [s, ds] = smooth(n_cut + 1 - std::abs(t));
    double sgn = t >= 0 ? 1.0 : -1.0;
    g.values(0, j) = e * s;
    g.derivs(0, j) = de * s - e * ds * sgn;
  }
  return g;
}

/// ‖G*f‖_{L²_α} / ‖f‖_{L²_α} measured in the energy norm |U x|² = <-E x, x>,
/// where each mode is a scalar convolution with L¹_α mass <= 1/(ν-α).
inline double weighted_convolution_bound(const SpectralData& sd, double alpha, const GridFunction& f) {
  require(alpha >= 0.0 && alpha < sd.nu, "weighted_convolution_bound: need 0 <= alpha < nu");
  check_frame(sd, f);
  Mat h = sd.U * f.values;
  double den = l2_alpha(h, f.t0, f.dt, alpha);
  if (den == 0.0) return 0.0;
  return l2_alpha(green_convolve(sd.H, h, f.dt), f.t0, f.dt, alpha) / den;
}

/// Bound on the part of the anticausal integral cut off at the window end,
/// evaluated at τ, assuming |f| beyond the window stays below its in-window sup.
inline double truncation_tail_bound(const SpectralData& sd, const GridFunction& f, double tau) {
  if (sd.lambda_plus.empty()) return 0.0;
  Mat h = sd.U * sd.Gamma_lu.solve(f.values);
  return op_norm(sd.U_inv) * std::exp(-sd.nu * (f.t_end() - tau)) * linf(h) / sd.nu;
}

enum class Example47Support {
  shifted,  // χ_[e^{-n}, e^{1-n}); the closed form e^{e^nτ}(e^{-1} - e^{-e}) holds exactly
  literal   // χ_[e^{-(n+1)}, e^{-n}); value at 0 is e^{-1/e} - e^{-1}
};

struct Example47Result {
  int N = 0;
  double dt = 0.0;
  double window = 0.0;  // e^{-(N+1)}
  int grid_points = 0;
  double bound = 0.0;  // √N (e^{-1} - e^{-e})
  double measured_sup = 0.0;
  double mode1_at_zero = 0.0;
  Example47Support support = Example47Support::shifted;
};

inline double example47_constant() { return std::exp(-1.0) - std::exp(-std::exp(1.0)); }

/// Applies K for Γ = diag(-e^{-n}), E = -I (U = I, H_n = e^n) to a family
/// of indicators and measures sup_τ ‖K g(τ)‖ over [0, e^{-(N+1)}].
inline Example47Result example47_lower_bound(int N, double dt, Example47Support support = Example47Support::shifted) {
  require(N >= 1, "example47: N must be >= 1");
  const double window = std::exp(-(N + 1.0));
  require(dt > 0.0, "example47: dt must be positive");
  require(dt <= window / 8.0 * (1 + 1e-12), "example47: grid too coarse, need dt <= e^{-(N+1)}/8");
  Example47Result res;
  res.N = N;
  res.dt = dt;
  res.window = window;
  res.support = support;
  res.bound = std::sqrt(static_cast<double>(N)) * example47_constant();

  std::vector<double> win;
  for (int j = 0; j * dt < window * (1 - 1e-12); ++j) win.push_back(j * dt);
  win.push_back(window);
  res.grid_points = static_cast<int>(win.size());

  std::vector<double> sq(win.size(), 0.0);
  for (int n = 1; n <= N; ++n) {
    double a = support == Example47Support::shifted ? std::exp(-double(n)) : std::exp(-(n + 1.0));
    double b = support == Example47Support::shifted ? std::exp(1.0 - n) : std::exp(-double(n));
    std::vector<double> nodes = win, y(win.size(), 0.0);
    for (auto [t, v] : {std::pair{a, 0.0}, {a, 1.0}, {b, 1.0}, {b, 0.0}}) {
      nodes.push_back(t);
      y.push_back(v);
    }
    std::vector<double> g;
    green_convolve_nodes(std::exp(double(n)), nodes, y, g);
    // physical K = -Φ* in this frame: K g = -H (g_H * g) = F_n * g with F_n = e^n e^{e^n τ}
    for (std::size_t j = 0; j < win.size(); ++j) {
      double v = -std::exp(double(n)) * g[j];
      sq[j] += v * v;
      if (n == 1 && j == 0) res.mode1_at_zero = v;
    }
  }
  for (double s : sq) res.measured_sup = std::max(res.measured_sup, std::sqrt(s));
  return res;
}

}  // namespace relax
