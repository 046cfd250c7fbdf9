#pragma once

#include "relax/multiplier.hpp"

#include <optional>
#include <random>

namespace relax {

struct SolverConfig {
  double alpha = 0.0;     // decay weight of H¹_α
  double nu_tilde = 0.0;  // target rate, alpha <= nu_tilde < nu
  double eps1 = 0.0;      // parameter ball radius in X_{1/2}
  double eps2 = 0.0;      // solution ball radius in H¹_α
  double T = 0.0;
  double dt = 0.0;
  int max_iter = 40;
  double fp_tol = 1e-10;
  double c = 0.0;          // measured constant behind the radii
  double c_eff = 0.0;      // c with the bilinear and embedding factors folded in
  double dt_error_estimate = 0.0;
  bool enforce_ball = true;

  int points() const { return grid_points(T, dt); }
};

struct ConstantsEstimate {
  double c = 0.0;
  double safety = 2.0;
  std::vector<double> alphas, km_norm, traj_norm;
  int samples = 0;
  std::uint64_t seed = 0;
};

/// (D(u,u), 2D(u,u')) sampled column by column.
inline GridFunction quadratic_term(const Bilinear& D, const GridFunction& u) {
  GridFunction f(u.dim(), u.size(), u.t0, u.dt);
  if (D.slices.empty()) return f;
  for (int k = 0; k < D.out_dim; ++k) {
    Mat Du = D.slices[k] * u.values;
    f.values.row(k) = u.values.cwiseProduct(Du).colwise().sum();
    f.derivs.row(k) = 2.0 * u.derivs.cwiseProduct(Du).colwise().sum();
  }
  return f;
}

/// A random H¹_α probe: three damped oscillations with decay rates above α.
inline GridFunction random_probe(int dim, double alpha, double nu, double dt, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GridFunction g(dim, n, 0.0, dt);
  for (int term = 0; term < 3; ++term) {
    Vec a(dim);
    for (int i = 0; i < dim; ++i) a(i) = normal(rng);
    double beta = alpha + nu * (0.2 + 2.8 * unif(rng));
    double om = 3.0 * nu * unif(rng);
    double ph = 2.0 * kPi * unif(rng);
    for (int j = 0; j < n; ++j) {
      double t = g.tau(j), e = std::exp(-beta * t);
      double c = std::cos(om * t + ph), s = std::sin(om * t + ph);
      g.values.col(j) += a * (e * c);
      g.derivs.col(j) += a * (e * (-beta * c - om * s));
    }
  }
  return g;
}

/// Random v0 in X_s with ‖v0‖_{X_{1/2}} = radius.
inline Vec random_stable_vector(const SpectralData& sd, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec w = Vec::Zero(sd.dim());
  for (int k : sd.lambda_minus) w(k) = normal(rng);
  if (sd.lambda_minus.empty()) return w;
  Vec v = sd.U_inv * w;
  double nrm = x_half_norm(sd, v);
  return nrm > 0 ? Vec(v * (radius / nrm)) : v;
}

/// Grid used for operator-norm probes: long enough that e^{(α-ν)T} is
/// negligible at the largest α, fine enough that |H| dt <= 0.1 on stable modes.
inline std::pair<double, double> probe_grid(const SpectralData& sd, double alpha_max) {
  double T = 12.0 / (sd.nu - alpha_max);
  double hmax = sd.nu;
  for (int k = 0; k < sd.dim(); ++k) hmax = std::max(hmax, std::abs(sd.H(k)));
  double dt = std::min(0.1 / hmax, T / 2000.0);
  dt = std::max(dt, T / 40000.0);
  return {T, dt};
}

/// c = safety × max over α of the probed norms of K_m on H¹_α and of
/// v0 -> T_s(·)v0 from X_{1/2} to H¹_α.
inline ConstantsEstimate estimate_constants(const ReducedSystem& r, const SpectralData& sd,
                                            const std::vector<double>& alpha_list, std::uint64_t seed = 20240611,
                                            int samples = 64, double safety = 2.0, double dt_override = 0.0) {
  require(!alpha_list.empty(), "estimate_constants: empty alpha list");
  double amax = 0.0;
  for (double a : alpha_list) {
    require(a >= 0.0 && a < sd.nu, "estimate_constants: alpha must lie in [0, nu)");
    amax = std::max(amax, a);
  }
  auto [T, dt] = probe_grid(sd, amax);
  if (dt_override > 0) dt = dt_override;
  const int n = grid_points(T, dt);
  ConstantsEstimate ce;
  ce.safety = safety;
  ce.samples = samples;
  ce.seed = seed;
  double worst = 0.0;
  for (std::size_t ia = 0; ia < alpha_list.size(); ++ia) {
    const double a = alpha_list[ia];
    std::vector<double> km(samples, 0.0), tr(samples, 0.0);
    std::vector<std::uint64_t> seeds(samples);
    std::mt19937_64 master(seed + 7919 * ia);
    for (auto& s : seeds) s = master();
    parallel_for(samples, [&](int i) {
      std::mt19937_64 rng(seeds[i]);
      GridFunction f = random_probe(sd.dim(), a, sd.nu, dt, n, rng);
      km[i] = h1_alpha(apply_Km(r, sd, f), a) / h1_alpha(f, a);
      if (sd.lambda_minus.empty()) return;
      Vec v0;
      if (i < sd.n_stable()) {
        v0 = sd.U_inv.col(sd.lambda_minus[i]);
      } else {
        v0 = random_stable_vector(sd, 1.0, rng);
      }
      tr[i] = h1_alpha(stable_orbit(sd, v0, 0.0, dt, n), a) / x_half_norm(sd, v0);
    });
    ce.alphas.push_back(a);
    ce.km_norm.push_back(*std::max_element(km.begin(), km.end()));
    ce.traj_norm.push_back(*std::max_element(tr.begin(), tr.end()));
    worst = std::max({worst, ce.km_norm.back(), ce.traj_norm.back()});
  }
  ce.c = safety * worst;
  return ce;
}

/// Constant of the embedding sup_τ e^{ατ}|f(τ)| <= c ‖f‖_{H¹_α} on ℝ₊.
inline double embedding_constant(double alpha) { return std::sqrt(1.0 + (1.0 + alpha) * (1.0 + alpha)); }

struct ConfigOptions {
  double alpha_frac = 0.5;     // α = alpha_frac·ν
  double nu_tilde_frac = 0.75;  // ν̃ = nu_tilde_frac·ν
  double fp_tol = 1e-10;
  int max_iter = 40;
  int max_points = 20001;
};

/// Radii from c ε₂ = 1/16 and c ε₁ = ε₂/2 with c replaced by
/// c·max(1, 3 c_emb ‖D‖), window from e^{-νT} <= fp_tol and dt from the
/// piecewise-linear error estimate.
inline SolverConfig make_config(const ReducedSystem& r, const SpectralData& sd, double c,
                                const ConfigOptions& opt = {}) {
  SolverConfig cfg;
  cfg.alpha = opt.alpha_frac * sd.nu;
  cfg.nu_tilde = opt.nu_tilde_frac * sd.nu;
  require(cfg.alpha <= cfg.nu_tilde && cfg.nu_tilde < sd.nu, "make_config: need alpha <= nu_tilde < nu");
  cfg.fp_tol = opt.fp_tol;
  cfg.max_iter = opt.max_iter;
  cfg.c = c;
  const double dnorm = r.D.slices.empty() ? 0.0 : r.D.norm_bound();
  cfg.c_eff = c * std::max(1.0, 3.0 * embedding_constant(cfg.alpha) * dnorm);
  cfg.eps2 = 1.0 / (16.0 * cfg.c_eff);
  cfg.eps1 = cfg.eps2 / (2.0 * cfg.c_eff);
  double hs = sd.nu;
  for (int k : sd.lambda_minus) hs = std::max(hs, std::abs(sd.H(k)));
  const double T = std::log(1.0 / cfg.fp_tol) / sd.nu;
  double curv = dnorm * std::pow(2.0 * hs * embedding_constant(cfg.alpha) * cfg.eps2, 2);
  double dt = curv > 0 ? std::sqrt(8.0 * cfg.fp_tol / 10.0 / curv) : 0.1 / hs;
  dt = std::min(dt, 0.1 / hs);
  dt = std::max(dt, T / (opt.max_points - 1));
  const int n = static_cast<int>(std::ceil(T / dt));
  cfg.dt = T / n;
  cfg.T = cfg.dt * n;
  cfg.dt_error_estimate = cfg.dt * cfg.dt / 8.0 * curv;
  return cfg;
}

/// Fixed window and step with radii left to the caller.
inline SolverConfig manual_config(double alpha, double nu_tilde, double eps1, double eps2, double T, double dt,
                                  double fp_tol = 1e-10, int max_iter = 40) {
  SolverConfig cfg;
  cfg.alpha = alpha;
  cfg.nu_tilde = nu_tilde;
  cfg.eps1 = eps1;
  cfg.eps2 = eps2;
  const int n = static_cast<int>(std::llround(T / dt));
  cfg.dt = dt;
  cfg.T = n * dt;
  cfg.fp_tol = fp_tol;
  cfg.max_iter = max_iter;
  return cfg;
}

struct ManifoldPoint {
  Vec v0, u0, J;
  GridFunction trajectory;
  int iterations = 0;
  double contraction_estimate = 0.0;
  std::vector<double> increments;
  double h1_alpha_norm = 0.0;
  double parametrization_residual = 0.0;  // |P_s u0 - v0 + P_s E^{-1} D(u0,u0)|
  bool in_ball = true;
};

/// Ψ(v0, u) = T_s(·)P_s v0 + K_m D(u,u), Picard-iterated from
/// u = T_s(·)P_s v0 unless another initial iterate is given.
inline ManifoldPoint solve_fixed_point(const ReducedSystem& r, const SpectralData& sd, const Vec& v0,
                                       const SolverConfig& cfg, const GridFunction* initial = nullptr) {
  require(v0.size() == sd.dim(), "solve_fixed_point: v0 dimension mismatch");
  require(cfg.dt > 0 && cfg.T > 0, "solve_fixed_point: invalid grid");
  const auto P = projections(sd);
  require((P.P_u * v0).norm() <= 1e-10 * (1.0 + v0.norm()), "solve_fixed_point: v0 must lie in X_s");
  const double vn = x_half_norm(sd, v0);
  if (cfg.enforce_ball && vn > cfg.eps1 * (1.0 + 1e-12))
    throw InputError("solve_fixed_point: v0 outside the parameter ball (|v0|=" + detail::fmt(vn) +
                     ", eps1=" + detail::fmt(cfg.eps1) + ")");
  const int n = cfg.points();
  const GridFunction base = stable_orbit(sd, P.P_s * v0, 0.0, cfg.dt, n);
  GridFunction u = base;
  if (initial) {
    require(initial->size() == n && initial->dim() == sd.dim() && initial->has_derivs(),
            "solve_fixed_point: initial iterate has the wrong shape");
    u = *initial;
  }
  ManifoldPoint mp;
  mp.v0 = v0;
  double prev = -1.0;
  bool converged = false;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    GridFunction next = base + apply_Km(r, sd, quadratic_term(r.D, u));
    double inc = h1_alpha(next - u, cfg.alpha);
    mp.increments.push_back(inc);
    if (prev > 0.0) mp.contraction_estimate = std::max(mp.contraction_estimate, inc / prev);
    prev = inc;
    u = std::move(next);
    mp.iterations = k;
    if (inc <= cfg.fp_tol) {
      converged = true;
      break;
    }
  }
  if (mp.contraction_estimate > 0.6)
    throw NumericalError("solve_fixed_point: contraction ratio " + detail::fmt(mp.contraction_estimate) +
                         " exceeds 0.6; radii inconsistent with the measured constant");
  if (!converged) throw NumericalError("solve_fixed_point: iteration cap reached");
  mp.trajectory = std::move(u);
  mp.u0 = mp.trajectory.values.col(0);
  Vec d0 = r.D.slices.empty() ? Vec::Zero(sd.dim()) : r.D(mp.u0, mp.u0);
  Vec corr = P.P_s * sd.E_lu.solve(d0);
  mp.J = P.P_u * mp.u0 - corr;
  mp.parametrization_residual = (P.P_s * mp.u0 - v0 + corr).norm();
  mp.h1_alpha_norm = h1_alpha(mp.trajectory, cfg.alpha);
  mp.in_ball = mp.h1_alpha_norm <= cfg.eps2 * (1.0 + 1e-12);
  return mp;
}

struct ChartPoint {
  ManifoldPoint point;
  Vec lifted;      // lift of u0 into the full space, the deviation w = u - u±
  Vec full_point;  // u± + lifted
};

inline ChartPoint manifold_chart(const ModelSystem& m, const BlockDecomposition& b, const ReducedSystem& r,
                                 const SpectralData& sd, const Vec& v0, const SolverConfig& cfg) {
  ChartPoint cp;
  cp.point = solve_fixed_point(r, sd, v0, cfg);
  cp.lifted = lift(cp.point.u0, b);
  cp.full_point = m.equilibrium(b.side == Side::plus) + cp.lifted;
  return cp;
}

/// Y_s(v0) = v0 - P_s E^{-1} D(ū(0;v0), ū(0;v0)) = P_s ū(0;v0).
inline Vec chart_parameter_map(const ReducedSystem& r, const SpectralData& sd, const Vec& v0, const SolverConfig& cfg) {
  ManifoldPoint mp = solve_fixed_point(r, sd, v0, cfg);
  return projections(sd).P_s * mp.u0;
}

struct GraphValue {
  Vec v0;     // solution of Y_s(v0) = v1
  Vec value;  // P_u ū(0; v0)
  int newton_iterations = 0;
  double residual = 0.0;
};

/// Solves Y_s(v0) = v1 with the identity as Jacobian, then returns P_u ū(0;v0).
inline GraphValue graph_map(const ReducedSystem& r, const SpectralData& sd, const Vec& v1, const SolverConfig& cfg,
                            double tol = 1e-12, int max_newton = 60) {
  const auto P = projections(sd);
  require(v1.size() == sd.dim(), "graph_map: dimension mismatch");
  require((P.P_u * v1).norm() <= 1e-10 * (1.0 + v1.norm()), "graph_map: v1 must lie in X_s");
  GraphValue g;
  g.v0 = v1;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_newton; ++k) {
    ManifoldPoint mp = solve_fixed_point(r, sd, g.v0, cfg);
    Vec res = v1 - P.P_s * mp.u0;
    g.residual = res.norm();
    g.newton_iterations = k;
    if (g.residual <= tol * (1.0 + v1.norm())) {
      g.value = P.P_u * mp.u0;
      return g;
    }
    if (g.residual > 0.9 * prev) throw NumericalError("graph_map: Newton iteration does not contract");
    prev = g.residual;
    g.v0 += res;
  }
  throw NumericalError("graph_map: Newton iteration cap reached");
}

struct InvarianceResult {
  Vec v1;
  double residual = 0.0;
};

/// v1 = T_s(τ0)v0 + ∫_0^{τ0} T_s(τ0-s) P_s E^{-1} (D(u,u))'(s) ds, then
/// ‖ū(·;v1) - ū(·+τ0;v0)‖_{H¹} on the common window.
inline InvarianceResult verify_invariance(const ReducedSystem& r, const SpectralData& sd, const ManifoldPoint& pt,
                                          double tau0, const SolverConfig& cfg) {
  const int j0 = static_cast<int>(std::llround(tau0 / cfg.dt));
  require(tau0 >= 0 && std::abs(j0 * cfg.dt - tau0) <= 1e-9 * std::max(1.0, tau0),
          "verify_invariance: tau0 must be a non-negative multiple of dt");
  require(j0 < pt.trajectory.size() - 1, "verify_invariance: tau0 beyond the window");
  InvarianceResult res;
  GridFunction f = quadratic_term(r.D, pt.trajectory);
  res.v1 = semigroup_apply(sd, tau0, pt.v0, Branch::stable) + stable_duhamel(sd, f.derivs, cfg.dt, j0);
  if (x_half_norm(sd, res.v1) > cfg.eps1 * (1.0 + 1e-12) && cfg.enforce_ball)
    throw NumericalError("verify_invariance: v1 leaves the parameter ball");
  ManifoldPoint q = solve_fixed_point(r, sd, res.v1, cfg);
  const int m = pt.trajectory.size() - j0;
  res.residual = h1_alpha(slice(q.trajectory, 0, m) - slice(pt.trajectory, j0, m), 0.0);
  return res;
}

inline std::vector<double> tangency_slope(const ReducedSystem& r, const SpectralData& sd, const Vec& direction,
                                          const std::vector<double>& radii, const SolverConfig& cfg) {
  double dn = x_half_norm(sd, direction);
  require(dn > 0, "tangency_slope: zero direction");
  Vec dir = direction / dn;
  std::vector<double> slopes;
  for (double t : radii) {
    require(t > 0 && t <= cfg.eps1 * (1 + 1e-12), "tangency_slope: radius outside the parameter ball");
    slopes.push_back(solve_fixed_point(r, sd, Vec(t * dir), cfg).J.norm() / t);
  }
  return slopes;
}

struct DecayFit {
  double rate = 0.0;
  double r2 = 0.0;
  double t_lo = 0.0, t_hi = 0.0;
  bool shrunk = false;
};

/// Least-squares slope of log|u(τ)| over [t_lo, t_hi]; rate = -slope.
inline DecayFit fit_decay_rate(const GridFunction& traj, double t_lo, double t_hi) {
  require(t_lo < t_hi, "fit_decay_rate: empty window");
  const double floor = 1e-280;
  std::vector<double> xs, ys;
  DecayFit fit;
  fit.t_lo = t_lo;
  for (int j = 0; j < traj.size(); ++j) {
    double t = traj.tau(j);
    if (t < t_lo - 1e-12) continue;
    if (t > t_hi + 1e-12) break;
    double nrm = traj.values.col(j).norm();
    if (nrm <= floor) {
      fit.shrunk = true;
      break;
    }
    xs.push_back(t);
    ys.push_back(std::log(nrm));
  }
  if (xs.size() < 3) throw NumericalError("fit_decay_rate: trajectory vanishes on the window");
  fit.t_hi = xs.back();
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  double slope = sxy / sxx;
  fit.rate = -slope;
  fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

/// ‖u - [T_s(·)P_s u(0) + K(D(u,u))]‖_{L²} on the window.
inline double residual_mild(const ReducedSystem& r, const SpectralData& sd, const GridFunction& traj) {
  const auto P = projections(sd);
  GridFunction base = stable_orbit(sd, P.P_s * traj.values.col(0), 0.0, traj.dt, traj.size());
  GridFunction f = quadratic_term(r.D, traj);
  Mat kf = apply_K_values(sd, f.values, traj.dt);
  return l2_alpha(Mat(traj.values - base.values - kf), traj.t0, traj.dt, 0.0);
}

/// τ -> -τ: the stable manifold of the result is the unstable manifold of r.
inline ReducedSystem reverse_time(const ReducedSystem& r) {
  ReducedSystem q = r;
  q.Gamma = -r.Gamma;
  return q;
}

}  // namespace relax
