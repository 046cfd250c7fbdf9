#pragma once

#include "relax/reduction.hpp"

#include <map>
#include <variant>

namespace relax {

using Params = std::map<std::string, double>;
using CatalogEntry = std::variant<ModelSystem, ReducedSystem>;

inline double param(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline int size_param(const Params& p, const std::string& key, int fallback) {
  double v = param(p, key, fallback);
  require(v >= 1 && v == std::floor(v), "catalog: " + key + " must be a positive integer");
  return static_cast<int>(v);
}

namespace detail {

inline void set_sym(Mat& s, int i, int j, double v) {
  s(i, j) = v;
  s(j, i) = v;
}

/// Maximizes λ_min(sym(εK₀A - T)) over ε >= 0 by golden section.
inline double best_scale(const Mat& K0, const Mat& A, const Mat& T, double hi) {
  auto f = [&](double e) { return lambda_min_sym(e * K0 * A - T); };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (f(c) > f(d)) b = d;
    else a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// dim 3, V⊥ = span{e1}, u± = e1 with Q'(e1) = diag(0,-1,-1).
inline ModelSystem toy3_model() {
  ModelSystem m;
  m.name = "toy3";
  m.dim = 3;
  m.A.resize(3, 3);
  m.A << 1.0, 0.2, 0.0, 0.2, 0.5, 0.0, 0.0, 0.0, -0.3;
  m.B = Bilinear(3, 3);
  detail::set_sym(m.B.slices[1], 0, 1, -0.5);
  detail::set_sym(m.B.slices[2], 0, 2, -0.5);
  detail::set_sym(m.B.slices[2], 1, 1, 0.3);
  detail::set_sym(m.B.slices[1], 2, 2, 0.2);
  detail::set_sym(m.B.slices[1], 1, 2, 0.1);
  m.v_perp = Vec::Unit(3, 0);
  m.u_plus = Vec::Unit(3, 0);
  m.u_minus = Vec::Unit(3, 0);
  Mat K = Mat::Zero(3, 3);
  K(0, 1) = 0.975609;
  K(1, 0) = -0.975609;
  m.K_plus = K;
  m.K_minus = K;
  m.delta_plus = m.delta_minus = 0.5;
  m.gamma_plus = m.gamma_minus = 0.05;
  return m;
}

/// Discrete-velocity BGK-type model: velocities 2^{-k} and -2^{-k}/2,
/// k < N; V⊥ = span{φ}, φ = (1,..,1)/√(2N); B(u,w) = -[(φ·u)P_V w + (φ·w)P_V u]/2
/// so Q(u) = -(φ·u) P_V u and Q'(ρφ) = -ρ P_V.
inline ModelSystem dv_bgk_model(int N, double rho_plus, double rho_minus) {
  require(N >= 1, "dv-bgk: N must be >= 1");
  require(rho_plus > 0 && rho_minus > 0, "dv-bgk: densities must be positive");
  const int d = 2 * N;
  ModelSystem m;
  m.name = "dv-bgk";
  m.dim = d;
  Vec xi(d);
  for (int k = 0; k < N; ++k) {
    xi(k) = std::pow(2.0, -k);
    xi(N + k) = -0.5 * std::pow(2.0, -k);
  }
  m.A = xi.asDiagonal();
  const Vec phi = Vec::Constant(d, 1.0 / std::sqrt(double(d)));
  const Mat PV = Mat::Identity(d, d) - phi * phi.transpose();
  m.B = Bilinear(d, d);
  for (int k = 0; k < d; ++k) m.B.slices[k] = -0.5 * (phi * PV.row(k) + PV.row(k).transpose() * phi.transpose());
  m.v_perp = phi;
  m.u_plus = rho_plus * phi;
  m.u_minus = rho_minus * phi;
  const Vec a = m.A * phi;
  const Mat K0 = phi * a.transpose() - a * phi.transpose();
  for (bool plus : {true, false}) {
    double rho = plus ? rho_plus : rho_minus;
    Mat T = -rho * PV;
    double eps = detail::best_scale(K0, m.A, T, 50.0 * rho);
    Mat K = eps * K0;
    double lam = lambda_min_sym(K * m.A - T);
    (plus ? m.K_plus : m.K_minus) = K;
    (plus ? m.gamma_plus : m.gamma_minus) = 0.5 * lam;
    (plus ? m.delta_plus : m.delta_minus) = 0.9 * rho;
  }
  return m;
}

/// Γ = ∓diag(e^{-n}), E = -I, D = 0. The sign "-" is the all-unstable
/// example with H_n = e^n; "+" gives the all-stable companion H_n = -e^n.
inline ReducedSystem example47_system(int N, bool stable = false) {
  require(N >= 1, "example47: N must be >= 1");
  ReducedSystem r;
  r.name = stable ? "example47-stable" : "example47";
  Vec g(N);
  for (int n = 1; n <= N; ++n) g(n - 1) = (stable ? 1.0 : -1.0) * std::exp(-double(n));
  r.Gamma = g.asDiagonal();
  r.E = -Mat::Identity(N, N);
  r.D = Bilinear(N, N);
  return r;
}

/// Γ = 1, E = -1, D(u,u) = q u².
inline ReducedSystem scalar_system(double q = 1.0) {
  ReducedSystem r;
  r.name = "scalar";
  r.Gamma = Mat::Identity(1, 1);
  r.E = -Mat::Identity(1, 1);
  r.D = Bilinear(1, 1);
  r.D.slices[0](0, 0) = q;
  return r;
}

/// Γ = diag(1,-1), E = -I, D(u,u) = (0, q u1²).
inline ReducedSystem saddle_system(double q = 0.0) {
  ReducedSystem r;
  r.name = "saddle";
  r.Gamma = Vec(Eigen::Vector2d(1.0, -1.0)).asDiagonal();
  r.E = -Mat::Identity(2, 2);
  r.D = Bilinear(2, 2);
  r.D.slices[1](0, 0) = q;
  return r;
}

/// Γ = diag(2^{-k}), E = -I, so H = (-2^k), k < K, all stable.
inline ReducedSystem geometric_system(int K) {
  require(K >= 1, "geometric: K must be >= 1");
  ReducedSystem r;
  r.name = "geometric";
  Vec g(K);
  for (int k = 0; k < K; ++k) g(k) = std::pow(2.0, -k);
  r.Gamma = g.asDiagonal();
  r.E = -Mat::Identity(K, K);
  r.D = Bilinear(K, K);
  return r;
}

inline const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names{"example47", "toy3",   "dv-bgk",   "example47-stable",
                                              "scalar",    "saddle", "geometric"};
  return names;
}

inline CatalogEntry builtin_model(const std::string& name, const Params& p = {}) {
  if (name == "toy3") return toy3_model();
  if (name == "dv-bgk")
    return dv_bgk_model(size_param(p, "N", 3), param(p, "rho_plus", 1.0), param(p, "rho_minus", 2.0));
  if (name == "example47") return example47_system(size_param(p, "N", 3), param(p, "stable", 0.0) != 0.0);
  if (name == "example47-stable") return example47_system(size_param(p, "N", 3), true);
  if (name == "scalar") return scalar_system(param(p, "q", 1.0));
  if (name == "saddle") return saddle_system(param(p, "q", 0.0));
  if (name == "geometric") return geometric_system(size_param(p, "K", 21));
  throw InputError("unknown catalog model '" + name + "'");
}

/// The reduced system of a catalog entry; full models are reduced on `side`.
inline ReducedSystem catalog_reduced(const std::string& name, const Params& p = {}, Side side = Side::plus) {
  CatalogEntry e = builtin_model(name, p);
  if (auto* m = std::get_if<ModelSystem>(&e)) return reduce(*m, side);
  return std::get<ReducedSystem>(e);
}

}  // namespace relax
