#pragma once

#include "relax/core.hpp"

#include <sstream>

namespace relax {

/// Full-space data of A u' = B(u,u) with equilibria u+ and u-.
struct ModelSystem {
  std::string name;
  int dim = 0;
  Mat A;
  Bilinear B;
  Mat v_perp;  // orthonormal columns spanning the kernel directions of Q'(u±)
  Vec u_plus, u_minus;
  Mat K_plus, K_minus;
  double delta_plus = 0, delta_minus = 0;
  double gamma_plus = 0, gamma_minus = 0;

  const Vec& equilibrium(bool plus) const { return plus ? u_plus : u_minus; }
  const Mat& compensator(bool plus) const { return plus ? K_plus : K_minus; }
  double delta(bool plus) const { return plus ? delta_plus : delta_minus; }
  double gamma(bool plus) const { return plus ? gamma_plus : gamma_minus; }
  Mat q_prime(bool plus) const { return B.derivative(equilibrium(plus)); }
};

inline void check_shapes(const ModelSystem& m) {
  require(m.dim > 0, "model: dim must be positive");
  require(m.A.rows() == m.dim && m.A.cols() == m.dim, "model: A must be dim x dim");
  require(m.B.out_dim == m.dim && m.B.in_dim == m.dim && static_cast<int>(m.B.slices.size()) == m.dim,
          "model: B must be dim x dim x dim");
  for (const auto& s : m.B.slices) require(s.rows() == m.dim && s.cols() == m.dim, "model: B slice shape");
  require(m.v_perp.rows() == m.dim, "model: v_perp_basis rows must equal dim");
  require(m.u_plus.size() == m.dim && m.u_minus.size() == m.dim, "model: equilibria must have length dim");
  require(m.K_plus.rows() == m.dim && m.K_plus.cols() == m.dim, "model: K_plus must be dim x dim");
  require(m.K_minus.rows() == m.dim && m.K_minus.cols() == m.dim, "model: K_minus must be dim x dim");
}

/// Orthonormal basis of V, the complement of span(v_perp). Built by
/// Gram-Schmidt on projected unit vectors so that V⊥ = span{e1} gives
/// (e2, ..., en) exactly.
inline Mat v_basis(const Mat& v_perp) {
  const int n = static_cast<int>(v_perp.rows());
  const int p = static_cast<int>(v_perp.cols());
  Mat basis(n, n - p);
  int k = 0;
  for (int i = 0; i < n && k < n - p; ++i) {
    Vec e = Vec::Unit(n, i);
    for (int pass = 0; pass < 2; ++pass) {
      e -= v_perp * (v_perp.transpose() * e);
      if (k) e -= basis.leftCols(k) * (basis.leftCols(k).transpose() * e);
    }
    double nrm = e.norm();
    if (nrm > 1e-8) basis.col(k++) = e / nrm;
  }
  if (k != n - p) throw NumericalError("v_basis: could not complete an orthonormal basis of V");
  return basis;
}

struct HypothesisEntry {
  std::string name;
  bool passed = false;
  double margin = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<HypothesisEntry> entries;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  const HypothesisEntry& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw InputError("no report entry " + name);
  }
};

/// lambda_min(sym(KA - T)) - gamma; the Kawashima condition holds iff >= 0.
inline double check_kawashima(const Mat& T, const Mat& A, const Mat& K, double gamma, double tol = kDefaultTol) {
  const auto n = T.rows();
  require(T.cols() == n && A.rows() == n && A.cols() == n && K.rows() == n && K.cols() == n,
          "check_kawashima: dimension mismatch");
  require((K + K.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, K.cwiseAbs().maxCoeff()),
          "check_kawashima: K is not skew-symmetric");
  return lambda_min_sym(K * A - T) - gamma;
}

inline Mat skew_from_params(const Vec& p, int n) {
  Mat K = Mat::Zero(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++k) {
      K(i, j) = p(k);
      K(j, i) = -p(k);
    }
  return K;
}

/// Coordinate ascent on lambda_min(sym(KA - T)) over the skew basis
/// E_ij - E_ji. Deterministic; returns the best K found.
inline Mat kawashima_search(const Mat& T, const Mat& A, double step = 1.0, double min_step = 1e-6) {
  const int n = static_cast<int>(A.rows());
  const int m = n * (n - 1) / 2;
  Vec p = Vec::Zero(m);
  double best = lambda_min_sym(-T);
  while (step > min_step) {
    bool improved = false;
    for (int k = 0; k < m; ++k)
      for (double s : {step, -step}) {
        Vec q = p;
        q(k) += s;
        double v = lambda_min_sym(skew_from_params(q, n) * A - T);
        if (v > best + 1e-14) {
          best = v;
          p = q;
          improved = true;
        }
      }
    if (!improved) step *= 0.5;
  }
  return skew_from_params(p, n);
}

namespace detail {
inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}
}  // namespace detail

inline ValidationReport validate_hypotheses(const ModelSystem& m, double tol = kDefaultTol) {
  check_shapes(m);
  const int n = m.dim;
  const int p = static_cast<int>(m.v_perp.cols());
  ValidationReport rep;

  {
    double a_sym = (m.A - m.A.transpose()).cwiseAbs().maxCoeff();
    double b_sym = m.B.asymmetry();
    double range = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        range = std::max(range, (m.v_perp.transpose() * m.B(Vec::Unit(n, i), Vec::Unit(n, j))).cwiseAbs().maxCoeff());
    double ortho = p ? (m.v_perp.transpose() * m.v_perp - Mat::Identity(p, p)).cwiseAbs().maxCoeff() : 0.0;
    double margin = std::min({tol - a_sym, tol - b_sym, tol - range, tol - ortho});
    bool proper = p >= 1 && p < n;
    rep.entries.push_back({"H1", proper && margin > 0, proper ? margin : -1.0,
                           "|A-A^T|=" + detail::fmt(a_sym) + " |B asym|=" + detail::fmt(b_sym) +
                               " |P_perp B|=" + detail::fmt(range) + " dim V_perp=" + std::to_string(p) +
                               " dim V=" + std::to_string(n - p)});
  }

  const Mat Vb = (p >= 1 && p < n) ? v_basis(m.v_perp) : Mat::Zero(n, 0);
  std::vector<HypothesisEntry> kaw;
  double h3 = std::numeric_limits<double>::infinity();
  std::string h3_detail;
  for (bool plus : {true, false}) {
    const std::string side = plus ? "+" : "-";
    const Mat T = m.q_prime(plus);
    double q_norm = m.B(m.equilibrium(plus), m.equilibrium(plus)).norm();
    double lam_v = Vb.cols() ? lambda_max_sym(Vb.transpose() * T * Vb) : 0.0;
    double h3_side = std::min(tol - q_norm, -lam_v - m.delta(plus));
    h3 = std::min(h3, h3_side);
    h3_detail += side + ": |Q(u)|=" + detail::fmt(q_norm) + " lambda_max(Q'_V)=" + detail::fmt(lam_v) + " ";

    double t_sym = (T - T.transpose()).cwiseAbs().maxCoeff();
    double ker = p ? (T * m.v_perp).cwiseAbs().maxCoeff() : 0.0;
    double inj = Vb.cols() ? sigma_min(Mat(T * Vb)) : 0.0;
    double m1 = std::min({tol - t_sym, tol - ker, inj - tol});
    kaw.push_back({"H2(i)" + side, m1 > 0, m1,
                   "|T-T^T|=" + detail::fmt(t_sym) + " |T V_perp|=" + detail::fmt(ker) + " sigma_min(T|V)=" +
                       detail::fmt(inj)});
    double m2 = -lam_v - m.delta(plus);
    kaw.push_back({"H2(ii)" + side, m2 >= 0, m2, "delta=" + detail::fmt(m.delta(plus))});
    double m3 = check_kawashima(T, m.A, m.compensator(plus), m.gamma(plus), 1e-8);
    kaw.push_back({"H2(iii)" + side, m3 >= 0, m3, "gamma=" + detail::fmt(m.gamma(plus))});
  }
  double h2 = std::numeric_limits<double>::infinity();
  bool h2_ok = true;
  for (const auto& e : kaw) {
    h2 = std::min(h2, e.margin);
    h2_ok = h2_ok && e.passed;
  }
  rep.entries.push_back({"H2", h2_ok, h2, "Kawashima condition at both equilibria"});
  rep.entries.push_back({"H3", h3 >= 0, h3, h3_detail});

  double smin_a = sigma_min(m.A);
  rep.entries.push_back({"H4", smin_a > tol, smin_a, "sigma_min(A)"});
  double smin_11 = p ? sigma_min(Mat(m.v_perp.transpose() * m.A * m.v_perp)) : 0.0;
  rep.entries.push_back({"H5", smin_11 > tol, smin_11, "sigma_min(A11)"});
  for (auto& e : kaw) rep.entries.push_back(std::move(e));
  return rep;
}

}  // namespace relax
