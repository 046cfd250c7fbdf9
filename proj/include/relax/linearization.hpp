#pragma once

#include "relax/reduction.hpp"

namespace relax {

/// For each eigenpair of A: 1 - max ‖P_{V⊥} w‖/‖w‖ over its eigenspace.
/// Eigenvalues closer than tol·‖A‖ share an eigenspace and a margin.
inline std::vector<double> kernel_vs_vperp(const ModelSystem& m, double tol = 1e-9) {
  check_shapes(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(m.A));
  const Vec& ev = es.eigenvalues();
  const int n = m.dim;
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<double> margins(n);
  for (int i = 0; i < n;) {
    int j = i + 1;
    while (j < n && ev(j) - ev(j - 1) <= tol * scale) ++j;
    Mat W = es.eigenvectors().middleCols(i, j - i);
    double c = op_norm(Mat(m.v_perp.transpose() * W));
    for (int k = i; k < j; ++k) margins[k] = 1.0 - c;
    i = j;
  }
  return margins;
}

inline Mat weighted_symbol_E(const ModelSystem& m, Side side, double eta) {
  bool plus = side == Side::plus;
  return m.q_prime(plus) + (plus ? eta : -eta) * m.A;
}

struct PerturbedKernelEntry {
  double s = 0.0;
  double sigma_min = 0.0;
  bool kernel_is_vperp = false;  // only meaningful at s = 0
  int kernel_dim = 0;
};

/// σ_min(Q'(u±) + sA) per s. At s = 0 the V-block σ_min is reported and the
/// kernel is compared with V⊥.
inline std::vector<PerturbedKernelEntry> perturbed_kernel_scan(const ModelSystem& m, Side side,
                                                               const std::vector<double>& s_values,
                                                               double tol = kDefaultTol) {
  check_shapes(m);
  const Mat T = m.q_prime(side == Side::plus);
  std::vector<PerturbedKernelEntry> out;
  for (double s : s_values) {
    PerturbedKernelEntry e;
    e.s = s;
    if (s == 0.0) {
      Mat Vb = v_basis(m.v_perp);
      e.sigma_min = sigma_min(Mat(Vb.transpose() * T * Vb));
      auto sv = Eigen::JacobiSVD<Mat>(T).singularValues();
      for (int k = 0; k < sv.size(); ++k) e.kernel_dim += sv(k) <= tol ? 1 : 0;
      e.kernel_is_vperp = e.kernel_dim == m.v_perp.cols() && (T * m.v_perp).cwiseAbs().maxCoeff() <= tol;
    } else {
      e.sigma_min = sigma_min(Mat(T + s * m.A));
    }
    out.push_back(e);
  }
  return out;
}

/// η₁ = (δ/2)(‖Ã‖ + 1)^{-1}, the radius guaranteed by the perturbation bound.
inline double analytic_eta1(const ModelSystem& m, Side side) {
  auto b = decompose(m, side);
  Mat schur = b.A22 + b.A21 * b.coupling();
  return 0.5 * m.delta(side == Side::plus) / (op_norm(schur) + 1.0);
}

/// Smallest |s| > 0 at which Q'(u±) + sA becomes singular, searched on a
/// geometric sweep up to s_max in both directions and refined by bisection.
/// Returns s_max if no failure is found.
inline double empirical_eta1(const ModelSystem& m, Side side, double s_max = 10.0, double tol = kDefaultTol) {
  const Mat T = m.q_prime(side == Side::plus);
  auto bad = [&](double s) { return sigma_min(Mat(T + s * m.A)) <= tol; };
  auto signed_min = [&](double s) {  // min eigenvalue magnitude with sign tracking
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(T + s * m.A), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  };
  double best = s_max;
  for (double dir : {1.0, -1.0}) {
    const int steps = 4000;
    double lo = 1e-6;
    Vec ev_lo = signed_min(dir * lo);
    for (int k = 1; k <= steps; ++k) {
      double hi = 1e-6 * std::pow(s_max / 1e-6, double(k) / steps);
      Vec ev_hi = signed_min(dir * hi);
      bool crossed = bad(dir * hi);
      for (int i = 0; i < ev_hi.size() && !crossed; ++i) crossed = (ev_lo(i) > 0) != (ev_hi(i) > 0);
      if (crossed) {
        double a = lo, b = hi;
        for (int it = 0; it < 100; ++it) {
          double mid = 0.5 * (a + b);
          Vec ev_mid = signed_min(dir * mid);
          bool c = bad(dir * mid);
          for (int i = 0; i < ev_mid.size() && !c; ++i) c = (ev_lo(i) > 0) != (ev_mid(i) > 0);
          (c ? b : a) = mid;
        }
        best = std::min(best, b);
        break;
      }
      lo = hi;
      ev_lo = ev_hi;
    }
  }
  return best;
}

/// η* estimate: min of the empirical kernel radius and δ/(2‖A‖).
inline double eta_star_estimate(const ModelSystem& m, Side side) {
  double d = m.delta(side == Side::plus) / (2.0 * op_norm(m.A));
  return std::min(empirical_eta1(m, side), d);
}

inline CMat linearization_symbol(const ModelSystem& m, Side side, double eta, double omega) {
  return cplx(0.0, 2.0 * kPi * omega) * m.A.cast<cplx>() - weighted_symbol_E(m, side, eta).cast<cplx>();
}

struct InvertibilityScan {
  Side side = Side::plus;
  double eta = 0.0;
  std::vector<double> omega_grid, sigma_min;
  double min_sigma = 0.0;
  double argmin_omega = 0.0;
  double sup_inverse_norm = 0.0;
  // tail regime |ω| >= 2c/γ with ‖L̂(ω)^{-1}‖ <= 1 + 2/γ
  double gamma = 0.0;
  double kawashima_margin = 0.0;
  double tail_c = 0.0;
  double tail_threshold = 0.0;
  double tail_inverse_bound = 0.0;
  bool tail_certified = false;
  bool grid_positive = false;
  bool passed = false;
};

inline InvertibilityScan scan_invertibility(const ModelSystem& m, Side side, double eta, double omega_max, int points,
                                            double tol = kDefaultTol) {
  check_shapes(m);
  require(points >= 3 && omega_max > 0, "scan_invertibility: need points >= 3 and omega_max > 0");
  require(eta >= 0.0, "scan_invertibility: eta must be non-negative");
  if (eta > 0.0 && eta >= eta_star_estimate(m, side))
    throw InputError("scan_invertibility: eta outside the certified range (0, eta*)");
  InvertibilityScan s;
  s.side = side;
  s.eta = eta;
  s.omega_grid.resize(points);
  s.sigma_min.resize(points);
  parallel_for(points, [&](int j) {
    double w = -omega_max + 2.0 * omega_max * j / (points - 1);
    if (points % 2 == 1 && j == points / 2) w = 0.0;
    s.omega_grid[j] = w;
    s.sigma_min[j] = sigma_min(linearization_symbol(m, side, eta, w));
  });
  s.min_sigma = std::numeric_limits<double>::infinity();
  for (int j = 0; j < points; ++j)
    if (s.sigma_min[j] < s.min_sigma) {
      s.min_sigma = s.sigma_min[j];
      s.argmin_omega = s.omega_grid[j];
    }
  s.grid_positive = s.min_sigma > tol;
  s.sup_inverse_norm = s.grid_positive ? 1.0 / s.min_sigma : std::numeric_limits<double>::infinity();

  const bool plus = side == Side::plus;
  s.gamma = std::min(m.gamma_plus, m.gamma_minus);
  const Mat& K = m.compensator(plus);
  const double knorm = op_norm(K);
  s.kawashima_margin = check_kawashima(m.q_prime(plus), m.A, K, s.gamma, 1e-8);
  const double enorm = op_norm(weighted_symbol_E(m, side, eta));
  s.tail_c = std::max((eta + knorm) / (2.0 * kPi), enorm * knorm / (2.0 * kPi));
  if (s.gamma > 0.0 && s.kawashima_margin >= 0.0 && knorm > 0.0) {
    s.tail_threshold = 2.0 * s.tail_c / s.gamma;
    s.tail_inverse_bound = 1.0 + 2.0 / s.gamma;
    s.tail_certified = s.tail_threshold <= omega_max;
  } else {
    s.tail_threshold = std::numeric_limits<double>::infinity();
    s.tail_inverse_bound = std::numeric_limits<double>::infinity();
  }
  s.passed = s.grid_positive && s.tail_certified;
  return s;
}

}  // namespace relax
