#pragma once

#include "relax/reduction.hpp"

namespace relax {

/// S = Γ^{-1}E = U^{-1} diag(H) U with U = Q^T Ẽ, Ẽ = (-E)^{1/2} and
/// -Ẽ Γ^{-1} Ẽ = Q diag(H) Q^T. Modes sorted ascending in H, so the stable
/// modes (H < 0) come first.
struct SpectralData {
  Mat Gamma, E;
  Mat E_tilde;
  Mat U, U_inv;
  Vec H;
  Vec alpha;  // 1/H, the per-mode time constants
  std::vector<int> lambda_minus, lambda_plus;
  double nu = 0.0;
  Eigen::PartialPivLU<Mat> Gamma_lu, E_lu;

  int dim() const { return static_cast<int>(H.size()); }
  int n_stable() const { return static_cast<int>(lambda_minus.size()); }
  bool stable(int k) const { return H(k) < 0.0; }
};

struct DichotomyProjections {
  Mat P_s, P_u;
};

inline constexpr double kDichotomyGap = 1e-8;

inline SpectralData spectral_factorize(const ReducedSystem& r, double tol = kDefaultTol) {
  check_reduced(r, tol);
  SpectralData sd;
  sd.Gamma = r.Gamma;
  sd.E = r.E;
  sd.Gamma_lu.compute(r.Gamma);
  sd.E_lu.compute(r.E);
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(-r.E));
  if (es.eigenvalues().minCoeff() <= 0.0) throw NumericalError("spectral_factorize: E is not negative definite");
  const Mat& W = es.eigenvectors();
  sd.E_tilde = W * es.eigenvalues().cwiseSqrt().asDiagonal() * W.transpose();
  Mat M = -sd.E_tilde * sd.Gamma_lu.solve(sd.E_tilde);
  Eigen::SelfAdjointEigenSolver<Mat> ms(sym(M));
  const Mat& Q = ms.eigenvectors();
  sd.H = ms.eigenvalues();
  sd.U = Q.transpose() * sd.E_tilde;
  sd.U_inv = W * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * W.transpose() * Q;
  sd.alpha = sd.H.cwiseInverse();
  sd.nu = sd.H.cwiseAbs().minCoeff();
  if (sd.nu < kDichotomyGap) throw NumericalError("spectral_factorize: min|H| below dichotomy threshold");
  for (int k = 0; k < sd.dim(); ++k) (sd.H(k) < 0 ? sd.lambda_minus : sd.lambda_plus).push_back(k);
  return sd;
}

inline Mat mode_conjugate(const SpectralData& sd, const Vec& diag) { return sd.U_inv * diag.asDiagonal() * sd.U; }

inline DichotomyProjections projections(const SpectralData& sd) {
  Vec s = Vec::Zero(sd.dim()), u = Vec::Zero(sd.dim());
  for (int k : sd.lambda_minus) s(k) = 1.0;
  for (int k : sd.lambda_plus) u(k) = 1.0;
  return {mode_conjugate(sd, s), mode_conjugate(sd, u)};
}

inline Mat generator(const SpectralData& sd) { return mode_conjugate(sd, sd.H); }

/// G(τ) = T_s(τ)P_s for τ >= 0 and -T_u(-τ)P_u for τ < 0.
inline Mat green_function(const SpectralData& sd, double tau) {
  Vec g = Vec::Zero(sd.dim());
  for (int k = 0; k < sd.dim(); ++k) {
    if (tau >= 0.0 && sd.stable(k)) g(k) = std::exp(tau * sd.H(k));
    if (tau < 0.0 && !sd.stable(k)) g(k) = -std::exp(tau * sd.H(k));
  }
  return mode_conjugate(sd, g);
}

enum class Branch { stable, unstable };

/// T_s(τ)P_s x or T_u(τ)P_u x; both decay at rate ν for τ >= 0.
inline Vec semigroup_apply(const SpectralData& sd, double tau, const Vec& x, Branch side) {
  require(tau >= 0.0, "semigroup_apply: tau must be non-negative");
  require(x.size() == sd.dim(), "semigroup_apply: dimension mismatch");
  Vec w = sd.U * x;
  for (int k = 0; k < sd.dim(); ++k) {
    bool keep = (side == Branch::stable) == sd.stable(k);
    w(k) = keep ? w(k) * std::exp(-tau * std::abs(sd.H(k))) : 0.0;
  }
  return sd.U_inv * w;
}

inline double x_half_norm(const SpectralData& sd, const Vec& x) {
  return (sd.H.cwiseAbs().cwiseSqrt().asDiagonal() * (sd.U * x)).norm();
}

/// (2πiωΓ - E)^{-1}.
inline CMat resolvent(const ReducedSystem& r, double omega) {
  CMat M = cplx(0.0, 2.0 * kPi * omega) * r.Gamma.cast<cplx>() - r.E.cast<cplx>();
  Eigen::PartialPivLU<CMat> lu(M);
  if (sigma_min(M) < 1e-14 * std::max(1.0, op_norm(M))) throw NumericalError("resolvent: singular symbol");
  return lu.inverse();
}

/// R(2πiω, S) = (2πiωΓ - E)^{-1} Γ.
inline CMat resolvent_S(const ReducedSystem& r, double omega) { return resolvent(r, omega) * r.Gamma.cast<cplx>(); }

/// Operator norm of the resolvent kernel at lag t in the diagonal frame:
/// max over causal modes of |H| e^{-|H t|}.
inline double resolvent_kernel_norm(const SpectralData& sd, double t) {
  require(t != 0.0, "resolvent_kernel_norm: t must be nonzero");
  double best = 0.0;
  for (int k = 0; k < sd.dim(); ++k) {
    bool causal = t > 0 ? sd.stable(k) : !sd.stable(k);
    if (causal) best = std::max(best, std::abs(sd.H(k)) * std::exp(-std::abs(sd.H(k) * t)));
  }
  return best;
}

struct ResolventScan {
  std::vector<double> omega, norm_R, norm_R_times_Gamma;
  double grid_sup = 0.0;    // sup of (1+|ω|)‖R(2πiω,S)‖ on the grid
  double tail_bound = 0.0;  // bound of the same quantity for |ω| > Ω
  double constant = 0.0;    // max of the two
  bool tail_closed = false;
};

/// Grid sup of (1+|ω|)‖R(2πiω,S)‖ on [-Ω,Ω] plus the Neumann tail bound
/// ‖R_{Γ,E}(ω)‖ <= 1/(2π|ω|σ_min(Γ) - ‖E‖), valid where positive.
inline ResolventScan resolvent_scan(const ReducedSystem& r, double omega_max, int points) {
  require(points >= 2 && omega_max > 0, "resolvent_scan: need points >= 2 and omega_max > 0");
  ResolventScan s;
  s.omega.resize(points);
  s.norm_R.resize(points);
  s.norm_R_times_Gamma.resize(points);
  parallel_for(points, [&](int j) {
    double w = -omega_max + 2.0 * omega_max * j / (points - 1);
    CMat R = resolvent(r, w);
    s.omega[j] = w;
    s.norm_R[j] = op_norm(R);
    s.norm_R_times_Gamma[j] = op_norm(CMat(R * r.Gamma.cast<cplx>()));
  });
  for (int j = 0; j < points; ++j)
    s.grid_sup = std::max(s.grid_sup, (1.0 + std::abs(s.omega[j])) * s.norm_R_times_Gamma[j]);
  double denom = 2.0 * kPi * omega_max * sigma_min(r.Gamma) - op_norm(r.E);
  s.tail_closed = denom > 0.0;
  s.tail_bound = s.tail_closed ? (1.0 + omega_max) * op_norm(r.Gamma) / denom : std::numeric_limits<double>::infinity();
  s.constant = std::max(s.grid_sup, s.tail_bound);
  return s;
}

}  // namespace relax
