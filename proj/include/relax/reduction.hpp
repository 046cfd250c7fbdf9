#pragma once

#include "relax/model.hpp"

namespace relax {

enum class Side { plus, minus };

inline std::string to_string(Side s) { return s == Side::plus ? "plus" : "minus"; }

inline Side side_from_string(const std::string& s) {
  if (s == "plus" || s == "+") return Side::plus;
  if (s == "minus" || s == "-") return Side::minus;
  throw InputError("side must be plus or minus, got '" + s + "'");
}

/// Compressions of A and Q'(u±) to the orthogonal split V⊥ ⊕ V.
struct BlockDecomposition {
  Side side = Side::plus;
  Mat v_perp, v_basis;  // orthonormal bases of V⊥ and V
  Mat A11, A12, A21, A22;
  Mat Q11, Q12, Q22;  // Q11, Q12 vanish under (H3)
  Mat P_V, P_Vperp;
  double sigma_min_A11 = 0.0;
  Eigen::PartialPivLU<Mat> A11_lu;

  /// -A11^{-1} A12, the V⊥ component of lifted V vectors.
  Mat coupling() const { return -A11_lu.solve(A12); }
  /// dim x dim(V) matrix taking V coordinates to the full space.
  Mat lift_matrix() const { return v_perp * coupling() + v_basis; }
};

/// Reduced pair Γu' = Eu + D(u,u) on V.
struct ReducedSystem {
  std::string name;
  Mat Gamma;
  Mat E;
  Bilinear D;
  Side side = Side::plus;

  int dim() const { return static_cast<int>(Gamma.rows()); }
};

inline void check_reduced(const ReducedSystem& r, double tol = kDefaultTol) {
  const int n = r.dim();
  require(n > 0, "reduced system: empty");
  require(r.Gamma.cols() == n && r.E.rows() == n && r.E.cols() == n, "reduced system: Gamma/E shape mismatch");
  require(r.D.slices.empty() || (r.D.out_dim == n && r.D.in_dim == n), "reduced system: D shape mismatch");
  double gs = (r.Gamma - r.Gamma.transpose()).cwiseAbs().maxCoeff();
  if (gs > 1e-12 * std::max(1.0, r.Gamma.cwiseAbs().maxCoeff()))
    throw NumericalError("reduced system: Gamma not symmetric");
  if (sigma_min(r.Gamma) <= tol) throw NumericalError("reduced system: Gamma singular");
  if ((r.E - r.E.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, r.E.cwiseAbs().maxCoeff()))
    throw NumericalError("reduced system: E not symmetric");
  if (lambda_max_sym(r.E) >= -tol) throw NumericalError("reduced system: E not negative definite");
}

inline BlockDecomposition decompose(const ModelSystem& m, Side side, double tol = kDefaultTol) {
  check_shapes(m);
  const int p = static_cast<int>(m.v_perp.cols());
  require(p >= 1, "decompose: V⊥ = {0} is not allowed (V must be a proper subspace with dim V⊥ >= 1)");
  require(p < m.dim, "decompose: V = {0}");
  BlockDecomposition b;
  b.side = side;
  b.v_perp = m.v_perp;
  b.v_basis = v_basis(m.v_perp);
  const Mat& P = b.v_perp;
  const Mat& W = b.v_basis;
  b.A11 = P.transpose() * m.A * P;
  b.A12 = P.transpose() * m.A * W;
  b.A21 = W.transpose() * m.A * P;
  b.A22 = W.transpose() * m.A * W;
  const Mat Q = m.q_prime(side == Side::plus);
  b.Q11 = P.transpose() * Q * P;
  b.Q12 = P.transpose() * Q * W;
  b.Q22 = sym(W.transpose() * Q * W);
  b.P_Vperp = P * P.transpose();
  b.P_V = Mat::Identity(m.dim, m.dim) - b.P_Vperp;
  b.sigma_min_A11 = sigma_min(b.A11);
  if (b.sigma_min_A11 <= tol) throw NumericalError("decompose: A11 singular, (H5) violated");
  b.A11_lu.compute(b.A11);
  return b;
}

/// Schur complement Γ = A22 - A21 A11^{-1} A12, E = Q'22(u±) and
/// D(v,w) = P_V B(lift v, lift w) in V coordinates.
inline ReducedSystem schur_reduce(const BlockDecomposition& b, const Bilinear& B, Side side, double tol = kDefaultTol) {
  ReducedSystem r;
  r.side = side;
  r.Gamma = sym(b.A22 + b.A21 * b.coupling());
  r.E = b.Q22;
  const Mat L = b.lift_matrix();
  const int q = static_cast<int>(L.cols());
  r.D = Bilinear(q, q);
  for (int k = 0; k < q; ++k) {
    Mat s = Mat::Zero(q, q);
    for (int l = 0; l < B.out_dim; ++l) {
      double w = b.v_basis(l, k);
      if (w != 0.0) s += w * (L.transpose() * B.slices[l] * L);
    }
    r.D.slices[k] = sym(s);
  }
  if (sigma_min(r.Gamma) <= tol) throw NumericalError("schur_reduce: Gamma singular, reduced operator not one-to-one");
  return r;
}

inline ReducedSystem schur_reduce(const ReducedSystem& r) { return r; }

inline ReducedSystem reduce(const ModelSystem& m, Side side, double tol = kDefaultTol) {
  ReducedSystem r = schur_reduce(decompose(m, side, tol), m.B, side, tol);
  r.name = m.name;
  return r;
}

/// h ⊕ v with h = -A11^{-1} A12 v, in full-space coordinates.
inline Vec lift(const Vec& v, const BlockDecomposition& b) {
  require(v.size() == b.v_basis.cols(), "lift: dimension mismatch");
  return b.lift_matrix() * v;
}

}  // namespace relax
