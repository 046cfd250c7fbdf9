#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace relax {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultTol = 1e-10;

/// Bad input (shape, range, name). Maps to CLI exit code 2.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A mathematical precondition or certificate failed. Maps to exit code 1.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

/// Symmetric bilinear map R^in x R^in -> R^out; slice k holds the matrix of
/// component k, so out_k = x^T slice[k] y.
struct Bilinear {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<Mat> slices;

  Bilinear() = default;
  Bilinear(int out, int in) : out_dim(out), in_dim(in), slices(out, Mat::Zero(in, in)) {}

  Vec operator()(const Vec& x, const Vec& y) const {
    Vec r(out_dim);
    for (int k = 0; k < out_dim; ++k) r(k) = x.dot(slices[k] * y);
    return r;
  }

  /// Matrix of h -> 2 B(u, h), the derivative of u -> B(u,u).
  Mat derivative(const Vec& u) const {
    Mat m(out_dim, in_dim);
    for (int k = 0; k < out_dim; ++k) m.row(k) = (slices[k].transpose() * u + slices[k] * u).transpose();
    return m;
  }

  double asymmetry() const {
    double a = 0.0;
    for (const auto& s : slices) a = std::max(a, (s - s.transpose()).cwiseAbs().maxCoeff());
    return a;
  }

  /// Upper bound for sup |B(x,y)| over unit x, y.
  double norm_bound() const {
    double s = 0.0;
    for (const auto& m : slices) {
      if (m.size() == 0) continue;
      double n = Eigen::JacobiSVD<Mat>(m).singularValues()(0);
      s += n * n;
    }
    return std::sqrt(s);
  }

  bool is_zero() const {
    for (const auto& m : slices)
      if (m.size() && m.cwiseAbs().maxCoeff() > 0.0) return false;
    return true;
  }
};

inline double sigma_min(const Mat& m) {
  if (m.size() == 0) return 0.0;
  auto sv = Eigen::JacobiSVD<Mat>(m).singularValues();
  return sv(sv.size() - 1);
}

inline double sigma_min(const CMat& m) {
  auto sv = Eigen::JacobiSVD<CMat>(m).singularValues();
  return sv(sv.size() - 1);
}

inline double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

inline double op_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<CMat>(m).singularValues()(0);
}

inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline double lambda_min_sym(const Mat& m) {
  return Eigen::SelfAdjointEigenSolver<Mat>(sym(m), Eigen::EigenvaluesOnly).eigenvalues()(0);
}

inline double lambda_max_sym(const Mat& m) {
  auto ev = Eigen::SelfAdjointEigenSolver<Mat>(sym(m), Eigen::EigenvaluesOnly).eigenvalues();
  return ev(ev.size() - 1);
}

/// phi_k(z) = sum_n z^n/(n+k)!, so phi_1 = (e^z-1)/z, phi_2 = (e^z-1-z)/z^2.
inline double phi1(double z) {
  if (std::abs(z) < 0.2) {
    double term = 1.0, sum = 1.0;
    for (int n = 1; n < 14; ++n) {
      term *= z / (n + 1);
      sum += term;
    }
    return sum;
  }
  return std::expm1(z) / z;
}

inline double phi2(double z) {
  if (std::abs(z) < 0.2) {
    double term = 0.5, sum = 0.5;
    for (int n = 1; n < 14; ++n) {
      term *= z / (n + 2);
      sum += term;
    }
    return sum;
  }
  return (std::expm1(z) - z) / (z * z);
}

/// Worker count: KM_THREADS if set, else hardware concurrency.
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KM_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) n = std::min(std::max(n, 1), cap);
  }
  return std::max(1, n);
}

/// Runs body(i) for i in [0,n) on up to worker_count() threads. Each index is
/// visited once; callers write to slot i only, which keeps results ordered.
inline void parallel_for(int n, const std::function<void(int)>& body) {
  int w = std::min(worker_count(), n);
  if (w <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(w);
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += w) body(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace relax
