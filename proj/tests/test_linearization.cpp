#include "relax/catalog.hpp"
#include "relax/linearization.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace relax;

namespace {

// A diagonal model with V⊥ = span{e1}; Q' = 0 on V⊥ and -I on V.
ModelSystem diagonal_model(const Vec& diag) {
  const int n = static_cast<int>(diag.size());
  ModelSystem m;
  m.name = "diag";
  m.dim = n;
  m.A = diag.asDiagonal();
  m.B = Bilinear(n, n);
  for (int k = 1; k < n; ++k) {
    m.B.slices[k](0, k) = -0.5;
    m.B.slices[k](k, 0) = -0.5;
  }
  m.v_perp = Vec::Unit(n, 0);
  m.u_plus = m.u_minus = Vec::Unit(n, 0);
  m.K_plus = m.K_minus = Mat::Zero(n, n);
  m.delta_plus = m.delta_minus = 0.5;
  m.gamma_plus = m.gamma_minus = 0.1;
  return m;
}

}  // namespace

TEST(Linearization, Toy3KernelMargins) {
  auto mg = kernel_vs_vperp(toy3_model());
  ASSERT_EQ(mg.size(), 3u);
  const double r = std::sqrt(0.41);
  const double lm = (1.5 - r) / 2, lp = (1.5 + r) / 2;
  auto first = [](double l) { return 0.2 / std::hypot(0.2, l - 1.0); };
  EXPECT_NEAR(mg[0], 1.0, 1e-12);  // eigenvalue -0.3, eigenvector e3
  EXPECT_NEAR(mg[1], 1.0 - first(lm), 1e-12);
  EXPECT_NEAR(mg[2], 1.0 - first(lp), 1e-12);
  for (double x : mg) EXPECT_GT(x, 0.0);
}

TEST(Linearization, EigenvectorInsideVperpIsFlagged) {
  Vec d(3);
  d << 1.0, 2.0, 3.0;
  auto mg = kernel_vs_vperp(diagonal_model(d));
  EXPECT_NEAR(mg[0], 0.0, 1e-15);
  EXPECT_NEAR(mg[1], 1.0, 1e-15);
}

TEST(Linearization, DegenerateEigenspaceUsesSubspaceAngle) {
  auto mg = kernel_vs_vperp(diagonal_model(Vec::Ones(2)));
  EXPECT_NEAR(mg[0], 0.0, 1e-15);
  EXPECT_NEAR(mg[1], 0.0, 1e-15);
}

TEST(Linearization, PerturbedKernel) {
  auto m = toy3_model();
  auto scan = perturbed_kernel_scan(m, Side::plus, {0.0, 0.01, -0.01});
  EXPECT_TRUE(scan[0].kernel_is_vperp);
  EXPECT_EQ(scan[0].kernel_dim, 1);
  EXPECT_NEAR(scan[0].sigma_min, 1.0, 1e-14);
  for (int k : {1, 2}) {
    EXPECT_GT(scan[k].sigma_min, 0.0);
    Mat T = m.q_prime(true) + scan[k].s * m.A;
    EXPECT_NEAR(scan[k].sigma_min, Eigen::SelfAdjointEigenSolver<Mat>(T).eigenvalues().cwiseAbs().minCoeff(), 1e-14);
  }
}

TEST(Linearization, EmpiricalEta1DominatesAnalyticRadius) {
  for (const char* name : {"toy3", "dv-bgk"}) {
    auto m = std::get<ModelSystem>(builtin_model(name));
    for (Side s : {Side::plus, Side::minus}) {
      double analytic = analytic_eta1(m, s), emp = empirical_eta1(m, s);
      EXPECT_GT(analytic, 0.0);
      EXPECT_GE(emp, analytic) << name;
      EXPECT_GT(eta_star_estimate(m, s), 0.0);
    }
  }
  // toy3: ‖Ã‖ = 0.46, so the analytic radius is 0.25/1.46; T + sA is singular at s = 0.46 = 1/2.17
  auto m = toy3_model();
  EXPECT_NEAR(analytic_eta1(m, Side::plus), 0.25 / 1.46, 1e-12);
  double emp = empirical_eta1(m, Side::plus);
  EXPECT_LT(sigma_min(Mat(m.q_prime(true) + emp * m.A)), 1e-6);
  EXPECT_GT(sigma_min(Mat(m.q_prime(true) + 0.99 * emp * m.A)), 0.0);
}

TEST(Linearization, Toy3ScanPasses) {
  auto m = toy3_model();
  for (Side s : {Side::plus, Side::minus}) {
    auto scan = scan_invertibility(m, s, 0.01, 50.0, 2001);
    EXPECT_TRUE(scan.passed);
    EXPECT_TRUE(scan.grid_positive);
    EXPECT_TRUE(scan.tail_certified);
    EXPECT_EQ(scan.omega_grid.size(), 2001u);
    for (double x : scan.sigma_min) EXPECT_GT(x, 0.0);
    EXPECT_TRUE(std::isfinite(scan.sup_inverse_norm));
    EXPECT_NEAR(scan.sup_inverse_norm, 1.0 / scan.min_sigma, 0.0);
  }
}

TEST(Linearization, ZeroFrequencyMatchesPerturbedKernel) {
  auto m = toy3_model();
  auto scan = scan_invertibility(m, Side::plus, 0.01, 50.0, 2001);
  EXPECT_EQ(scan.omega_grid[1000], 0.0);
  auto pk = perturbed_kernel_scan(m, Side::plus, {0.01});
  EXPECT_NEAR(scan.sigma_min[1000], pk[0].sigma_min, 1e-14);
  auto minus = scan_invertibility(m, Side::minus, 0.01, 50.0, 2001);
  auto pkm = perturbed_kernel_scan(m, Side::minus, {-0.01});
  EXPECT_NEAR(minus.sigma_min[1000], pkm[0].sigma_min, 1e-14);
}

TEST(Linearization, ZeroWeightFailsOnlyAtZero) {
  for (const char* name : {"toy3", "dv-bgk"}) {
    auto m = std::get<ModelSystem>(builtin_model(name));
    auto scan = scan_invertibility(m, Side::plus, 0.0, 50.0, 2001);
    EXPECT_FALSE(scan.passed);
    EXPECT_FALSE(scan.grid_positive);
    EXPECT_EQ(scan.argmin_omega, 0.0);
    for (std::size_t j = 0; j < scan.omega_grid.size(); ++j) {
      if (scan.omega_grid[j] == 0.0) EXPECT_LT(scan.sigma_min[j], 1e-12);
      else EXPECT_GT(scan.sigma_min[j], 1e-6) << name << " omega=" << scan.omega_grid[j];
    }
  }
}

TEST(Linearization, TailBoundHoldsOnTheGrid) {
  for (const char* name : {"toy3", "dv-bgk"}) {
    auto m = std::get<ModelSystem>(builtin_model(name));
    auto scan = scan_invertibility(m, Side::plus, 0.01, 50.0, 2001);
    ASSERT_TRUE(scan.tail_certified) << name;
    EXPECT_NEAR(scan.tail_inverse_bound, 1.0 + 2.0 / scan.gamma, 1e-12);
    int checked = 0;
    for (std::size_t j = 0; j < scan.omega_grid.size(); ++j)
      if (std::abs(scan.omega_grid[j]) >= scan.tail_threshold) {
        EXPECT_LE(1.0 / scan.sigma_min[j], scan.tail_inverse_bound);
        ++checked;
      }
    EXPECT_GT(checked, 0);
  }
}

TEST(Linearization, NoCompensatorMeansNoTail) {
  auto m = toy3_model();
  m.K_plus.setZero();
  auto scan = scan_invertibility(m, Side::plus, 0.01, 50.0, 201);
  EXPECT_FALSE(scan.tail_certified);
  EXPECT_FALSE(scan.passed);
  EXPECT_TRUE(scan.grid_positive);
}

TEST(Linearization, ConjugateSymmetry) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-30, 30);
  auto m = toy3_model();
  for (int t = 0; t < 20; ++t) {
    double w = u(rng);
    CMat a = linearization_symbol(m, Side::plus, 0.01, w);
    CMat b = linearization_symbol(m, Side::plus, 0.01, -w);
    EXPECT_LE((a.adjoint() - b).norm(), 1e-12);
    EXPECT_NEAR(sigma_min(a), sigma_min(b), 1e-10);
  }
}

TEST(Linearization, FredholmEstimateOnV) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> g;
  for (const char* name : {"toy3", "dv-bgk"}) {
    auto m = std::get<ModelSystem>(builtin_model(name));
    for (Side s : {Side::plus, Side::minus}) {
      const double delta = m.delta(s == Side::plus);
      const double eta = 0.5 * delta / (2 * op_norm(m.A));
      auto b = decompose(m, s);
      CMat PV = b.P_V.cast<cplx>();
      for (double w : {-40.0, -1.0, 0.0, 0.3, 7.0}) {
        CMat L = linearization_symbol(m, s, eta, w);
        for (int t = 0; t < 10; ++t) {
          CVec u(m.dim);
          for (int i = 0; i < m.dim; ++i) u(i) = cplx(g(rng), g(rng));
          CVec pu = PV * u;
          EXPECT_GE((PV * L * pu).norm(), 0.5 * delta * pu.norm() * (1 - 1e-12)) << name;
        }
      }
    }
  }
}

TEST(Linearization, Guards) {
  auto m = toy3_model();
  EXPECT_THROW(scan_invertibility(m, Side::plus, 10.0, 50.0, 101), InputError);
  EXPECT_THROW(scan_invertibility(m, Side::plus, -0.1, 50.0, 101), InputError);
  EXPECT_THROW(scan_invertibility(m, Side::plus, 0.01, 50.0, 2), InputError);
}

TEST(Linearization, DvBgkScanPasses) {
  for (int N : {1, 3}) {
    auto m = dv_bgk_model(N, 1.0, 2.0);
    for (Side s : {Side::plus, Side::minus}) {
      double eta = 0.5 * eta_star_estimate(m, s);
      auto scan = scan_invertibility(m, s, std::min(eta, 0.01), 50.0, 1001);
      EXPECT_TRUE(scan.passed) << "N=" << N;
    }
  }
}
