#pragma once

#include "relax/io.hpp"
#include "relax/linearization.hpp"

#include <chrono>
#include <functional>

namespace relax {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string measured;  // measured values against thresholds, human readable
  Json data = Json::object();
  double seconds = 0.0;
};

/// quick: dt = 1e-2 where the criterion allows it and tolerances x10.
struct AcceptanceOptions {
  bool quick = false;
  std::uint64_t seed = 20240611;
  double tol_scale() const { return quick ? 10.0 : 1.0; }
};

namespace acceptance {

inline std::string num(double x) { return detail::fmt(x); }

inline CriterionResult criterion(int id, std::string name) {
  CriterionResult c;
  c.id = id;
  c.name = std::move(name);
  return c;
}

inline CriterionResult example47(const AcceptanceOptions&) {
  auto c = criterion(1, "example47 L-infinity lower bound");
  bool ok = true;
  std::string m;
  for (int N : {1, 4, 16}) {
    auto t0 = std::chrono::steady_clock::now();
    auto res = example47_lower_bound(N, std::exp(-(N + 1.0)) / 8.0);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool row = res.measured_sup >= res.bound && std::abs(res.mode1_at_zero - example47_constant()) <= 1e-6 &&
               secs <= 60.0;
    ok = ok && row;
    m += "N=" + std::to_string(N) + " sup=" + num(res.measured_sup) + ">=" + num(res.bound) + " (" + num(secs) + "s) ";
    c.data["N" + std::to_string(N)] = {{"measured_sup", res.measured_sup},
                                      {"bound", res.bound},
                                      {"mode1_at_zero", res.mode1_at_zero},
                                      {"seconds", secs}};
  }
  m += "mode1(0)-(1/e-e^-e)=" + num(example47_lower_bound(1, std::exp(-2.0) / 8).mode1_at_zero - example47_constant());
  c.passed = ok;
  c.measured = m;
  return c;
}

inline CriterionResult scalar_multiplier(const AcceptanceOptions& o) {
  auto c = criterion(2, "scalar closed-form multiplier");
  const double dt = 1e-3, tol = 1e-6 * o.tol_scale();
  auto r = scalar_system();
  auto sd = spectral_factorize(r);
  auto f = sample(
      1, 0.0, dt, grid_points(20.0, dt), [](double t) { return Vec::Constant(1, std::exp(-t)); },
      [](double t) { return Vec::Constant(1, -std::exp(-t)); });
  auto kf = apply_K(r, sd, f);
  auto km = apply_Km(r, sd, f);
  double ek = 0, em = 0, ed = 0;
  for (int j = 0; j < f.size(); ++j) {
    double t = f.tau(j), e = std::exp(-t);
    ek = std::max(ek, std::abs(kf.values(0, j) - t * e));
    em = std::max(em, std::abs(km.values(0, j) - (1 + t) * e));
    ed = std::max(ed, std::abs(km.derivs(0, j) + t * e));
  }
  // derivative identity: K f' against S K_m f + Γ^{-1} f
  Mat ode = sd.Gamma_lu.solve(Mat(r.E * km.values + f.values));
  double id = linf(Mat(km.derivs - ode));
  c.passed = ek <= tol && em <= tol && ed <= tol && id <= tol;
  c.measured = "|Kf-te^-t|=" + num(ek) + " |Kmf-(1+t)e^-t|=" + num(em) + " |(Kmf)'-Kf'|=" + num(ed) +
               " |Kf'-SKmf-G^-1f|=" + num(id) + " tol=" + num(tol);
  c.data = {{"K_error", ek}, {"Km_error", em}, {"deriv_error", ed}, {"identity_residual", id}, {"tol", tol}};
  return c;
}

struct ContractionModel {
  std::string label;
  ReducedSystem r;
};

inline std::vector<ContractionModel> contraction_models() {
  std::vector<ContractionModel> out;
  for (const auto& name : catalog_names()) out.push_back({name, catalog_reduced(name)});
  out.push_back({"saddle(q=1)", saddle_system(1.0)});
  return out;
}

inline CriterionResult contraction(const AcceptanceOptions& o) {
  auto c = criterion(3, "contraction certificate with derived radii");
  bool ok = true;
  std::string m;
  for (const auto& cm : contraction_models()) {
    auto sd = spectral_factorize(cm.r);
    auto ce = estimate_constants(cm.r, sd, {0.25 * sd.nu, 0.5 * sd.nu}, o.seed, o.quick ? 16 : 64);
    auto cfg = make_config(cm.r, sd, ce.c);
    std::mt19937_64 rng(o.seed);
    double worst = 0.0;
    int max_it = 0;
    bool row = true;
    const int samples = sd.n_stable() == 0 ? 1 : 20;
    for (int i = 0; i < samples; ++i) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Vec v0 = sd.n_stable() == 0 ? Vec(Vec::Zero(sd.dim())) : random_stable_vector(sd, cfg.eps1 * u(rng), rng);
      try {
        auto pt = solve_fixed_point(cm.r, sd, v0, cfg);
        worst = std::max(worst, pt.contraction_estimate);
        max_it = std::max(max_it, pt.iterations);
        row = row && pt.contraction_estimate <= 0.55 && pt.iterations <= 40;
      } catch (const NumericalError&) {
        row = false;
      }
    }
    ok = ok && row;
    m += cm.label + ":ratio=" + num(worst) + ",it=" + std::to_string(max_it) +
         (sd.n_stable() == 0 ? "(X_s={0})" : "") + " ";
    c.data[cm.label] = {{"c", ce.c}, {"eps1", cfg.eps1}, {"eps2", cfg.eps2}, {"max_ratio", worst}, {"max_iter", max_it}};
  }
  c.passed = ok;
  c.measured = m + "threshold=0.55";
  return c;
}

inline SolverConfig scalar_manual(const AcceptanceOptions& o) {
  return manual_config(0.5, 0.75, 0.2, 1.0, 30.0, o.quick ? 1e-2 : 1e-3);
}

inline SolverConfig saddle_manual(const AcceptanceOptions& o) {
  return manual_config(0.5, 0.75, 0.1, 1.0, 25.0, o.quick ? 1e-2 : 1e-3);
}

inline CriterionResult scalar_manifold(const AcceptanceOptions& o) {
  auto c = criterion(4, "scalar quadratic manifold");
  auto r = scalar_system();
  auto sd = spectral_factorize(r);
  auto cfg = scalar_manual(o);
  auto pt = solve_fixed_point(r, sd, Vec::Constant(1, 0.09), cfg);
  const double u0 = pt.u0(0);
  double err = 0;
  for (int j = 0; j < pt.trajectory.size(); ++j) {
    double t = pt.trajectory.tau(j);
    double exact = u0 * std::exp(-t) / (1 - u0 * (1 - std::exp(-t)));
    err = std::max(err, std::abs(pt.trajectory.values(0, j) - exact));
  }
  auto fit = fit_decay_rate(pt.trajectory, 5.0, 15.0);
  double mild = residual_mild(r, sd, pt.trajectory);
  const double tol = 1e-5 * o.tol_scale();
  c.passed = err <= tol && std::abs(fit.rate - 1.0) <= 1e-2 * o.tol_scale() && mild <= tol &&
             std::abs(u0 - 0.1) <= 1e-6 * o.tol_scale();
  c.measured = "u0=" + num(u0) + " |u-exact|=" + num(err) + " rate=" + num(fit.rate) + " residual_mild=" + num(mild) +
               " tol=" + num(tol);
  c.data = {{"u0", u0}, {"J", pt.J(0)}, {"linf_error", err}, {"rate", fit.rate}, {"residual_mild", mild}};
  return c;
}

inline CriterionResult tangency(const AcceptanceOptions& o) {
  auto c = criterion(5, "tangency on the coupled saddle");
  auto r = saddle_system(1.0);
  auto sd = spectral_factorize(r);
  auto s = tangency_slope(r, sd, Vec::Unit(2, 0), {1e-2, 5e-3, 2.5e-3}, saddle_manual(o));
  double q1 = s[0] / s[1], q2 = s[1] / s[2];
  c.passed = std::abs(q1 - 2.0) <= 0.2 && std::abs(q2 - 2.0) <= 0.2;
  c.measured = "slopes=" + num(s[0]) + "," + num(s[1]) + "," + num(s[2]) + " ratios=" + num(q1) + "," + num(q2) +
               " (target 2 +-10%)";
  c.data = {{"slopes", s}, {"ratios", {q1, q2}}};
  return c;
}

inline CriterionResult invariance(const AcceptanceOptions& o) {
  auto c = criterion(6, "local invariance");
  const double tol = 1e-5 * o.tol_scale();
  bool ok = true;
  std::string m;
  struct Case {
    std::string label;
    ReducedSystem r;
    Vec v0;
    SolverConfig cfg;
  };
  std::vector<Case> cases{{"scalar", scalar_system(), Vec::Constant(1, 0.09), scalar_manual(o)},
                          {"saddle(q=1)", saddle_system(1.0), Vec(Eigen::Vector2d(0.05, 0.0)), saddle_manual(o)}};
  for (auto& cs : cases) {
    auto sd = spectral_factorize(cs.r);
    auto pt = solve_fixed_point(cs.r, sd, cs.v0, cs.cfg);
    for (double tau0 : {0.1, 0.5}) {
      double res = verify_invariance(cs.r, sd, pt, tau0, cs.cfg).residual;
      ok = ok && res <= tol;
      m += cs.label + "@" + num(tau0) + "=" + num(res) + " ";
      c.data[cs.label].push_back({{"tau0", tau0}, {"residual", res}});
    }
  }
  c.passed = ok;
  c.measured = m + "tol=" + num(tol);
  return c;
}

inline CriterionResult linearization(const AcceptanceOptions&) {
  auto c = criterion(7, "linearization certificate on toy3");
  auto m = toy3_model();
  auto scan = scan_invertibility(m, Side::plus, 0.01, 50.0, 2001);
  auto ctrl = scan_invertibility(m, Side::plus, 0.0, 50.0, 2001);
  bool only_zero = true;
  for (std::size_t j = 0; j < ctrl.omega_grid.size(); ++j)
    if (ctrl.omega_grid[j] != 0.0 && ctrl.sigma_min[j] <= kDefaultTol) only_zero = false;
  bool ctrl_fails_at_zero = !ctrl.grid_positive && ctrl.argmin_omega == 0.0 && only_zero;
  c.passed = scan.passed && ctrl_fails_at_zero;
  c.measured = "min_sigma=" + num(scan.min_sigma) + " sup_inv=" + num(scan.sup_inverse_norm) +
               " tail: |w|>=" + num(scan.tail_threshold) + " => inv<=" + num(scan.tail_inverse_bound) +
               " certified=" + (scan.tail_certified ? "yes" : "no") + "; eta=0 min_sigma=" + num(ctrl.min_sigma) +
               " at w=" + num(ctrl.argmin_omega);
  c.data = {{"min_sigma", scan.min_sigma},          {"sup_inverse_norm", scan.sup_inverse_norm},
            {"tail_threshold", scan.tail_threshold}, {"tail_inverse_bound", scan.tail_inverse_bound},
            {"tail_certified", scan.tail_certified}, {"control_min_sigma", ctrl.min_sigma},
            {"control_argmin_omega", ctrl.argmin_omega}};
  return c;
}

inline CriterionResult resolvent_bounds(const AcceptanceOptions& o) {
  auto c = criterion(8, "resolvent bounds and identities");
  bool ok = true;
  std::string m;
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  double worst_char = 0, worst_ue = 0;
  for (const auto& name : catalog_names()) {
    auto r = catalog_reduced(name);
    // Ω large enough that the Neumann tail closes with margin
    const double omega = std::max(100.0, 2.0 * op_norm(r.E) / (2 * kPi * sigma_min(r.Gamma)));
    auto a = resolvent_scan(r, omega, 2001), b = resolvent_scan(r, omega, 4001);
    double rel = std::abs(a.constant / b.constant - 1.0);
    bool row = std::isfinite(a.constant) && rel <= 0.05;
    CMat G = r.Gamma.cast<cplx>();
    for (int t = 0; t < 20; ++t) {
      double w1 = u(rng), w2 = u(rng);
      CMat R1 = resolvent(r, w1), R2 = resolvent(r, w2);
      worst_char = std::max(worst_char, op_norm(CMat(R1 - R2 - cplx(0, 2 * kPi * (w2 - w1)) * R1 * G * R2)));
    }
    auto sd = spectral_factorize(r);
    worst_ue = std::max(worst_ue, (sd.U * sd.E_lu.solve(Mat(sd.U.transpose())) + Mat::Identity(sd.dim(), sd.dim())).norm());
    ok = ok && row;
    m += name + ":C=" + num(a.constant) + "(" + num(100 * rel) + "%) ";
    c.data[name] = {{"constant", a.constant}, {"constant_refined", b.constant}, {"grid_sup", a.grid_sup},
                    {"tail_bound", a.tail_bound}};
  }
  ok = ok && worst_char <= 1e-10 && worst_ue <= 1e-10;
  c.passed = ok;
  c.measured = m + "char-eq=" + num(worst_char) + " |UE^-1U^T+I|=" + num(worst_ue);
  c.data["char_eq_residual"] = worst_char;
  c.data["UEU_residual"] = worst_ue;
  return c;
}

inline CriterionResult kernel_envelope(const AcceptanceOptions&) {
  auto c = criterion(9, "resolvent kernel envelope");
  auto sd = spectral_factorize(geometric_system(21));
  double worst = 0;
  for (int k = 0; k <= 600; ++k) {
    double t = std::pow(10.0, -6.0 + 6.0 * k / 600.0);
    worst = std::max(worst, resolvent_kernel_norm(sd, t) * std::exp(1.0) * t);
  }
  int witnessed = 0;
  for (int k = 0; k < sd.dim(); ++k) {
    double t = 1.0 / std::abs(sd.H(k));
    if (resolvent_kernel_norm(sd, t) >= (1.0 / (std::exp(1.0) * t)) * (1 - 1e-12)) ++witnessed;
  }
  c.passed = worst <= 1.0 + 1e-3 && witnessed >= 5;
  c.measured = "max e*t*norm(t) over t in [1e-6,1]=" + num(worst) + " (<=1.001), envelope attained at " +
               std::to_string(witnessed) + " modes (>=5)";
  c.data = {{"max_ratio", worst}, {"witnessed", witnessed}};
  return c;
}

inline CriterionResult uniqueness(const AcceptanceOptions& o) {
  auto c = criterion(10, "uniqueness of the fixed point");
  auto r = catalog_reduced("toy3");
  auto sd = spectral_factorize(r);
  auto cfg = make_config(r, sd, estimate_constants(r, sd, {0.5 * sd.nu}, o.seed, o.quick ? 16 : 64).c);
  std::mt19937_64 rng(o.seed + 1);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    Vec v0 = random_stable_vector(sd, cfg.eps1 * u(rng), rng);
    GridFunction zero(sd.dim(), cfg.points(), 0.0, cfg.dt);
    GridFunction probe = random_probe(sd.dim(), cfg.alpha, sd.nu, cfg.dt, cfg.points(), rng);
    double s = 0.5 * cfg.eps2 / h1_alpha(probe, cfg.alpha);
    probe.values *= s;
    probe.derivs *= s;
    auto a = solve_fixed_point(r, sd, v0, cfg, &zero);
    auto b = solve_fixed_point(r, sd, v0, cfg, &probe);
    worst = std::max(worst, h1_alpha(a.trajectory - b.trajectory, cfg.alpha));
  }
  c.passed = worst <= 2 * cfg.fp_tol;
  c.measured = "max H1_alpha distance=" + num(worst) + " (<= " + num(2 * cfg.fp_tol) + ")";
  c.data = {{"max_distance", worst}, {"fp_tol", cfg.fp_tol}};
  return c;
}

inline CriterionResult weighted_bounds(const AcceptanceOptions& o) {
  auto c = criterion(11, "weighted multiplier bounds");
  auto r = catalog_reduced("toy3");
  auto sd = spectral_factorize(r);
  bool ok = true;
  std::string m;
  for (double frac : {0.25, 0.5, 0.75}) {
    double a = frac * sd.nu;
    double coarse = 0, fine = 0;
    for (int pass = 0; pass < 2; ++pass) {
      double dt = (o.quick ? 8e-3 : 4e-3) / (pass + 1);
      int n = grid_points(12.0 / (sd.nu - a), dt);
      std::mt19937_64 rng(o.seed);
      double w = 0;
      for (int i = 0; i < (o.quick ? 8 : 32); ++i) {
        auto f = random_probe(sd.dim(), a, sd.nu, dt, n, rng);
        w = std::max(w, h1_alpha(apply_Km(r, sd, f), a) / h1_alpha(f, a));
      }
      (pass == 0 ? coarse : fine) = w;
    }
    double rel = std::abs(coarse / fine - 1.0);
    std::mt19937_64 rng(o.seed + 2);
    double gratio = 0;
    for (int i = 0; i < 16; ++i) {
      auto f = random_probe(sd.dim(), a, sd.nu, 4e-3, grid_points(12.0 / (sd.nu - a), 4e-3), rng);
      gratio = std::max(gratio, weighted_convolution_bound(sd, a, f) * (sd.nu - a));
    }
    bool row = std::isfinite(fine) && rel <= 0.05 && gratio <= 1.0;
    ok = ok && row;
    m += "a=" + num(a) + ":|Km|=" + num(fine) + "(" + num(100 * rel) + "%),|G*f|(nu-a)/|f|=" + num(gratio) + " ";
    c.data["alpha_" + num(frac)] = {{"alpha", a}, {"km_norm", fine}, {"km_norm_coarse", coarse}, {"g_ratio", gratio}};
  }
  c.passed = ok;
  c.measured = m;
  return c;
}

struct Entry {
  int id;
  std::vector<std::string> suites;
  std::function<CriterionResult(const AcceptanceOptions&)> run;
};

inline const std::vector<Entry>& registry() {
  static const std::vector<Entry> r{
      {1, {"example47", "multiplier"}, example47},
      {2, {"multiplier"}, scalar_multiplier},
      {3, {"manifold"}, contraction},
      {4, {"manifold"}, scalar_manifold},
      {5, {"manifold"}, tangency},
      {6, {"manifold"}, invariance},
      {7, {"linearization"}, linearization},
      {8, {"spectral", "resolvent"}, resolvent_bounds},
      {9, {"spectral", "resolvent"}, kernel_envelope},
      {10, {"manifold"}, uniqueness},
      {11, {"multiplier"}, weighted_bounds},
  };
  return r;
}

inline std::vector<std::string> suite_names() {
  return {"all", "example47", "multiplier", "manifold", "linearization", "spectral", "resolvent"};
}

}  // namespace acceptance

/// Runs the criteria of `suite` (or a single criterion number); exceptions
/// inside a criterion count as a failure carrying the message.
inline std::vector<CriterionResult> run_acceptance(const std::string& suite, const AcceptanceOptions& opt) {
  std::vector<CriterionResult> out;
  int only = 0;
  if (!suite.empty() && std::all_of(suite.begin(), suite.end(), ::isdigit)) only = std::stoi(suite);
  auto names = acceptance::suite_names();
  if (only == 0 && std::find(names.begin(), names.end(), suite) == names.end())
    throw InputError("unknown acceptance suite '" + suite + "'");
  if (only != 0 && (only < 1 || only > 11)) throw InputError("acceptance criterion must be in 1..11");
  for (const auto& e : acceptance::registry()) {
    bool take = only ? e.id == only
                     : suite == "all" || std::find(e.suites.begin(), e.suites.end(), suite) != e.suites.end();
    if (!take) continue;
    auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = e.run(opt);
    } catch (const std::exception& ex) {
      r.id = e.id;
      r.name = "criterion " + std::to_string(e.id);
      r.passed = false;
      r.measured = std::string("error: ") + ex.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_line(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "[%s] %2d ", r.passed ? "PASS" : "FAIL", r.id);
  return std::string(head) + r.name + ": " + r.measured;
}

inline Json to_json(const std::vector<CriterionResult>& rs) {
  Json a = Json::array();
  for (const auto& r : rs)
    a.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"measured", r.measured}, {"data", r.data}});
  return a;
}

}  // namespace relax
