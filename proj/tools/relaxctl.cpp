// relaxctl: batch front end for the relax library.
// Exit codes: 0 pass, 1 failed certificate or numerical failure, 2 usage or I/O error.
#include "relax/acceptance.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace relax;

namespace {

struct Common {
  std::uint64_t seed = 20240611;
  std::string out;
};

// Thrown by a subcommand whose certificate failed after its artifacts were written.
struct CertificateFailure {
  std::string reason;
};

Side parse_side(const std::string& s) { return side_from_string(s); }

Json hypotheses_json(const ValidationReport& rep) {
  Json a = Json::array();
  for (const auto& e : rep.entries)
    a.push_back({{"name", e.name}, {"passed", e.passed}, {"margin", e.margin}, {"detail", e.detail}});
  return a;
}

/// Writes JSON to --out with its manifest, or prints it (manifest hash embedded) to stdout.
void emit_json(const Common& c, Json result, RunManifest& man) {
  man.seed = c.seed;
  if (c.out.empty()) {
    result["manifest_hash"] = man.hash();
    std::cout << result.dump(2) << "\n";
  } else {
    write_result(c.out, std::move(result), man);
  }
}

/// CSV goes to --out (required); the manifest sits beside it and the summary goes to stdout.
void emit_csv(const Common& c, const std::string& csv, Json summary, RunManifest& man) {
  if (c.out.empty()) throw InputError("-o/--out is required for CSV output");
  man.seed = c.seed;
  man.outputs.push_back(c.out);
  write_file(c.out, csv);
  write_file(c.out + ".manifest.json", man.to_json().dump(2) + "\n");
  summary["output"] = c.out;
  summary["manifest_hash"] = man.hash();
  std::cout << summary.dump(2) << "\n";
}

Vec read_vector(const std::string& arg, const std::string& what) {
  if (std::filesystem::exists(arg)) {
    Json j = parse_json(read_file(arg), arg);
    if (j.is_object()) j = field(j, "v0", arg);
    return vec_from_json(j, what);
  }
  std::vector<double> xs;
  std::stringstream ss(arg);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      xs.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw InputError(what + ": '" + arg + "' is neither a file nor a comma-separated vector");
    }
  }
  return Eigen::Map<Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

struct ManifoldArgs {
  double alpha = -1.0;  // negative: half the spectral gap
  double eps1 = 0, eps2 = 0, T = 0, dt = 0;
  int samples = 64;
  std::string side = "plus";
};

void add_manifold_options(CLI::App* sc, ManifoldArgs& a) {
  sc->add_option("--alpha", a.alpha, "decay weight of H1_alpha (default nu/2)");
  sc->add_option("--eps1", a.eps1, "override the parameter radius");
  sc->add_option("--eps2", a.eps2, "override the solution radius");
  sc->add_option("--T", a.T, "override the window length");
  sc->add_option("--dt", a.dt, "override the grid step");
  sc->add_option("--samples", a.samples, "probes per weight for the constant estimate")->check(CLI::PositiveNumber);
  sc->add_option("--side", a.side, "side used when a full model is given")->check(CLI::IsMember({"plus", "minus"}));
}

SolverConfig manifold_config(const ReducedSystem& r, const SpectralData& sd, const ManifoldArgs& a,
                             std::uint64_t seed, Json& record) {
  ConfigOptions opt;
  if (a.alpha >= 0) {
    if (a.alpha >= sd.nu) throw InputError("--alpha must lie below the spectral gap nu = " + detail::fmt(sd.nu));
    opt.alpha_frac = a.alpha / sd.nu;
    opt.nu_tilde_frac = std::max(opt.alpha_frac, 0.75);
  }
  auto ce = estimate_constants(r, sd, {opt.alpha_frac * sd.nu}, seed, a.samples);
  SolverConfig cfg = make_config(r, sd, ce.c, opt);
  Json overrides = Json::object();
  if (a.eps1 > 0) cfg.eps1 = a.eps1, overrides["eps1"] = a.eps1;
  if (a.eps2 > 0) cfg.eps2 = a.eps2, overrides["eps2"] = a.eps2;
  if (a.T > 0) cfg.T = a.T, overrides["T"] = a.T;
  if (a.dt > 0) cfg.dt = a.dt, overrides["dt"] = a.dt;
  record = to_json(cfg);
  record["overrides"] = overrides;
  record["constants"] = {{"km_norm", ce.km_norm}, {"traj_norm", ce.traj_norm}, {"samples", ce.samples}};
  return cfg;
}

Json decay_json(const DecayFit& f) {
  return {{"rate", f.rate}, {"r2", f.r2}, {"t_lo", f.t_lo}, {"t_hi", f.t_hi}, {"shrunk", f.shrunk}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relaxctl: manifolds and decaying profiles of degenerate relaxation systems"};
  app.require_subcommand(1);
  Common c;
  app.add_option("--seed", c.seed, "seed for randomized probes, recorded in the manifest");
  app.set_version_flag("--version", kToolVersion);
  std::function<int()> action;

  // validate-model
  {
    auto* sc = app.add_subcommand("validate-model", "check the structural hypotheses of a model");
    auto input = std::make_shared<std::string>();
    auto tol = std::make_shared<double>(kDefaultTol);
    sc->add_option("model", *input, "model JSON or catalog name")->required();
    sc->add_option("--tol", *tol, "rank tolerance");
    sc->add_option("-o,--out", c.out, "output JSON");
    sc->callback([&, input, tol] {
      action = [&, input, tol] {
        auto e = load_entry(*input);
        ModelSystem m = require_model(e);
        auto rep = validate_hypotheses(m, *tol);
        Json res{{"model", m.name}, {"passed", rep.passed()}, {"hypotheses", hypotheses_json(rep)}};
        RunManifest man{"validate-model", {{e.source, e.hash}}, {{"tol", *tol}}};
        emit_json(c, res, man);
        if (!rep.passed()) throw CertificateFailure{"model hypotheses failed"};
        return 0;
      };
    });
  }

  // reduce
  {
    auto* sc = app.add_subcommand("reduce", "Schur-reduce a model at u+ or u-");
    auto input = std::make_shared<std::string>();
    auto side = std::make_shared<std::string>("plus");
    sc->add_option("model", *input, "model JSON or catalog name")->required();
    sc->add_option("--side", *side)->check(CLI::IsMember({"plus", "minus"}));
    sc->add_option("-o,--out", c.out, "output reduced JSON");
    sc->callback([&, input, side] {
      action = [&, input, side] {
        auto e = load_entry(*input);
        ReducedSystem r = reduce(require_model(e), parse_side(*side));
        RunManifest man{"reduce", {{e.source, e.hash}}, {{"side", *side}}};
        emit_json(c, to_json(r, Provenance{e.hash, *side}), man);
        return 0;
      };
    });
  }

  // spectral
  {
    auto* sc = app.add_subcommand("spectral", "spectral factorization of a reduced system");
    auto input = std::make_shared<std::string>();
    auto side = std::make_shared<std::string>("plus");
    sc->add_option("reduced", *input, "reduced JSON, model JSON or catalog name")->required();
    sc->add_option("--side", *side)->check(CLI::IsMember({"plus", "minus"}));
    sc->add_option("-o,--out", c.out, "output JSON");
    sc->callback([&, input, side] {
      action = [&, input, side] {
        auto e = load_entry(*input);
        ReducedSystem r = as_reduced(e, parse_side(*side));
        auto sd = spectral_factorize(r);
        const int d = sd.dim();
        Mat ue = sd.U * sd.E_lu.solve(Mat(sd.U.transpose())) + Mat::Identity(d, d);
        Json res{{"name", r.name},
                 {"H", to_json(sd.H)},
                 {"nu", sd.nu},
                 {"stable_indices", sd.lambda_minus},
                 {"unstable_indices", sd.lambda_plus},
                 {"U", to_json(sd.U)},
                 {"identity_residual", ue.norm()}};
        RunManifest man{"spectral", {{e.source, e.hash}}, {{"side", *side}}};
        emit_json(c, res, man);
        return 0;
      };
    });
  }

  // resolvent-scan
  {
    auto* sc = app.add_subcommand("resolvent-scan", "sample the resolvent norm along the imaginary axis");
    auto input = std::make_shared<std::string>();
    auto side = std::make_shared<std::string>("plus");
    auto omega = std::make_shared<double>(100.0);
    auto points = std::make_shared<int>(2001);
    sc->add_option("reduced", *input)->required();
    sc->add_option("--omega-max", *omega)->check(CLI::PositiveNumber);
    sc->add_option("--points", *points)->check(CLI::Range(2, 10000000));
    sc->add_option("--side", *side)->check(CLI::IsMember({"plus", "minus"}));
    sc->add_option("-o,--out", c.out, "output CSV")->required();
    sc->callback([&, input, side, omega, points] {
      action = [&, input, side, omega, points] {
        auto e = load_entry(*input);
        auto s = resolvent_scan(as_reduced(e, parse_side(*side)), *omega, *points);
        std::string csv = "omega,norm_R,norm_R_times_Gamma\n";
        for (std::size_t j = 0; j < s.omega.size(); ++j)
          csv += fmt_num(s.omega[j]) + "," + fmt_num(s.norm_R[j]) + "," + fmt_num(s.norm_R_times_Gamma[j]) + "\n";
        RunManifest man{"resolvent-scan", {{e.source, e.hash}}, {{"omega_max", *omega}, {"points", *points}}};
        Json sum{{"grid_sup", s.grid_sup},
                 {"tail_bound", s.tail_closed ? Json(s.tail_bound) : Json(nullptr)},
                 {"tail_closed", s.tail_closed},
                 {"constant", s.tail_closed ? Json(s.constant) : Json(nullptr)}};
        emit_csv(c, csv, sum, man);
        if (!s.tail_closed) throw CertificateFailure{"Neumann tail does not close at omega-max"};
        return 0;
      };
    });
  }

  // verify-linearization
  {
    auto* sc = app.add_subcommand("verify-linearization", "weighted invertibility scan of the linearization");
    auto input = std::make_shared<std::string>();
    auto side = std::make_shared<std::string>("plus");
    auto eta = std::make_shared<double>(0.01);
    auto omega = std::make_shared<double>(50.0);
    auto points = std::make_shared<int>(2001);
    sc->add_option("model", *input)->required();
    sc->add_option("--side", *side)->check(CLI::IsMember({"plus", "minus"}));
    sc->add_option("--eta", *eta);
    sc->add_option("--omega-max", *omega)->check(CLI::PositiveNumber);
    sc->add_option("--points", *points);
    sc->add_option("-o,--out", c.out, "output JSON");
    sc->callback([&, input, side, eta, omega, points] {
      action = [&, input, side, eta, omega, points] {
        auto e = load_entry(*input);
        auto s = scan_invertibility(require_model(e), parse_side(*side), *eta, *omega, *points);
        Json res{{"side", *side},
                 {"eta", s.eta},
                 {"passed", s.passed},
                 {"min_sigma", s.min_sigma},
                 {"argmin_omega", s.argmin_omega},
                 {"sup_inverse_norm", s.sup_inverse_norm},
                 {"grid_positive", s.grid_positive},
                 {"tail", {{"gamma", s.gamma},
                           {"kawashima_margin", s.kawashima_margin},
                           {"c", s.tail_c},
                           {"threshold", s.tail_threshold},
                           {"inverse_bound", s.tail_inverse_bound},
                           {"certified", s.tail_certified}}},
                 {"omega", s.omega_grid},
                 {"sigma_min", s.sigma_min}};
        RunManifest man{"verify-linearization", {{e.source, e.hash}},
                        {{"side", *side}, {"eta", *eta}, {"omega_max", *omega}, {"points", *points}}};
        emit_json(c, res, man);
        if (!s.passed)
          throw CertificateFailure{!s.grid_positive ? "symbol singular on the grid" : "tail not certified"};
        return 0;
      };
    });
  }

  // apply-multiplier
  {
    auto* sc = app.add_subcommand("apply-multiplier", "apply K (or K_m with --modified) to a sampled function");
    auto input = std::make_shared<std::string>();
    auto fcsv = std::make_shared<std::string>();
    auto side = std::make_shared<std::string>("plus");
    auto modified = std::make_shared<bool>(false);
    auto alpha = std::make_shared<double>(0.0);
    sc->add_option("reduced", *input)->required();
    sc->add_option("f", *fcsv, "trajectory CSV")->required()->check(CLI::ExistingFile);
    sc->add_flag("--modified", *modified, "apply K_m instead of K");
    sc->add_option("--alpha", *alpha, "weight for the reported norms")->check(CLI::NonNegativeNumber);
    sc->add_option("--side", *side)->check(CLI::IsMember({"plus", "minus"}));
    sc->add_option("-o,--out", c.out, "output CSV")->required();
    sc->callback([&, input, fcsv, side, modified, alpha] {
      action = [&, input, fcsv, side, modified, alpha] {
        auto e = load_entry(*input);
        ReducedSystem r = as_reduced(e, parse_side(*side));
        auto sd = spectral_factorize(r);
        std::string text = read_file(*fcsv);
        GridFunction f = trajectory_from_csv(text, *fcsv);
        if (*modified && !f.has_derivs()) throw InputError(*fcsv + ": K_m needs the dv_1..dv_d columns");
        GridFunction u = *modified ? apply_Km(r, sd, f) : apply_K(r, sd, f);
        Json sum{{"operator", *modified ? "K_m" : "K"},
                 {"alpha", *alpha},
                 {"h1_alpha_in", h1_alpha(f, *alpha)},
                 {"h1_alpha_out", h1_alpha(u, *alpha)},
                 {"tail_bound", truncation_tail_bound(sd, f, 0.0)}};
        RunManifest man{"apply-multiplier", {{e.source, e.hash}, {*fcsv, fnv1a_hex(text)}},
                        {{"modified", *modified}, {"alpha", *alpha}, {"side", *side}}};
        emit_csv(c, trajectory_csv(u), sum, man);
        return 0;
      };
    });
  }

  // example47
  {
    auto* sc = app.add_subcommand("example47", "L-infinity lower bound for the singular multiplier");
    auto modes = std::make_shared<int>(4);
    auto dt = std::make_shared<double>(1e-5);
    auto support = std::make_shared<std::string>("shifted");
    sc->add_option("--modes", *modes)->check(CLI::PositiveNumber);
    sc->add_option("--dt", *dt)->check(CLI::PositiveNumber);
    sc->add_option("--support", *support, "indicator supports")->check(CLI::IsMember({"shifted", "literal"}));
    sc->add_option("-o,--out", c.out, "output JSON");
    sc->callback([&, modes, dt, support] {
      action = [&, modes, dt, support] {
        auto res = example47_lower_bound(*modes, *dt,
                                         *support == "literal" ? Example47Support::literal : Example47Support::shifted);
        bool ok = res.measured_sup >= res.bound;
        Json out{{"N", res.N},
                 {"bound", res.bound},
                 {"measured_sup", res.measured_sup},
                 {"margin", res.measured_sup - res.bound},
                 {"mode1_at_zero", res.mode1_at_zero},
                 {"support", *support},
                 {"grid", {{"dt", res.dt}, {"window", res.window}, {"points", res.grid_points}}},
                 {"passed", ok}};
        RunManifest man{"example47", {}, {{"modes", *modes}, {"dt", *dt}, {"support", *support}}};
        emit_json(c, out, man);
        if (!ok) throw CertificateFailure{"measured sup below the bound"};
        return 0;
      };
    });
  }

  // solve-manifold
  {
    auto* sc = app.add_subcommand("solve-manifold", "solve for the manifold point with parameter v0");
    auto input = std::make_shared<std::string>();
    auto v0s = std::make_shared<std::string>();
    auto traj = std::make_shared<std::string>();
    auto args = std::make_shared<ManifoldArgs>();
    sc->add_option("reduced", *input)->required();
    sc->add_option("--v0", *v0s, "v0 JSON file or comma-separated components")->required();
    sc->add_option("--trajectory", *traj, "also write the trajectory CSV");
    add_manifold_options(sc, *args);
    sc->add_option("-o,--out", c.out, "output JSON");
    sc->callback([&, input, v0s, traj, args] {
      action = [&, input, v0s, traj, args] {
        auto e = load_entry(*input);
        ReducedSystem r = as_reduced(e, parse_side(args->side));
        auto sd = spectral_factorize(r);
        Json cfgj;
        SolverConfig cfg = manifold_config(r, sd, *args, c.seed, cfgj);
        Vec v0 = read_vector(*v0s, "--v0");
        RunManifest man{"solve-manifold", {{e.source, e.hash}}, cfgj};
        if (std::filesystem::exists(*v0s)) man.input_hashes[*v0s] = fnv1a_hex(read_file(*v0s));
        else man.config["v0"] = to_json(v0);
        auto pt = solve_fixed_point(r, sd, v0, cfg);
        auto fit = fit_decay_rate(pt.trajectory, 0.2 * cfg.T, 0.6 * cfg.T);
        Json res{{"v0", to_json(pt.v0)},
                 {"u0", to_json(pt.u0)},
                 {"J", to_json(pt.J)},
                 {"norms",
                  {{"v0_x_half", x_half_norm(sd, pt.v0)},
                   {"h1_alpha", pt.h1_alpha_norm},
                   {"linf", linf(pt.trajectory)},
                   {"J", pt.J.norm()}}},
                 {"iterations", pt.iterations},
                 {"contraction_estimate", pt.contraction_estimate},
                 {"increments", pt.increments},
                 {"parametrization_residual", pt.parametrization_residual},
                 {"in_ball", pt.in_ball},
                 {"decay_fit", decay_json(fit)},
                 {"config", cfgj}};
        if (!traj->empty()) {
          write_file(*traj, trajectory_csv(pt.trajectory));
          man.outputs.push_back(*traj);
        }
        emit_json(c, res, man);
        if (!pt.in_ball) throw CertificateFailure{"solution left the eps2 ball"};
        return 0;
      };
    });
  }

  // chart-sweep
  {
    auto* sc = app.add_subcommand("chart-sweep", "solve along random stable directions at a fixed radius");
    auto input = std::make_shared<std::string>();
    auto dirs = std::make_shared<int>(8);
    auto radius = std::make_shared<double>(-1.0);
    auto args = std::make_shared<ManifoldArgs>();
    sc->add_option("reduced", *input)->required();
    sc->add_option("--directions", *dirs)->check(CLI::PositiveNumber);
    sc->add_option("--radius", *radius, "X_1/2 radius of v0 (default eps1/2)");
    add_manifold_options(sc, *args);
    sc->add_option("-o,--out", c.out, "output CSV")->required();
    sc->callback([&, input, dirs, radius, args] {
      action = [&, input, dirs, radius, args] {
        auto e = load_entry(*input);
        ReducedSystem r = as_reduced(e, parse_side(args->side));
        auto sd = spectral_factorize(r);
        if (sd.n_stable() == 0) throw InputError("chart-sweep: the stable subspace is trivial");
        Json cfgj;
        SolverConfig cfg = manifold_config(r, sd, *args, c.seed, cfgj);
        const double rad = *radius > 0 ? *radius : 0.5 * cfg.eps1;
        std::vector<Vec> v0(*dirs);
        std::mt19937_64 rng(c.seed);
        for (auto& v : v0) v = random_stable_vector(sd, rad, rng);
        std::vector<ManifoldPoint> pts(v0.size());
        std::vector<DecayFit> fits(v0.size());
        parallel_for(*dirs, [&](int i) {
          pts[i] = solve_fixed_point(r, sd, v0[i], cfg);
          fits[i] = fit_decay_rate(pts[i].trajectory, 0.2 * cfg.T, 0.6 * cfg.T);
        });
        std::string csv = "index";
        for (int k = 1; k <= sd.dim(); ++k) csv += ",v0_" + std::to_string(k);
        csv += ",J_norm,rate,iterations,contraction\n";
        double worst = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          csv += std::to_string(i);
          for (int k = 0; k < sd.dim(); ++k) csv += "," + fmt_num(v0[i](k));
          csv += "," + fmt_num(pts[i].J.norm()) + "," + fmt_num(fits[i].rate) + "," +
                 std::to_string(pts[i].iterations) + "," + fmt_num(pts[i].contraction_estimate) + "\n";
          worst = std::max(worst, pts[i].contraction_estimate);
        }
        cfgj["directions"] = *dirs;
        cfgj["radius"] = rad;
        RunManifest man{"chart-sweep", {{e.source, e.hash}}, cfgj};
        emit_csv(c, csv, {{"directions", *dirs}, {"radius", rad}, {"max_contraction", worst}}, man);
        return 0;
      };
    });
  }

  // decay-fit
  {
    auto* sc = app.add_subcommand("decay-fit", "fit the exponential decay rate of a trajectory CSV");
    auto input = std::make_shared<std::string>();
    auto lo = std::make_shared<double>(-1.0), hi = std::make_shared<double>(-1.0);
    sc->add_option("trajectory", *input)->required()->check(CLI::ExistingFile);
    sc->add_option("--t-lo", *lo, "window start (default 20% of the span)");
    sc->add_option("--t-hi", *hi, "window end (default 60% of the span)");
    sc->add_option("-o,--out", c.out, "output JSON");
    sc->callback([&, input, lo, hi] {
      action = [&, input, lo, hi] {
        std::string text = read_file(*input);
        GridFunction g = trajectory_from_csv(text, *input);
        double a = *lo >= 0 ? *lo : g.t0 + 0.2 * (g.t_end() - g.t0);
        double b = *hi >= 0 ? *hi : g.t0 + 0.6 * (g.t_end() - g.t0);
        RunManifest man{"decay-fit", {{*input, fnv1a_hex(text)}}, {{"t_lo", a}, {"t_hi", b}}};
        emit_json(c, decay_json(fit_decay_rate(g, a, b)), man);
        return 0;
      };
    });
  }

  // acceptance
  {
    auto* sc = app.add_subcommand("acceptance", "run the acceptance criteria");
    auto suite = std::make_shared<std::string>("all");
    auto quick = std::make_shared<bool>(false);
    sc->add_option("suite", *suite, "all, a suite name, or a criterion number");
    sc->add_flag("--quick", *quick, "dt = 1e-2 and tolerances x10");
    sc->add_option("-o,--out", c.out, "summary JSON");
    sc->callback([&, suite, quick] {
      action = [&, suite, quick] {
        AcceptanceOptions opt;
        opt.quick = *quick;
        opt.seed = c.seed;
        auto rs = run_acceptance(*suite, opt);
        int failed = 0;
        for (const auto& r : rs) {
          std::cout << format_line(r) << "\n";
          failed += r.passed ? 0 : 1;
        }
        std::cout << rs.size() - failed << "/" << rs.size() << " criteria passed\n";
        if (!c.out.empty()) {
          RunManifest man{"acceptance", {}, {{"suite", *suite}, {"quick", *quick}}};
          man.seed = c.seed;
          write_result(c.out, {{"criteria", to_json(rs)}, {"failed", failed}}, man);
        }
        return failed ? 1 : 0;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return action();
  } catch (const CertificateFailure& f) {
    std::cerr << "relaxctl: certificate failed: " << f.reason << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "relaxctl: " << e.what() << "\n";
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "relaxctl: malformed JSON: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "relaxctl: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cout << Json{{"status", "fail"}, {"reason", e.what()}}.dump() << "\n";
    std::cerr << "relaxctl: " << e.what() << "\n";
    return 1;
  }
}
