#pragma once

#include "relax/catalog.hpp"
#include "relax/manifold.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

namespace relax {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "relax 1.0.0";

// ---- matrices ---------------------------------------------------------------

inline Json to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vec vec_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(what + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Mat mat_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InputError(what + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw InputError(what + ": ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = vec_from_json(j[i], what).transpose();
  }
  return m;
}

inline Json to_json(const Bilinear& b) {
  Json s = Json::array();
  for (const auto& sl : b.slices) s.push_back(to_json(sl));
  return s;
}

inline Bilinear bilinear_from_json(const Json& j, int dim, const std::string& what) {
  Bilinear b(dim, dim);
  if (j.is_null()) return b;
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw InputError(what + ": need one slice per output");
  for (int k = 0; k < dim; ++k) {
    b.slices[k] = mat_from_json(j[k], what);
    if (b.slices[k].rows() != dim || b.slices[k].cols() != dim) throw InputError(what + ": slice shape mismatch");
  }
  return b;
}

// ---- hashing ----------------------------------------------------------------

/// 64-bit FNV-1a, hex encoded. Used only for provenance, not security.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + ": invalid JSON (" + e.what() + ")");
  }
}

// ---- models -----------------------------------------------------------------

inline Json to_json(const ModelSystem& m) {
  Json j;
  j["kind"] = "model";
  j["name"] = m.name;
  j["dim"] = m.dim;
  j["A"] = to_json(m.A);
  j["B"] = to_json(m.B);
  j["v_perp_basis"] = to_json(Mat(m.v_perp.transpose()));
  j["u_plus"] = to_json(m.u_plus);
  j["u_minus"] = to_json(m.u_minus);
  j["K_plus"] = to_json(m.K_plus);
  j["K_minus"] = to_json(m.K_minus);
  j["delta"] = {{"plus", m.delta_plus}, {"minus", m.delta_minus}};
  j["gamma"] = {{"plus", m.gamma_plus}, {"minus", m.gamma_minus}};
  return j;
}

inline double number_field(const Json& j, const char* key, const std::string& what) {
  if (!j.contains(key) || !j[key].is_number()) throw InputError(what + ": missing number '" + key + "'");
  return j[key].get<double>();
}

inline const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw InputError(what + ": missing field '" + key + "'");
  return j[key];
}

/// A margin given as one number for both sides or as {"plus": a, "minus": b}.
inline std::pair<double, double> side_pair(const Json& j, const char* key, const std::string& what) {
  const Json& v = field(j, key, what);
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (v.is_object()) return {number_field(v, "plus", what + "." + key), number_field(v, "minus", what + "." + key)};
  throw InputError(what + ": '" + key + "' must be a number or {plus, minus}");
}

/// v_perp_basis is a list of basis vectors (rows), B one slice per output.
inline ModelSystem model_from_json(const Json& j) {
  const std::string what = "model";
  ModelSystem m;
  m.name = j.value("name", std::string("model"));
  m.dim = static_cast<int>(number_field(j, "dim", what));
  require(m.dim >= 1, "model: dim must be >= 1");
  m.A = mat_from_json(field(j, "A", what), "model.A");
  m.B = bilinear_from_json(field(j, "B", what), m.dim, "model.B");
  m.v_perp = mat_from_json(field(j, "v_perp_basis", what), "model.v_perp_basis").transpose();
  m.u_plus = vec_from_json(field(j, "u_plus", what), "model.u_plus");
  m.u_minus = vec_from_json(field(j, "u_minus", what), "model.u_minus");
  m.K_plus = mat_from_json(field(j, "K_plus", what), "model.K_plus");
  m.K_minus = mat_from_json(field(j, "K_minus", what), "model.K_minus");
  std::tie(m.delta_plus, m.delta_minus) = side_pair(j, "delta", what);
  std::tie(m.gamma_plus, m.gamma_minus) = side_pair(j, "gamma", what);
  check_shapes(m);
  return m;
}

struct Provenance {
  std::string model_hash;
  std::string side;
};

inline Json to_json(const ReducedSystem& r, const Provenance& p = {}) {
  Json j;
  j["kind"] = "reduced";
  j["name"] = r.name;
  j["dim"] = r.dim();
  j["side"] = to_string(r.side);
  j["Gamma"] = to_json(r.Gamma);
  j["E"] = to_json(r.E);
  j["D"] = to_json(r.D);
  if (!p.model_hash.empty()) j["provenance"] = {{"model_hash", p.model_hash}, {"side", p.side}};
  return j;
}

inline ReducedSystem reduced_from_json(const Json& j) {
  const std::string what = "reduced";
  ReducedSystem r;
  r.name = j.value("name", std::string("reduced"));
  r.Gamma = mat_from_json(field(j, "Gamma", what), "reduced.Gamma");
  r.E = mat_from_json(field(j, "E", what), "reduced.E");
  const int d = static_cast<int>(r.Gamma.rows());
  r.D = bilinear_from_json(j.contains("D") ? j["D"] : Json(), d, "reduced.D");
  if (j.contains("side")) r.side = side_from_string(j["side"].get<std::string>());
  check_reduced(r);
  return r;
}

struct LoadedEntry {
  CatalogEntry entry;
  std::string hash;    // of the file bytes, or of the canonical JSON for catalog names
  std::string source;  // path or "catalog:<name>"
};

/// A file path, or a catalog name when no such file exists.
inline LoadedEntry load_entry(const std::string& arg, const Params& params = {}) {
  LoadedEntry out;
  if (std::filesystem::exists(arg)) {
    std::string text = read_file(arg);
    Json j = parse_json(text, arg);
    out.hash = fnv1a_hex(text);
    out.source = arg;
    std::string kind = j.value("kind", std::string());
    if (kind == "model") out.entry = model_from_json(j);
    else if (kind == "reduced") out.entry = reduced_from_json(j);
    else if (kind == "catalog") {
      Params p = params;
      if (j.contains("params"))
        for (auto& [k, v] : j["params"].items()) p[k] = v.get<double>();
      out.entry = builtin_model(field(j, "name", arg).get<std::string>(), p);
    } else throw InputError(arg + ": unknown kind '" + kind + "'");
    return out;
  }
  const auto& names = catalog_names();
  if (std::find(names.begin(), names.end(), arg) == names.end())
    throw InputError("'" + arg + "' is neither a readable file nor a catalog model");
  out.entry = builtin_model(arg, params);
  out.source = "catalog:" + arg;
  if (auto* m = std::get_if<ModelSystem>(&out.entry)) out.hash = fnv1a_hex(to_json(*m).dump());
  else out.hash = fnv1a_hex(to_json(std::get<ReducedSystem>(out.entry)).dump());
  return out;
}

inline ModelSystem require_model(const LoadedEntry& e) {
  if (auto* m = std::get_if<ModelSystem>(&e.entry)) return *m;
  throw InputError(e.source + ": a full model is required here, got a reduced system");
}

/// Reduced systems pass through; full models are reduced on `side`.
inline ReducedSystem as_reduced(const LoadedEntry& e, Side side) {
  if (auto* m = std::get_if<ModelSystem>(&e.entry)) return reduce(*m, side);
  return std::get<ReducedSystem>(e.entry);
}

// ---- CSV --------------------------------------------------------------------

inline std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Columns tau, v_1..v_d, dv_1..dv_d.
inline std::string trajectory_csv(const GridFunction& g) {
  std::string s = "tau";
  for (int i = 1; i <= g.dim(); ++i) s += ",v_" + std::to_string(i);
  if (g.has_derivs())
    for (int i = 1; i <= g.dim(); ++i) s += ",dv_" + std::to_string(i);
  s += '\n';
  for (int j = 0; j < g.size(); ++j) {
    s += fmt_num(g.tau(j));
    for (int i = 0; i < g.dim(); ++i) s += "," + fmt_num(g.values(i, j));
    if (g.has_derivs())
      for (int i = 0; i < g.dim(); ++i) s += "," + fmt_num(g.derivs(i, j));
    s += '\n';
  }
  return s;
}

/// Parses the trajectory format; the grid must be uniform to 1e-9 relative.
inline GridFunction trajectory_from_csv(const std::string& text, const std::string& what = "csv") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError(what + ": empty file");
  std::vector<std::string> head;
  {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) head.push_back(cell);
  }
  if (head.empty() || head[0] != "tau") throw InputError(what + ": first column must be 'tau'");
  int nv = 0, nd = 0;
  for (std::size_t i = 1; i < head.size(); ++i) (head[i].rfind("dv_", 0) == 0 ? nd : nv) += 1;
  if (nv == 0 || (nd != 0 && nd != nv)) throw InputError(what + ": expected v_1..v_d and optionally dv_1..dv_d");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError(what + ": non-numeric cell '" + cell + "'");
      }
    }
    if (row.size() != head.size()) throw InputError(what + ": row width mismatch");
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw InputError(what + ": need at least two samples");
  GridFunction g(nv, static_cast<int>(rows.size()), rows[0][0], rows[1][0] - rows[0][0]);
  if (g.dt <= 0) throw InputError(what + ": tau must increase");
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (std::abs(rows[j][0] - g.tau(static_cast<int>(j))) > 1e-9 * std::max(1.0, std::abs(rows[j][0])) + 1e-9 * g.dt)
      throw InputError(what + ": grid is not uniform");
    for (int i = 0; i < nv; ++i) g.values(i, static_cast<int>(j)) = rows[j][1 + i];
    for (int i = 0; i < nd; ++i) g.derivs(i, static_cast<int>(j)) = rows[j][1 + nv + i];
  }
  if (nd == 0) g.derivs.resize(0, 0);
  return g;
}

// ---- manifest ---------------------------------------------------------------

struct RunManifest {
  RunManifest() = default;
  RunManifest(std::string cmd, std::map<std::string, std::string> hashes, Json cfg)
      : command(std::move(cmd)), input_hashes(std::move(hashes)), config(std::move(cfg)) {}

  std::string command;
  std::map<std::string, std::string> input_hashes;
  Json config = Json::object();
  std::vector<std::string> outputs;
  std::string version = kToolVersion;
  std::uint64_t seed = 20240611;

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["input_hashes"] = input_hashes;
    j["config"] = config;
    j["outputs"] = outputs;
    j["versions"] = version;
    j["seed"] = seed;
    return j;
  }
  std::string hash() const { return fnv1a_hex(to_json().dump()); }
};

/// Stamps the manifest hash into a result and writes it next to the manifest.
inline void write_result(const std::string& path, Json result, RunManifest& man) {
  man.outputs.push_back(path);
  result["manifest_hash"] = man.hash();
  write_file(path, result.dump(2) + "\n");
  write_file(path + ".manifest.json", man.to_json().dump(2) + "\n");
}

inline Json to_json(const SolverConfig& c) {
  return {{"alpha", c.alpha},   {"nu_tilde", c.nu_tilde}, {"eps1", c.eps1},
          {"eps2", c.eps2},     {"T", c.T},               {"dt", c.dt},
          {"max_iter", c.max_iter}, {"fp_tol", c.fp_tol}, {"c", c.c},
          {"c_eff", c.c_eff},   {"dt_error_estimate", c.dt_error_estimate}};
}

}  // namespace relax
