#pragma once

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nonreducible.hpp"
#include "reduce4x4.hpp"
#include "scatter.hpp"

namespace dirac_darboux::cli {

using json = nlohmann::json;

enum class ModelKind { free2x2, darboux2x2, distortion, spin_orbit, nonreducible };

inline const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::free2x2: return "free2x2";
    case ModelKind::darboux2x2: return "darboux2x2";
    case ModelKind::distortion: return "distortion";
    case ModelKind::spin_orbit: return "spin_orbit";
    case ModelKind::nonreducible: return "nonreducible";
  }
  return "?";
}

struct Tolerances {
  double seed = 1e-8;
  double hermiticity = 1e-10;
  double oracle = 1e-8;
  double intertwining = 1e-6;
  double bound_residual = 1e-8;
  double norm = 5e-6;
  double relation = 1e-10;
  double asymptotic = 1e-6;
  double pattern = 1e-12;
};

struct ModelConfig {
  ModelKind kind = ModelKind::free2x2;
  std::map<std::string, double> numbers;
  std::string lambda_mode = "constant";
  double grid_x_min = -30.0, grid_x_max = 30.0;
  int grid_n = 6001;
  Tolerances tol;
  double potential_shift_sigma3 = 0.0;

  double get(const std::string& key) const {
    const auto it = numbers.find(key);
    return it == numbers.end() ? 0.0 : it->second;
  }
  Grid grid() const { return Grid(grid_x_min, grid_x_max, grid_n); }
};

namespace detail {

inline const std::map<ModelKind, std::vector<std::string>>& required_keys() {
  static const std::map<ModelKind, std::vector<std::string>> m = {
      {ModelKind::free2x2, {"v", "w"}},
      {ModelKind::darboux2x2, {"v", "w", "eps1", "eps2"}},
      {ModelKind::distortion, {"v1", "w1", "v2", "w2", "eps1", "eps2", "eps3", "eps4"}},
      {ModelKind::spin_orbit, {"v1", "eps1"}},
      {ModelKind::nonreducible, {"v1", "w1", "v2", "w2", "eps1", "eps2", "eps3", "eps4"}},
  };
  return m;
}

inline const std::map<ModelKind, std::vector<std::string>>& optional_keys() {
  static const std::map<ModelKind, std::vector<std::string>> m = {
      {ModelKind::free2x2, {"re_a", "im_a"}},
      {ModelKind::darboux2x2, {"re_a", "im_a", "delta1", "delta2"}},
      {ModelKind::distortion, {"re_a1", "im_a1", "re_a2", "im_a2", "delta1", "delta2", "delta3", "delta4", "alpha"}},
      {ModelKind::spin_orbit, {"lambda_value"}},
      {ModelKind::nonreducible,
       {"re_a1", "im_a1", "re_a2", "im_a2", "delta1", "delta2", "delta3", "delta4", "delta3_bar", "delta4_bar"}},
  };
  return m;
}

inline double number(const json& j, const std::string& key) {
  if (!j.is_number()) throw Error(ErrorKind::invalid_input, "config key '" + key + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "config key '" + key + "' must be finite");
  return v;
}

}  // namespace detail

/// Parses a config object. Unknown keys are rejected.
inline ModelConfig parse_config(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_input, "config must be a JSON object");
  ModelConfig c;
  if (!j.contains("model") || !j["model"].is_string())
    throw Error(ErrorKind::invalid_input, "config requires a string key 'model'");
  const std::string model = j["model"].get<std::string>();
  bool found = false;
  for (ModelKind k : {ModelKind::free2x2, ModelKind::darboux2x2, ModelKind::distortion, ModelKind::spin_orbit,
                      ModelKind::nonreducible})
    if (model == kind_name(k)) {
      c.kind = k;
      found = true;
    }
  if (!found) throw Error(ErrorKind::invalid_input, "unknown model kind '" + model + "'");

  std::set<std::string> params;
  for (const auto& k : detail::required_keys().at(c.kind)) params.insert(k);
  for (const auto& k : detail::optional_keys().at(c.kind)) params.insert(k);
  for (const auto& k : detail::required_keys().at(c.kind))
    if (!j.contains(k)) throw Error(ErrorKind::invalid_input, "missing required key '" + k + "' for model " + model);

  for (const auto& [key, val] : j.items()) {
    if (key == "model") continue;
    if (params.count(key)) {
      c.numbers[key] = detail::number(val, key);
    } else if (key == "lambda_mode" && c.kind == ModelKind::spin_orbit) {
      if (!val.is_string()) throw Error(ErrorKind::invalid_input, "lambda_mode must be a string");
      c.lambda_mode = val.get<std::string>();
      if (c.lambda_mode != "constant" && c.lambda_mode != "equal_to_v1_tilde")
        throw Error(ErrorKind::invalid_input, "lambda_mode must be 'constant' or 'equal_to_v1_tilde'");
    } else if (key == "grid") {
      if (!val.is_object()) throw Error(ErrorKind::invalid_input, "grid must be an object");
      for (const auto& [gk, gv] : val.items()) {
        if (gk == "x_min") {
          c.grid_x_min = detail::number(gv, "grid.x_min");
        } else if (gk == "x_max") {
          c.grid_x_max = detail::number(gv, "grid.x_max");
        } else if (gk == "n_points") {
          if (!gv.is_number_integer()) throw Error(ErrorKind::invalid_input, "grid.n_points must be an integer");
          c.grid_n = gv.get<int>();
        } else {
          throw Error(ErrorKind::invalid_input, "unknown key 'grid." + gk + "'");
        }
      }
      c.grid();
    } else if (key == "tolerances") {
      if (!val.is_object()) throw Error(ErrorKind::invalid_input, "tolerances must be an object");
      const std::map<std::string, double*> slots = {
          {"seed", &c.tol.seed},           {"hermiticity", &c.tol.hermiticity},
          {"oracle", &c.tol.oracle},       {"intertwining", &c.tol.intertwining},
          {"bound_residual", &c.tol.bound_residual}, {"norm", &c.tol.norm},
          {"relation", &c.tol.relation},   {"asymptotic", &c.tol.asymptotic},
          {"pattern", &c.tol.pattern}};
      for (const auto& [tk, tv] : val.items()) {
        const auto it = slots.find(tk);
        if (it == slots.end()) throw Error(ErrorKind::invalid_input, "unknown key 'tolerances." + tk + "'");
        const double t = detail::number(tv, "tolerances." + tk);
        if (!(t > 0.0)) throw Error(ErrorKind::invalid_input, "tolerances." + tk + " must be positive");
        *it->second = t;
      }
    } else if (key == "potential_shift_sigma3") {
      c.potential_shift_sigma3 = detail::number(val, key);
    } else {
      throw Error(ErrorKind::invalid_input, "unknown config key '" + key + "' for model " + model);
    }
  }
  if (c.kind == ModelKind::spin_orbit && c.lambda_mode == "constant" && !j.contains("lambda_value"))
    throw Error(ErrorKind::invalid_input, "lambda_mode 'constant' requires lambda_value");
  if (const char* env = std::getenv("DIRAC_DARBOUX_SEED_TOL")) {
    char* end = nullptr;
    const double t = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(t > 0.0) || !std::isfinite(t))
      throw Error(ErrorKind::invalid_input, "DIRAC_DARBOUX_SEED_TOL must be a positive number");
    c.tol.seed = t;
  }
  return c;
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::invalid_input, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

struct NamedState {
  std::string name;
  double energy = 0.0;
  SpinorField<4> spinor;  // 2×2 states are padded with zeros
  double norm = 0.0;
  double residual = 0.0;
  bool finite_norm = false;
};

/// Everything the commands need, independent of the model kind.
struct BuiltModel {
  ModelConfig config;
  int dim = 2;
  std::optional<DiracOperator<2>> h2, ht2;
  std::optional<FirstOrderOperator<2>> l2;
  std::optional<DiracOperator<4>> h4, ht4;
  std::optional<FirstOrderOperator<4>> l4;
  std::vector<NamedState> states;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, Band>> bands;

  std::optional<Seed2x2> seed;           // darboux2x2
  std::optional<DistortionModel> dis;    // distortion
  std::optional<SpinOrbitModel> soc;     // spin_orbit
  std::optional<BlockSeed> block_seed;   // nonreducible
  std::optional<NonHermitianResult> nonherm;
};

namespace detail {

inline FreeParams block_params(const ModelConfig& c, int block) {
  const std::string s = std::to_string(block);
  return {c.get("v" + s), c.get("w" + s), cplx(c.get("re_a" + s), c.get("im_a" + s))};
}

template <int N>
MatrixField<N> shifted(const MatrixField<N>& f, const Mat<N>& shift) {
  if (max_abs(shift) == 0.0) return f;
  MatrixField<N> out{[f, shift](double x) { return Mat<N>(f(x) + shift); }, {}, {}};
  if (f.minus_inf) out.minus_inf = Mat<N>(*f.minus_inf + shift);
  if (f.plus_inf) out.plus_inf = Mat<N>(*f.plus_inf + shift);
  return out;
}

inline SpinorField<4> pad(const SpinorField<2>& s) {
  return {[s](double x) { return stack(s(x), Vec2::Zero()); }, {}};
}

}  // namespace detail

inline BuiltModel build_model(const ModelConfig& c) {
  BuiltModel m;
  m.config = c;
  const Grid grid = c.grid();
  const double shift = c.potential_shift_sigma3;
  switch (c.kind) {
    case ModelKind::free2x2: {
      const FreeParams p{c.get("v"), c.get("w"), cplx(c.get("re_a"), c.get("im_a"))};
      m.h2 = free_operator(p);
      m.ht2 = *m.h2;
      m.ht2->potential = detail::shifted<2>(m.ht2->potential, Mat2(shift * pauli::s3));
      m.l2 = FirstOrderOperator<2>{Mat2::Zero(), MatrixField<2>::constant(Mat2::Identity())};
      m.bands.push_back({"h", band_edges(p)});
      break;
    }
    case ModelKind::darboux2x2: {
      const FreeParams p{c.get("v"), c.get("w"), cplx(c.get("re_a"), c.get("im_a"))};
      const Seed2x2 s = build_seed(p, c.get("eps1"), c.get("eps2"), c.get("delta1"), c.get("delta2"));
      const Transformed2x2 t = transform(s, grid);
      m.seed = s;
      m.h2 = free_operator(p);
      m.ht2 = t.op();
      m.ht2->potential = detail::shifted<2>(m.ht2->potential, Mat2(shift * pauli::s3));
      m.l2 = FirstOrderOperator<2>{Mat2::Identity(), {[s](double x) { return Mat2(-s.kernel(x)); }, {}, {}}};
      m.bands.push_back({"h", band_edges(p)});
      if (s.degenerate())
        m.warnings.push_back("eps1 = eps2: the transformed potential is a constant matrix and has no bound states");
      for (const auto& b : bound_states(t, grid)) {
        const int idx = b.energy == s.eps1 ? 1 : 2;
        m.states.push_back({"P_eps" + std::to_string(idx), b.energy, detail::pad(b.spinor), b.norm,
                            eigen_residual(*m.ht2, b.energy, b.spinor, grid), b.finite_norm});
      }
      break;
    }
    case ModelKind::distortion: {
      const FreeParams p1 = detail::block_params(c, 1), p2 = detail::block_params(c, 2);
      const Seed2x2 s1 = build_seed(p1, c.get("eps1"), c.get("eps2"), c.get("delta1"), c.get("delta2"));
      const Seed2x2 s2 = build_seed(p2, c.get("eps3"), c.get("eps4"), c.get("delta3"), c.get("delta4"));
      m.dim = 4;
      m.dis = build_distortion_model(s1, s2, c.get("alpha"), grid);
      m.h4 = m.dis->H;
      m.ht4 = m.dis->H_t;
      m.ht4->potential = detail::shifted<4>(m.ht4->potential, Mat4(shift * kron(pauli::s0, pauli::s3)));
      m.l4 = m.dis->intertwiner;
      m.bands.push_back({"h1", band_edges(p1)});
      m.bands.push_back({"h2", band_edges(p2)});
      const std::array<double, 4> eps = {s1.eps1, s1.eps2, s2.eps1, s2.eps2};
      for (const auto& b : m.dis->bound_states) {
        int idx = 0;
        for (int k = 0; k < 4; ++k)
          if (b.energy == eps[k] && idx == 0) idx = k + 1;
        m.states.push_back({"P_eps" + std::to_string(idx), b.energy, b.spinor, b.norm,
                            eigen_residual(*m.ht4, b.energy, b.spinor, grid), b.finite_norm});
      }
      break;
    }
    case ModelKind::spin_orbit: {
      const LambdaMode mode = c.lambda_mode == "constant" ? LambdaMode::constant : LambdaMode::equal_to_v1_tilde;
      m.dim = 4;
      m.soc = build_spinorbit_model(c.get("v1"), c.get("eps1"), mode, c.get("lambda_value"), grid);
      m.h4 = m.soc->H;
      m.ht4 = m.soc->H_t;
      m.ht4->potential = detail::shifted<4>(m.ht4->potential, Mat4(shift * kron(pauli::s0, pauli::s3)));
      m.l4 = m.soc->intertwiner;
      m.bands.push_back({"h1", band_edges(m.soc->block1.seed.params)});
      for (const auto& b : m.soc->bound_states) {
        const int idx = b.energy > 0 ? 1 : 2;
        m.states.push_back({"P_eps" + std::to_string(idx), b.energy, b.spinor, b.norm,
                            eigen_residual(*m.ht4, b.energy, b.spinor, grid), b.finite_norm});
      }
      break;
    }
    case ModelKind::nonreducible: {
      BlockSeedParams bp;
      bp.block1 = detail::block_params(c, 1);
      bp.block2 = detail::block_params(c, 2);
      bp.eps1 = c.get("eps1");
      bp.eps2 = c.get("eps2");
      bp.eps3 = c.get("eps3");
      bp.eps4 = c.get("eps4");
      bp.delta1 = c.get("delta1");
      bp.delta2 = c.get("delta2");
      bp.delta3 = c.get("delta3");
      bp.delta4 = c.get("delta4");
      bp.delta3_bar = c.get("delta3_bar");
      bp.delta4_bar = c.get("delta4_bar");
      m.dim = 4;
      m.block_seed = build_block_seed(bp, grid);
      m.nonherm = nonreducible_transform(*m.block_seed, grid);
      m.h4 = m.nonherm->H;
      m.ht4 = m.nonherm->H_t;
      m.ht4->potential = detail::shifted<4>(m.ht4->potential, Mat4(shift * kron(pauli::s0, pauli::s3)));
      m.l4 = m.nonherm->intertwiner;
      m.bands.push_back({"h1", band_edges(bp.block1)});
      m.bands.push_back({"h2", band_edges(bp.block2)});
      NonHermitianResult shifted_result = *m.nonherm;
      shifted_result.H_t = *m.ht4;
      const AdjointMissingSet adj = adjoint_missing_states(*m.block_seed, shifted_result, grid);
      for (int k = 0; k < 4; ++k) {
        const auto& st = adj.states[k];
        m.states.push_back({"P_bar_eps" + std::to_string(k + 1), st.energy, st.spinor, st.norm, st.residual,
                            st.finite_norm});
      }
      break;
    }
  }
  return m;
}

struct Check {
  std::string name;
  std::string status;  // pass, fail, skip
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

struct Report {
  std::string model;
  std::vector<Check> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (c.status == "fail") return false;
    return true;
  }
};

namespace detail {

inline void add_max(Report& r, const std::string& name, double value, double threshold, std::string note = {}) {
  r.checks.push_back({name, std::isfinite(value) && value < threshold ? "pass" : "fail", value, threshold,
                      std::move(note)});
}

inline void add_min(Report& r, const std::string& name, double value, double threshold, std::string note = {}) {
  r.checks.push_back({name, std::isfinite(value) && value > threshold ? "pass" : "fail", value, threshold,
                      std::move(note)});
}

template <int N>
double oracle_gap(const MatrixField<N>& closed, const DarbouxPair<N>& pair, const Grid& grid) {
  double worst = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    worst = std::max(worst, max_abs(Mat<N>(closed(x) - pair.transformed.potential(x))));
  }
  return worst;
}

inline void state_checks(Report& r, const BuiltModel& m, const Grid& grid) {
  const Tolerances& t = m.config.tol;
  for (const auto& s : m.states) {
    std::vector<double> p(grid.size());
    for (int i = 0; i < grid.size(); ++i) p[i] = s.spinor(grid[i]).squaredNorm();
    add_max(r, "bound_state_residual_" + s.name, s.residual, t.bound_residual);
    add_max(r, "bound_state_norm_" + s.name, std::abs(simpson<double>(p, grid.step()) - 1.0), t.norm);
  }
}

inline void asymptotic_check(Report& r, const std::string& name, const Seed2x2& s, double tol) {
  try {
    const AsymptoticIntertwiner as = asymptotics(s);
    const double gap = std::max(max_abs(Mat2(as.w_minus - s.kernel(-30.0))), max_abs(Mat2(as.w_plus - s.kernel(30.0))));
    add_max(r, name, gap, tol);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::degenerate_asymptotics) throw;
    r.checks.push_back({name, "skip", 0.0, tol, e.what()});
  }
}

}  // namespace detail

inline Report cmd_verify(const BuiltModel& m) {
  Report r;
  r.model = kind_name(m.config.kind);
  const ModelConfig& c = m.config;
  const Tolerances& t = c.tol;
  const Grid grid = c.grid();
  DarbouxOptions dopt;
  dopt.tol_seed = t.seed;
  dopt.grid = grid;

  if (m.dim == 2) {
    detail::add_max(r, "hermiticity", hermiticity_defect(m.ht2->potential, grid), t.hermiticity);
    detail::add_max(r, "intertwining",
                    intertwining_residual(*m.h2, *m.ht2, *m.l2, default_test_spinors<2>(), grid), t.intertwining);
  } else if (c.kind != ModelKind::nonreducible) {
    detail::add_max(r, "hermiticity", hermiticity_defect(m.ht4->potential, grid), t.hermiticity);
    detail::add_max(r, "intertwining",
                    intertwining_residual(*m.h4, *m.ht4, *m.l4, default_test_spinors<4>(), grid), t.intertwining);
  }

  switch (c.kind) {
    case ModelKind::free2x2:
      break;
    case ModelKind::darboux2x2: {
      const Seed2x2& s = *m.seed;
      const Regularity reg = regularity(s, grid);
      detail::add_min(r, "regularity_min_abs_D", reg.min_abs_D, 0.0,
                      reg.sufficient_condition_holds ? "sufficient condition holds" : "grid scan only");
      if (!s.degenerate()) {
        const DarbouxPair<2> pair = darboux(*m.h2, s.seed_matrix(), dopt);
        detail::add_max(r, "closed_form_vs_oracle", detail::oracle_gap(m.ht2->potential, pair, grid), t.oracle);
      } else {
        r.checks.push_back({"closed_form_vs_oracle", "skip", 0.0, t.oracle, "degenerate seed"});
      }
      detail::asymptotic_check(r, "asymptotic_w", s, t.asymptotic);
      detail::state_checks(r, m, grid);
      break;
    }
    case ModelKind::distortion: {
      const DistortionModel& d = *m.dis;
      double min_d = std::numeric_limits<double>::infinity();
      for (const Seed2x2* s : {&d.block1.seed, &d.block2.seed}) min_d = std::min(min_d, regularity(*s, grid).min_abs_D);
      detail::add_min(r, "regularity_min_abs_D", min_d, 0.0);
      const DarbouxPair<4> pair = darboux(d.H, d.seed, dopt);
      detail::add_max(r, "closed_form_vs_oracle", detail::oracle_gap(m.ht4->potential, pair, grid), t.oracle);
      double rel = 0.0;
      const double alpha = c.get("alpha");
      for (int i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        const DistortionComponents dc = DistortionComponents::from_matrix(m.ht4->potential(x));
        const FreeParams p1 = d.block1.seed.params, p2 = d.block2.seed.params;
        const double sum = 0.5 * (p1.v + p1.w + p2.v + p2.w);
        const cplx wdiff = std::exp(-I_unit * alpha) * 0.5 * (p1.v + p1.w - p2.v - p2.w);
        const cplx pm = -std::exp(-I_unit * alpha) * (p1.a - p2.a).real();
        rel = std::max({rel, std::abs(dc.V_A + dc.V_B - sum), std::abs(dc.W_B - dc.W_A - wdiff),
                        std::abs(dc.W_minus - dc.W_plus - pm)});
      }
      detail::add_max(r, "relation_suite", rel, t.relation);
      detail::asymptotic_check(r, "asymptotic_w_block1", d.block1.seed, t.asymptotic);
      detail::asymptotic_check(r, "asymptotic_w_block2", d.block2.seed, t.asymptotic);
      detail::state_checks(r, m, grid);
      break;
    }
    case ModelKind::spin_orbit: {
      const SpinOrbitModel& s = *m.soc;
      detail::add_min(r, "regularity_min_abs_D", regularity(s.block1.seed, grid).min_abs_D, 0.0);
      double gap = 0.0, pattern = 0.0;
      for (int i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        gap = std::max(gap, std::abs(s.v1_tilde(x) - soc_v1_tilde(s.v1, s.eps1, x)));
        pattern = std::max(pattern, SpinOrbitComponents::pattern_defect(m.ht4->potential(x)));
      }
      detail::add_max(r, "closed_form_vs_oracle", gap, t.oracle);
      detail::add_max(r, "structure_pattern", pattern, t.pattern);
      detail::asymptotic_check(r, "asymptotic_w", s.block1.seed, t.asymptotic);
      detail::state_checks(r, m, grid);
      break;
    }
    case ModelKind::nonreducible: {
      const NonHermitianResult& nh = *m.nonherm;
      const double defect = hermiticity_defect(m.ht4->potential, grid);
      r.checks.push_back({"hermiticity", "skip", defect, t.hermiticity,
                          "expected non-Hermitian for a non-reducible seed (informational)"});
      double min_d = std::numeric_limits<double>::infinity();
      for (const Seed2x2* s : {&m.block_seed->s1, &m.block_seed->s2})
        min_d = std::min(min_d, regularity(*s, grid).min_abs_D);
      detail::add_min(r, "regularity_min_abs_D", min_d, 0.0);
      double gap = 0.0;
      int skipped = 0;
      const SeedMatrix<4> generic = m.block_seed->seed_matrix();
      for (int i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        // The U3 block makes U numerically rank deficient far out; the plain inverse is meaningless there.
        if (!(dirac_darboux::detail::hadamard_ratio(generic, x) > 1e-8)) {
          ++skipped;
          continue;
        }
        const Mat4 w = seed_kernel(generic, x, dopt);
        const Mat4 oracle = nh.H.potential(x) + nh.H.gamma * w - w * nh.H.gamma;
        gap = std::max(gap, max_abs(Mat4(m.ht4->potential(x) - oracle)) / (1.0 + max_abs(oracle)));
      }
      detail::add_max(r, "closed_form_vs_oracle", gap, t.oracle,
                      "relative to the kernel size; " + std::to_string(skipped) + " ill-conditioned points skipped");
      detail::add_max(r, "intertwining",
                      intertwining_residual(*m.h4, *m.ht4, *m.l4, default_test_spinors<4>(), grid), t.intertwining);
      const FirstOrderOperator<4> ld = m.l4->adjoint();
      const DiracOperator<4> adj = adjoint_operator(*m.ht4);
      detail::add_max(r, "adjoint_intertwining",
                      commutation_residual(as_first_order(*m.h4), ld, ld, as_first_order(adj),
                                           default_test_spinors<4>(), grid),
                      t.intertwining);
      for (const auto& s : m.states) {
        detail::add_max(r, "adjoint_residual_" + s.name, s.residual, t.bound_residual);
        r.checks.push_back({"adjoint_finite_norm_" + s.name, s.finite_norm ? "pass" : "fail", s.norm, 0.0, ""});
      }
      break;
    }
  }
  return r;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

/// Writes to `path.tmp` and renames.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::invalid_input, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error(ErrorKind::invalid_input, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

struct Column {
  std::string name;
  std::function<double(double)> f;
};

inline std::vector<Column> potential_columns(const BuiltModel& m) {
  std::vector<Column> cols;
  auto both = [&cols](const std::string& name, std::function<cplx(double)> f) {
    cols.push_back({"Re_" + name, [f](double x) { return f(x).real(); }});
    cols.push_back({"Im_" + name, [f](double x) { return f(x).imag(); }});
  };
  const ModelConfig& c = m.config;
  if (m.dim == 2) {
    const auto v = m.ht2->potential;
    const std::string suf = c.kind == ModelKind::free2x2 ? "" : "_t";
    both("v" + suf, [v](double x) { return v(x)(0, 0); });
    both("w" + suf, [v](double x) { return v(x)(1, 1); });
    both("a" + suf, [v](double x) { return v(x)(0, 1); });
    return cols;
  }
  const auto v = m.ht4->potential;
  switch (c.kind) {
    case ModelKind::distortion: {
      using DC = DistortionComponents;
      const std::vector<std::pair<std::string, std::function<cplx(const DC&)>>> names = {
          {"V_A", [](const DC& d) { return cplx(d.V_A); }},
          {"V_B", [](const DC& d) { return cplx(d.V_B); }},
          {"V", [](const DC& d) { return d.V; }},
          {"V_prime", [](const DC& d) { return d.V_prime; }},
          {"W_A", [](const DC& d) { return d.W_A; }},
          {"W_B", [](const DC& d) { return d.W_B; }},
          {"W_plus", [](const DC& d) { return d.W_plus; }},
          {"W_minus", [](const DC& d) { return d.W_minus; }}};
      for (const auto& [name, get] : names)
        both(name, [v, get = get](double x) { return get(DC::from_matrix(v(x))); });
      break;
    }
    case ModelKind::spin_orbit: {
      using SC = SpinOrbitComponents;
      const std::vector<std::pair<std::string, double SC::*>> names = {
          {"V", &SC::V}, {"Delta", &SC::Delta}, {"lambda", &SC::lambda}};
      for (const auto& [name, ptr] : names)
        both(name, [v, ptr = ptr](double x) { return cplx(SC::from_matrix(v(x)).*ptr); });
      break;
    }
    default:
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          both("V_" + std::to_string(i + 1) + std::to_string(j + 1), [v, i, j](double x) { return v(x)(i, j); });
  }
  return cols;
}

inline std::string table_csv(const std::vector<Column>& cols, const Grid& grid) {
  std::ostringstream out;
  out << "x";
  for (const auto& c : cols) out << ',' << c.name;
  out << '\n';
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    out << format_double(x);
    for (const auto& c : cols) out << ',' << format_double(c.f(x));
    out << '\n';
  }
  return out.str();
}

inline std::string potentials_csv(const BuiltModel& m) { return table_csv(potential_columns(m), m.config.grid()); }

/// Empty when the model has no bound states.
inline std::string bound_states_csv(const BuiltModel& m) {
  if (m.states.empty()) return {};
  std::vector<Column> cols;
  for (const auto& s : m.states) {
    auto sp = s.spinor;
    cols.push_back({s.name, [sp](double x) { return sp(x).squaredNorm(); }});
  }
  return table_csv(cols, m.config.grid());
}

inline json matrix_json(const Eigen::MatrixXcd& mtx) {
  json rows = json::array();
  for (int i = 0; i < mtx.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < mtx.cols(); ++j) row.push_back({mtx(i, j).real(), mtx(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline json model_json(const BuiltModel& m) {
  json j;
  j["model"] = kind_name(m.config.kind);
  json params = json::object();
  for (const auto& [k, v] : m.config.numbers) params[k] = v;
  if (m.config.kind == ModelKind::spin_orbit) params["lambda_mode"] = m.config.lambda_mode;
  if (m.config.potential_shift_sigma3 != 0.0) params["potential_shift_sigma3"] = m.config.potential_shift_sigma3;
  j["parameters"] = params;
  j["grid"] = {{"x_min", m.config.grid_x_min}, {"x_max", m.config.grid_x_max}, {"n_points", m.config.grid_n}};
  json bands = json::object();
  for (const auto& [name, b] : m.bands) bands[name] = {{"eps_minus", b.eps_minus}, {"eps_plus", b.eps_plus}};
  j["band_edges"] = bands;
  json limits = json::object();
  auto put = [&limits](const char* side, const std::optional<Eigen::MatrixXcd>& mtx) {
    limits[side] = mtx ? matrix_json(*mtx) : json(nullptr);
  };
  if (m.dim == 2) {
    const auto& v = m.ht2->potential;
    put("minus", v.minus_inf ? std::optional<Eigen::MatrixXcd>(*v.minus_inf) : std::nullopt);
    put("plus", v.plus_inf ? std::optional<Eigen::MatrixXcd>(*v.plus_inf) : std::nullopt);
  } else {
    const auto& v = m.ht4->potential;
    put("minus", v.minus_inf ? std::optional<Eigen::MatrixXcd>(*v.minus_inf) : std::nullopt);
    put("plus", v.plus_inf ? std::optional<Eigen::MatrixXcd>(*v.plus_inf) : std::nullopt);
  }
  j["asymptotic_limits"] = limits;
  json states = json::array();
  for (const auto& s : m.states)
    states.push_back({{"name", s.name}, {"energy", s.energy}, {"norm", s.norm}, {"finite_norm", s.finite_norm}});
  j["bound_states"] = states;
  j["warnings"] = m.warnings;
  return j;
}

inline void cmd_build(const BuiltModel& m, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  atomic_write(out_dir / "potentials.csv", potentials_csv(m));
  atomic_write(out_dir / "bound_states.csv", bound_states_csv(m));
  atomic_write(out_dir / "model.json", model_json(m).dump(2) + "\n");
}

struct ScatterRow {
  double energy = 0.0;
  std::string status;  // pass or skip
  std::string reason;
  ScatteringResult result;
};

inline std::vector<ScatterRow> cmd_scatter(const BuiltModel& m, const std::vector<double>& energies,
                                           const ScatterOptions& opt = {}) {
  std::vector<ScatterRow> rows;
  for (double e : energies) {
    ScatterRow row;
    row.energy = e;
    try {
      row.result = m.dim == 2 ? reflection_transmission(*m.ht2, e, opt) : reflection_transmission(*m.ht4, e, opt);
      row.status = "ok";
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::not_a_scattering_energy && err.kind() != ErrorKind::one_sided_scattering) throw;
      row.status = "skip";
      row.reason = err.kind() == ErrorKind::not_a_scattering_energy ? "in band" : "evanescent channels";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string scatter_csv(const std::vector<ScatterRow>& rows) {
  std::ostringstream out;
  out << "E,Re_R,Im_R,abs_R,abs_T,flux_defect,L_used,status,reason\n";
  for (const auto& r : rows) {
    out << format_double(r.energy);
    if (r.status == "skip") {
      out << ",,,,,,,skip," << r.reason << '\n';
      continue;
    }
    const ScatteringResult& s = r.result;
    out << ',' << format_double(s.R.real()) << ',' << format_double(s.R.imag()) << ',' << format_double(std::abs(s.R))
        << ',' << format_double(std::sqrt(s.transmission)) << ',' << format_double(s.flux_defect) << ','
        << format_double(s.box_halfwidth) << ",ok,\n";
  }
  return out.str();
}

inline json report_json(const Report& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"status", c.status},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"note", c.note}});
  return {{"model", r.model}, {"status", r.passed() ? "pass" : "fail"}, {"checks", checks}};
}

inline std::string report_text(const Report& r) {
  std::ostringstream out;
  for (const auto& c : r.checks) {
    out << c.status << ' ' << c.name << " value=" << format_double(c.value) << " threshold=" << format_double(c.threshold);
    if (!c.note.empty()) out << " (" << c.note << ')';
    out << '\n';
  }
  out << "overall " << (r.passed() ? "pass" : "fail") << '\n';
  return out.str();
}

inline std::vector<double> parse_energies(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double e = std::strtod(item.c_str(), &end);
    if (item.empty() || end == item.c_str() || *end != '\0' || !std::isfinite(e))
      throw Error(ErrorKind::invalid_input, "invalid energy '" + item + "'");
    out.push_back(e);
  }
  if (out.empty()) throw Error(ErrorKind::invalid_input, "no energies given");
  return out;
}

inline int exit_code(const Error& e) { return is_input_error(e.kind()) ? 2 : 3; }

}  // namespace dirac_darboux::cli
