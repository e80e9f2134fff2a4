#include "netspde/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netspde/errors.hpp"

namespace netspde {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& path) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ValidationError(path + "." + key + ": unknown field");
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key))
    throw ValidationError(path + "." + key + ": missing required field");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(path + "." + key + ": wrong type");
  }
}

template <typename T>
T optional_field(const json& obj, const std::string& key,
                 const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(path + "." + key + ": wrong type");
  }
}

}  // namespace

CatalogEntry parse_catalog_entry(const std::string& text,
                                 const std::string& field) {
  CatalogEntry entry;
  const auto open = text.find('(');
  if (open == std::string::npos) {
    entry.name = text;
    return entry;
  }
  if (text.back() != ')')
    throw ValidationError(field + ": malformed catalog entry '" + text + "'");
  entry.name = text.substr(0, open);
  std::string args = text.substr(open + 1, text.size() - open - 2);
  std::stringstream ss(args);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    try {
      entry.params.push_back(std::stod(piece));
    } catch (...) {
      throw ValidationError(field + ": bad numeric parameter in '" + text +
                            "'");
    }
  }
  return entry;
}

CoeffFn make_coeff_fn(const std::string& text, const std::string& field,
                      bool node_context) {
  const CatalogEntry e = parse_catalog_entry(text, field);
  const auto need = [&](std::size_t n) {
    if (e.params.size() != n)
      throw ValidationError(field + ": '" + e.name + "' expects " +
                            std::to_string(n) + " parameter(s)");
  };
  CoeffFn fn;
  if (e.name == "zero") {
    need(0);
    fn.kind = CoeffFn::Kind::Zero;
  } else if (e.name == "constant") {
    need(1);
    fn.kind = CoeffFn::Kind::Constant;
    fn.p1 = e.params[0];
  } else if (e.name == "clipped_linear") {
    need(2);
    fn.kind = CoeffFn::Kind::ClippedLinear;
    fn.p1 = e.params[0];
    fn.p2 = e.params[1];
  } else if (e.name == "sin_modulated") {
    need(1);
    fn.kind = CoeffFn::Kind::SinModulated;
    fn.p1 = e.params[0];
  } else if (e.name == "sin_delay") {
    need(1);
    if (!node_context)
      throw ValidationError(field + ": sin_delay is node-only");
    fn.kind = CoeffFn::Kind::SinDelay;
    fn.p1 = e.params[0];
  } else {
    throw ValidationError(field + ": unknown catalog entry '" + e.name + "'");
  }
  return fn;
}

RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigParseError(std::string("config is not valid JSON: ") +
                           e.what());
  }
  if (!root.is_object()) throw ConfigParseError("config root must be an object");

  RunConfig cfg;
  cfg.raw_text = text;
  check_keys(root,
             {"schema_version", "graph", "grid", "coefficients", "boundary",
              "delay", "initial", "noise", "drift", "sde", "semigroup",
              "converge", "control"},
             "config");

  cfg.schema_version = require<std::string>(root, "schema_version", "config");
  if (cfg.schema_version != "1")
    throw ValidationError("config.schema_version: expected \"1\"");

  {
    const json& g = require<json>(root, "graph", "config");
    check_keys(g, {"n_vertices", "edges"}, "graph");
    cfg.n_vertices = require<int>(g, "n_vertices", "graph");
    const json& edges = require<json>(g, "edges", "graph");
    if (!edges.is_array() || edges.empty())
      throw ValidationError("graph.edges: must be a non-empty list");
    for (const auto& e : edges) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        throw ValidationError("graph.edges: entries must be [tail, head]");
      cfg.edges_1based.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  {
    const json& g = require<json>(root, "grid", "config");
    check_keys(g, {"n_x"}, "grid");
    cfg.n_x = require<int>(g, "n_x", "grid");
    if (cfg.n_x < 3) throw ValidationError("grid.n_x: must be >= 3");
  }
  {
    const json& c = require<json>(root, "coefficients", "config");
    check_keys(c, {"c"}, "coefficients");
    const json& entries = require<json>(c, "c", "coefficients");
    const auto to_profile = [](const json& v) -> std::string {
      if (v.is_number()) return "constant(" + std::to_string(v.get<double>()) + ")";
      if (v.is_string()) return v.get<std::string>();
      throw ValidationError("coefficients.c: entries must be numbers or names");
    };
    if (entries.is_array())
      for (const auto& v : entries) cfg.coefficient_profiles.push_back(to_profile(v));
    else
      cfg.coefficient_profiles.push_back(to_profile(entries));
    const std::size_t m = cfg.edges_1based.size();
    if (cfg.coefficient_profiles.size() == 1)
      cfg.coefficient_profiles.assign(m, cfg.coefficient_profiles[0]);
    if (cfg.coefficient_profiles.size() != m)
      throw ValidationError("coefficients.c: expected one entry or one per edge");
  }
  {
    const json& b = require<json>(root, "boundary", "config");
    check_keys(b, {"b", "conservative", "zero_flux"}, "boundary");
    cfg.b = require<std::vector<double>>(b, "b", "boundary");
    if (static_cast<int>(cfg.b.size()) != cfg.n_vertices)
      throw ValidationError("boundary.b: needs one entry per vertex");
    cfg.conservative = optional_field(b, "conservative", "boundary", false);
    cfg.zero_flux = optional_field(b, "zero_flux", "boundary", false);
  }
  {
    const json& d = require<json>(root, "delay", "config");
    check_keys(d, {"r", "n_theta", "atoms", "density"}, "delay");
    cfg.delay_r = require<double>(d, "r", "delay");
    cfg.n_theta = require<int>(d, "n_theta", "delay");
    if (cfg.n_theta < 1) throw ValidationError("delay.n_theta: must be >= 1");
    if (d.contains("atoms")) {
      const json& atoms = d.at("atoms");
      if (!atoms.is_array())
        throw ValidationError("delay.atoms: must be a list of [theta, weight]");
      for (const auto& a : atoms) {
        if (!a.is_array() || a.size() != 2)
          throw ValidationError("delay.atoms: entries must be [theta, weight]");
        cfg.delay_atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
      }
    }
    cfg.delay_density = optional_field<std::string>(d, "density", "delay", "none");
  }
  {
    const json& ini = require<json>(root, "initial", "config");
    check_keys(ini, {"u", "eta"}, "initial");
    const json& u = require<json>(ini, "u", "initial");
    if (u.is_string())
      cfg.initial_u.assign(cfg.edges_1based.size(), u.get<std::string>());
    else if (u.is_array()) {
      for (const auto& v : u) cfg.initial_u.push_back(v.get<std::string>());
      if (cfg.initial_u.size() != cfg.edges_1based.size())
        throw ValidationError("initial.u: expected one entry or one per edge");
    } else {
      throw ValidationError("initial.u: must be a string or list of strings");
    }
    cfg.initial_eta = optional_field<std::string>(ini, "eta", "initial", "hold");
  }
  {
    const json& n = require<json>(root, "noise", "config");
    check_keys(n, {"g", "g_tilde"}, "noise");
    cfg.noise_g = require<std::string>(n, "g", "noise");
    cfg.noise_g_tilde = require<std::string>(n, "g_tilde", "noise");
  }
  {
    const json& d = require<json>(root, "drift", "config");
    check_keys(d, {"f"}, "drift");
    cfg.drift_f = require<std::string>(d, "f", "drift");
  }
  {
    const json& s = require<json>(root, "sde", "config");
    check_keys(s,
               {"dt", "t_final", "n_paths", "master_seed", "snapshot_stride",
                "scheme"},
               "sde");
    cfg.dt = require<double>(s, "dt", "sde");
    cfg.t_final = require<double>(s, "t_final", "sde");
    cfg.n_paths = optional_field(s, "n_paths", "sde", 2);
    cfg.master_seed = optional_field<std::uint64_t>(s, "master_seed", "sde", 0);
    cfg.snapshot_stride = optional_field(s, "snapshot_stride", "sde", 1);
    cfg.scheme = optional_field<std::string>(s, "scheme", "sde", "euler_maruyama");
    if (cfg.scheme != "euler_maruyama" && cfg.scheme != "exponential_euler")
      throw ValidationError("sde.scheme: must be euler_maruyama or exponential_euler");
    if (!(cfg.dt > 0.0)) throw ValidationError("sde.dt: must be > 0");
    if (cfg.t_final < 0.0) throw ValidationError("sde.t_final: must be >= 0");
    if (cfg.snapshot_stride < 1)
      throw ValidationError("sde.snapshot_stride: must be >= 1");
  }
  if (root.contains("semigroup")) {
    const json& s = root.at("semigroup");
    check_keys(s, {"t_list", "dp_terms"}, "semigroup");
    cfg.semigroup_t_list = optional_field(s, "t_list", "semigroup",
                                          cfg.semigroup_t_list);
    cfg.semigroup_dp_terms = optional_field(s, "dp_terms", "semigroup", 4);
  }
  if (root.contains("converge")) {
    const json& s = root.at("converge");
    check_keys(s, {"dt_list", "n_paths"}, "converge");
    cfg.converge_dt_list =
        require<std::vector<double>>(s, "dt_list", "converge");
    cfg.converge_n_paths = require<int>(s, "n_paths", "converge");
  }
  if (root.contains("control")) {
    const json& c = root.at("control");
    check_keys(c, {"l", "phi", "z_max", "policy", "tournament", "n_paths"},
               "control");
    RunConfig::ControlSection sec;
    const json& l = require<json>(c, "l", "control");
    check_keys(l, {"catalog", "q_x", "q_z"}, "control.l");
    const std::string catalog =
        optional_field<std::string>(l, "catalog", "control.l", "quadratic");
    if (catalog != "quadratic")
      throw ValidationError("control.l.catalog: only 'quadratic' is available");
    sec.q_x = require<double>(l, "q_x", "control.l");
    sec.q_z = require<double>(l, "q_z", "control.l");
    const json& phi = require<json>(c, "phi", "control");
    check_keys(phi, {"catalog", "q_t"}, "control.phi");
    sec.q_t = require<double>(phi, "q_t", "control.phi");
    sec.z_max = require<double>(c, "z_max", "control");
    sec.policy = optional_field<std::string>(c, "policy", "control",
                                             "constant:0");
    sec.tournament = optional_field(c, "tournament", "control",
                                    std::vector<std::string>{});
    sec.n_paths = optional_field(c, "n_paths", "control", 200);
    cfg.control = sec;
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigParseError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

std::function<double(double)> profile_fn(const std::string& text,
                                         const std::string& field) {
  const CatalogEntry e = parse_catalog_entry(text, field);
  const auto need = [&](std::size_t n) {
    if (e.params.size() != n)
      throw ValidationError(field + ": '" + e.name + "' expects " +
                            std::to_string(n) + " parameter(s)");
  };
  if (e.name == "constant") {
    need(1);
    const double v = e.params[0];
    return [v](double) { return v; };
  }
  if (e.name == "affine") {
    need(2);
    const double a = e.params[0], b = e.params[1];
    return [a, b](double x) { return a + b * x; };
  }
  if (e.name == "sin_pi") {
    need(1);
    const double amp = e.params[0];
    return [amp](double x) { return amp * std::sin(M_PI * x); };
  }
  if (e.name == "bump") {
    need(1);
    const double amp = e.params[0];
    return [amp](double x) { return amp * x * (1.0 - x); };
  }
  throw ValidationError(field + ": unknown profile '" + e.name + "'");
}

}  // namespace

SimProblem build_problem(const RunConfig& cfg) {
  SimProblem p;
  try {
    p.graph = build_graph(cfg.n_vertices, cfg.edges_1based);
  } catch (const Error& e) {
    throw ValidationError(std::string("graph: ") + e.what());
  }

  std::vector<std::function<double(double)>> profiles;
  for (std::size_t j = 0; j < cfg.coefficient_profiles.size(); ++j)
    profiles.push_back(profile_fn(cfg.coefficient_profiles[j],
                                  "coefficients.c[" + std::to_string(j + 1) +
                                      "]"));
  p.coeff = make_edge_coefficient(p.graph.n_edges(), cfg.n_x, profiles);

  p.node_b.b = Eigen::Map<const Vector>(cfg.b.data(),
                                        static_cast<Index>(cfg.b.size()));
  p.node_b.conservative = cfg.conservative;
  p.afrak = assemble_a_frak(p.graph, p.coeff, p.node_b, cfg.zero_flux);

  p.mu.r = cfg.delay_r;
  p.mu.atoms = cfg.delay_atoms;
  {
    const CatalogEntry d = parse_catalog_entry(cfg.delay_density, "delay.density");
    if (d.name == "none") {
      p.mu.density = DelayMeasure::Density::None;
    } else if (d.name == "uniform") {
      if (d.params.size() != 1)
        throw ValidationError("delay.density: uniform expects one parameter");
      p.mu.density = DelayMeasure::Density::Uniform;
      p.mu.density_mass = d.params[0];
    } else {
      throw ValidationError("delay.density: unknown entry '" + d.name + "'");
    }
  }
  validate_delay_measure(p.mu);

  p.noise.g = make_coeff_fn(cfg.noise_g, "noise.g", false);
  p.noise.g_tilde = make_coeff_fn(cfg.noise_g_tilde, "noise.g_tilde", true);
  p.drift.f = make_coeff_fn(cfg.drift_f, "drift.f", false);

  p.dt = cfg.dt;
  p.t_final = cfg.t_final;
  p.master_seed = cfg.master_seed;
  p.snapshot_stride = cfg.snapshot_stride;
  p.scheme = cfg.scheme == "exponential_euler"
                 ? SimProblem::Scheme::ExponentialEuler
                 : SimProblem::Scheme::EulerMaruyama;

  // time step locked to the delay grid
  try {
    slots_for_step(p.dt, p.mu.r / static_cast<double>(cfg.n_theta));
  } catch (const Error& e) {
    throw ValidationError(std::string("sde.dt: ") + e.what());
  }
  if (p.t_final > 0.0) {
    const double steps = p.t_final / p.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9)
      throw ValidationError("sde.t_final: must be an integer multiple of sde.dt");
  }

  // initial state
  FullState x0;
  x0.u.resize(cfg.n_x, p.graph.n_edges());
  const double h = p.coeff.h();
  for (int j = 0; j < p.graph.n_edges(); ++j) {
    const auto fn = profile_fn(cfg.initial_u[static_cast<std::size_t>(j)],
                               "initial.u[" + std::to_string(j + 1) + "]");
    for (int k = 0; k < cfg.n_x; ++k) x0.u(k, j) = fn(k * h);
  }
  try {
    x0.d = boundary_trace(x0, p.graph, 1e-9);
  } catch (const Error& e) {
    throw ValidationError(std::string("initial.u: ") + e.what());
  }
  refresh_trace_rows(x0, p.graph);

  x0.eta.r = cfg.delay_r;
  x0.eta.values.resize(cfg.n_theta + 1, p.graph.n_vertices);
  {
    const CatalogEntry e = parse_catalog_entry(cfg.initial_eta, "initial.eta");
    for (int v = 0; v < p.graph.n_vertices; ++v) {
      for (int l = 0; l <= cfg.n_theta; ++l) {
        const double frac = static_cast<double>(l) / cfg.n_theta;  // 0 at -r
        double value;
        if (e.name == "hold") {
          value = x0.d(v);
        } else if (e.name == "constant") {
          if (e.params.size() != 1)
            throw ValidationError("initial.eta: constant expects one parameter");
          value = e.params[0];
        } else if (e.name == "ramp") {
          if (e.params.size() != 1)
            throw ValidationError("initial.eta: ramp expects one parameter");
          value = e.params[0] + frac * (x0.d(v) - e.params[0]);
        } else {
          throw ValidationError("initial.eta: unknown entry '" + e.name + "'");
        }
        x0.eta.values(l, v) = value;
      }
      if (std::abs(x0.eta.values(cfg.n_theta, v) - x0.d(v)) > 1e-9)
        throw ValidationError(
            "initial.eta: history must end at the initial node value "
            "(eta(0) = d)");
      x0.eta.values(cfg.n_theta, v) = x0.d(v);
    }
  }
  p.x0 = std::move(x0);
  prepare(p);
  return p;
}

BlockGenerator build_generator(const SimProblem& p, int n_theta) {
  return assemble_full_generator(p.afrak, p.mu, n_theta);
}

ControlProblem build_control_problem(const RunConfig& cfg) {
  if (!cfg.control)
    throw ValidationError("control: section required for this command");
  ControlProblem prob;
  prob.q_x = cfg.control->q_x;
  prob.q_z = cfg.control->q_z;
  prob.q_t = cfg.control->q_t;
  prob.z_max = cfg.control->z_max;
  validate_control_problem(prob);
  return prob;
}

Policy build_policy(const std::string& text, const ControlProblem& prob,
                    const SimProblem& p, const BlockGenerator& gen) {
  Policy policy;
  policy.name = text;
  if (text.rfind("constant:", 0) == 0) {
    policy.kind = Policy::Kind::Constant;
    const std::string args = text.substr(9);
    std::vector<double> values;
    std::stringstream ss(args);
    std::string piece;
    while (std::getline(ss, piece, ','))
      values.push_back(std::stod(piece));
    if (values.size() == 1)
      policy.zbar = Vector::Constant(p.graph.n_vertices, values[0]);
    else if (static_cast<int>(values.size()) == p.graph.n_vertices)
      policy.zbar = Eigen::Map<const Vector>(values.data(),
                                             static_cast<Index>(values.size()));
    else
      throw ValidationError(
          "control.policy: constant needs one value or one per vertex");
    return policy;
  }
  if (text == "feedback:riccati") {
    policy.kind = Policy::Kind::Feedback;
    policy.costate = riccati_costate_map(prob, p, gen);
    return policy;
  }
  if (text.rfind("feedback:file:", 0) == 0) {
    policy.kind = Policy::Kind::Feedback;
    const std::string path = text.substr(14);
    std::ifstream in(path);
    if (!in)
      throw ValidationError("control.policy: cannot open matrix file " + path);
    const int dim = gen.dim();
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        if (!(in >> m(i, j)))
          throw ValidationError("control.policy: matrix file " + path +
                                " too short (need " + std::to_string(dim) +
                                "x" + std::to_string(dim) + ")");
    policy.costate = std::move(m);
    return policy;
  }
  throw ValidationError("control.policy: unknown policy '" + text + "'");
}

}  // namespace netspde
