#include "netspde/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "netspde/errors.hpp"
#include "netspde/semigroup.hpp"

namespace netspde {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<FunctionalSpec> default_functionals(const SimProblem& p) {
  std::vector<FunctionalSpec> out;
  for (int v = 0; v < p.graph.n_vertices; ++v)
    out.push_back({Functional::TerminalNode, v,
                   "terminal_node:" + std::to_string(v + 1)});
  out.push_back({Functional::TerminalMass, 0, "terminal_mass"});
  out.push_back({Functional::TerminalNorm2, 0, "terminal_norm2"});
  return out;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ComputeError("cannot write " + tmp);
    out << contents;
    if (!out) throw ComputeError("short write on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::map<std::string, std::string> pipeline_simulate(const RunConfig& cfg) {
  SimProblem p = build_problem(cfg);

  // paths.csv: node values plus the mid-edge probes at every snapshot
  std::string paths_csv = "path_id,t";
  for (int v = 0; v < p.graph.n_vertices; ++v)
    paths_csv += ",d_" + std::to_string(v + 1);
  for (int j = 0; j < p.graph.n_edges(); ++j)
    paths_csv += ",u" + std::to_string(j + 1) + "_mid";
  paths_csv += "\n";

  const int mid = p.afrak.n_x / 2;
  std::vector<std::string> rows(static_cast<std::size_t>(cfg.n_paths));
  std::vector<Trajectory> trajectories(static_cast<std::size_t>(cfg.n_paths));
  for (int i = 0; i < cfg.n_paths; ++i)
    trajectories[static_cast<std::size_t>(i)] =
        simulate_path(p, static_cast<std::uint64_t>(i) + 1);
  for (int i = 0; i < cfg.n_paths; ++i) {
    const Trajectory& traj = trajectories[static_cast<std::size_t>(i)];
    std::string& block = rows[static_cast<std::size_t>(i)];
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
      block += std::to_string(i + 1) + "," + fmt(traj.times[s]);
      const FullState& x = traj.states[s];
      for (int v = 0; v < p.graph.n_vertices; ++v)
        block += "," + fmt(x.d(v));
      for (int j = 0; j < p.graph.n_edges(); ++j)
        block += "," + fmt(x.u(mid, j));
      block += "\n";
    }
  }
  for (const std::string& block : rows) paths_csv += block;

  std::string mc_csv = "functional,mean,variance,ci_lo,ci_hi,n_paths\n";
  if (cfg.n_paths >= 2 && p.t_final > 0.0) {
    const auto stats = monte_carlo(p, cfg.n_paths, default_functionals(p));
    for (const auto& s : stats)
      mc_csv += s.name + "," + fmt(s.mean) + "," + fmt(s.variance) + "," +
                fmt(s.ci_lo) + "," + fmt(s.ci_hi) + "," +
                std::to_string(s.n_paths) + "\n";
  }

  return {{"paths.csv", paths_csv}, {"mc_summary.csv", mc_csv}};
}

std::map<std::string, std::string> pipeline_analyze_semigroup(
    const RunConfig& cfg) {
  SimProblem p = build_problem(cfg);
  const BlockGenerator gen = build_generator(p, cfg.n_theta);
  const Matrix a_full = gen.a();
  const double abscissa = spectral_abscissa(a_full);

  std::string csv =
      "t,norm_T,spectral_abscissa,dp_residual_N1,dp_residual_N2,dp_residual_"
      "N3,dp_residual_N4,mv_q\n";
  for (double t : cfg.semigroup_t_list) {
    const Matrix tt = expm(a_full, t);
    const double norm_t = weighted_operator_norm(tt, gen.weights);
    csv += fmt(t) + "," + fmt(norm_t) + "," + fmt(abscissa);
    for (int n = 1; n <= 4; ++n) {
      const SemigroupOperator dp = dyson_phillips(gen, t, n);
      csv += "," + fmt(weighted_operator_norm(dp.op - tt, gen.weights));
    }
    csv += "," + fmt(miyadera_voigt_bound(p.mu, p.node_b, t)) + "\n";
  }
  return {{"semigroup.csv", csv}};
}

std::map<std::string, std::string> pipeline_converge(const RunConfig& cfg) {
  if (cfg.converge_dt_list.empty() || cfg.converge_n_paths < 2)
    throw ValidationError(
        "converge: section with dt_list and n_paths >= 2 required");
  SimProblem p = build_problem(cfg);
  const StrongOrderResult r =
      strong_order_estimate(p, cfg.converge_dt_list, cfg.converge_n_paths);
  std::string csv = "dt,mean_err,slope\n";
  for (std::size_t i = 0; i < r.dt_values.size(); ++i)
    csv += fmt(r.dt_values[i]) + "," + fmt(r.mean_errors[i]) + "," +
           fmt(r.slope) + "\n";
  return {{"convergence.csv", csv}};
}

std::map<std::string, std::string> pipeline_control_tournament(
    const RunConfig& cfg) {
  SimProblem p = build_problem(cfg);
  if (!cfg.control || cfg.control->tournament.size() < 2)
    throw ValidationError(
        "control.tournament: needs at least two policy entries");
  const ControlProblem prob = build_control_problem(cfg);
  const BlockGenerator gen = build_generator(p, cfg.n_theta);
  std::vector<Policy> policies;
  for (const std::string& text : cfg.control->tournament)
    policies.push_back(build_policy(text, prob, p, gen));
  const auto report =
      policy_tournament(prob, policies, p, gen, cfg.control->n_paths);
  std::string csv = "policy,j_mean,ci_lo,ci_hi,rank,ci_overlaps_next\n";
  for (const auto& e : report)
    csv += e.policy + "," + fmt(e.j_mean) + "," + fmt(e.ci_lo) + "," +
           fmt(e.ci_hi) + "," + std::to_string(e.rank) + "," +
           (e.ci_overlaps_next ? "1" : "0") + "\n";
  return {{"tournament.csv", csv}};
}

int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_dir,
                const CommandOverrides& overrides) {
  const auto wall_start = std::chrono::steady_clock::now();
  try {
    RunConfig cfg = load_config(config_path);
    if (overrides.seed) cfg.master_seed = *overrides.seed;
    if (overrides.n_paths) {
      cfg.n_paths = *overrides.n_paths;
      cfg.converge_n_paths = *overrides.n_paths;
      if (cfg.control) cfg.control->n_paths = *overrides.n_paths;
    }

    std::map<std::string, std::string> outputs;
    if (command == "validate-config") {
      build_problem(cfg);  // full validation, no outputs
      std::cout << "config ok\n";
      return 0;
    } else if (command == "simulate") {
      outputs = pipeline_simulate(cfg);
    } else if (command == "analyze-semigroup") {
      outputs = pipeline_analyze_semigroup(cfg);
    } else if (command == "converge") {
      outputs = pipeline_converge(cfg);
    } else if (command == "control-tournament") {
      outputs = pipeline_control_tournament(cfg);
    } else {
      std::cerr << "unknown command: " << command << "\n";
      return 2;
    }

    std::filesystem::create_directories(out_dir);
    for (const auto& [name, contents] : outputs)
      write_file_atomic(out_dir + "/" + name, contents);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      wall_start)
            .count();
    std::string manifest = "{\n";
    manifest += "  \"schema\": \"netspde-manifest/1\",\n";
    manifest += "  \"artifact_version\": \"0.1.0\",\n";
    manifest += "  \"command\": \"" + command + "\",\n";
    manifest += "  \"config_hash\": \"fnv1a64:" + fnv1a_hex(cfg.raw_text) + "\",\n";
    manifest += "  \"master_seed\": " + std::to_string(cfg.master_seed) + ",\n";
    manifest += "  \"wall_clock_sec\": " + fmt(wall) + ",\n";
    manifest += "  \"outputs\": {\n";
    bool first = true;
    for (const auto& [name, contents] : outputs) {
      if (!first) manifest += ",\n";
      first = false;
      manifest += "    \"" + name + "\": \"fnv1a64:" + fnv1a_hex(contents) + "\"";
    }
    manifest += "\n  }\n}\n";
    write_file_atomic(out_dir + "/manifest.json", manifest);
    return 0;
  } catch (const ConfigParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "compute error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace netspde
