#pragma once

#include <optional>
#include <string>
#include <vector>

#include "netspde/control.hpp"
#include "netspde/sde.hpp"

namespace netspde {

/// Parsed and validated run configuration. The on-disk format is a strict
/// JSON document: unknown fields are rejected, every field is checked
/// against the module contracts before any computation starts.
struct RunConfig {
  std::string schema_version;

  // graph
  int n_vertices = 0;
  std::vector<std::pair<int, int>> edges_1based;

  // grid + coefficients
  int n_x = 0;
  std::vector<std::string> coefficient_profiles;  // per edge

  // boundary
  std::vector<double> b;
  bool conservative = false;
  bool zero_flux = false;

  // delay
  double delay_r = 1.0;
  int n_theta = 1;
  std::vector<std::pair<double, double>> delay_atoms;
  std::string delay_density = "none";

  // initial data
  std::vector<std::string> initial_u;  // per edge
  std::string initial_eta = "hold";

  // noise / drift catalog entries
  std::string noise_g = "zero";
  std::string noise_g_tilde = "zero";
  std::string drift_f = "zero";

  // sde
  double dt = 0.0;
  double t_final = 0.0;
  int n_paths = 2;
  std::uint64_t master_seed = 0;
  int snapshot_stride = 1;
  std::string scheme = "euler_maruyama";

  // analyze-semigroup options
  std::vector<double> semigroup_t_list = {0.25, 0.5, 0.75, 1.0};
  int semigroup_dp_terms = 4;

  // converge options
  std::vector<double> converge_dt_list;
  int converge_n_paths = 0;

  // control options
  struct ControlSection {
    double q_x = 0.0;
    double q_z = 1.0;
    double q_t = 0.0;
    double z_max = 1.0;
    std::string policy = "constant:0";
    std::vector<std::string> tournament;
    int n_paths = 0;
  };
  std::optional<ControlSection> control;

  std::string raw_text;  // original file contents, hashed into the manifest
};

/// Parses the JSON document at `path`. Throws ConfigParseError for malformed
/// JSON and ValidationError (with the offending field path in the message)
/// for schema violations.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Catalog-entry parser shared by noise/drift/coefficient/initial fields:
/// "name" or "name(p1)" or "name(p1,p2)".
struct CatalogEntry {
  std::string name;
  std::vector<double> params;
};
CatalogEntry parse_catalog_entry(const std::string& text,
                                 const std::string& field);

CoeffFn make_coeff_fn(const std::string& text, const std::string& field,
                      bool node_context);

/// Builds the integration context from a validated config.
SimProblem build_problem(const RunConfig& cfg);

/// Assembles the full generator of the configured problem.
BlockGenerator build_generator(const SimProblem& p, int n_theta);

/// Builds a policy from its config string representation; the riccati
/// costate map is computed on `gen`.
Policy build_policy(const std::string& text, const ControlProblem& prob,
                    const SimProblem& p, const BlockGenerator& gen);

ControlProblem build_control_problem(const RunConfig& cfg);

}  // namespace netspde
