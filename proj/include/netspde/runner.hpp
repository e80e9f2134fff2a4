#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "netspde/config.hpp"

namespace netspde {

/// FNV-1a 64-bit checksum, hex-encoded; used for the manifest.
std::string fnv1a_hex(const std::string& bytes);

/// Writes `contents` atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& contents);

struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> n_paths;
};

/// Executes one CLI command: parses + validates the config, runs the
/// pipeline, writes the CSV outputs and the manifest into `out_dir`.
/// Returns the process exit code (0 ok, 2 parse, 3 validation, 4 compute).
int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_dir, const CommandOverrides& overrides);

/// The individual pipelines; exposed for tests. Each returns the map of
/// output filename -> file contents that run_command writes.
std::map<std::string, std::string> pipeline_simulate(const RunConfig& cfg);
std::map<std::string, std::string> pipeline_analyze_semigroup(
    const RunConfig& cfg);
std::map<std::string, std::string> pipeline_converge(const RunConfig& cfg);
std::map<std::string, std::string> pipeline_control_tournament(
    const RunConfig& cfg);

}  // namespace netspde
