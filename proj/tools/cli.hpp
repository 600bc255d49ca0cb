#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace devlm::cli {

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

/// Provenance record written before a command starts computing.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::map<std::string, std::string> inputs;  // path -> sha256
  std::vector<std::string> outputs;          // relative to the manifest's directory
  std::uint64_t seed = 0;
  std::string version;
};

nlohmann::json to_json(const RunManifest& manifest);

/// Writes the manifest and returns the digest of the written bytes.
std::string write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

/// Parses `args` (args[0] is the program name) and runs one subcommand.
/// Returns the process exit status; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* version();

}  // namespace devlm::cli
