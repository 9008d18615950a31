#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace treesmu::cli {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string subcommand;
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;

  nlohmann::json to_json() const;
  // Writes <dir>/manifest.json, replacing any previous one.
  void write(const std::filesystem::path& dir) const;
};

std::string version_stamp();

}  // namespace treesmu::cli
