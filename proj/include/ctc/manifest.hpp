#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ctc {

// Lowercase hex SHA-256 of a file's bytes. Throws DataError if unreadable.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(std::string_view bytes);

// Provenance record written next to every command's outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_argv(const std::vector<std::string>& argv);
  void set_config(nlohmann::ordered_json config);
  void set_seed(const std::string& name, std::uint64_t seed);
  void add_input(const std::string& role, const std::string& path);
  void add_output(const std::string& role, const std::string& path);
  // Merges a stage report (counts, timings, warnings) under `name`.
  void add_stage(const std::string& name, nlohmann::ordered_json stage);
  void add_warning(const std::string& text);

  nlohmann::ordered_json to_json() const;
  // Stamps total wall-clock time, digests the outputs, and writes JSON.
  void save(const std::string& path);

 private:
  std::chrono::steady_clock::time_point start_;
  double wall_seconds_ = 0.0;
  nlohmann::ordered_json doc_;
};

}  // namespace ctc
