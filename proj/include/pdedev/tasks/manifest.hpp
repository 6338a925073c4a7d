#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pdedev::tasks {

struct ManifestEntry {
  long timestep = 0;
  double time = 0.0;
  std::string filename;  // relative to the manifest's directory
  std::vector<std::string> field_names;
  std::string checksum;  // "crc32:xxxxxxxx" of the file bytes

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct SteadyInfo {
  bool converged = false;
  double residual = 0.0;
  long steps = 0;

  friend bool operator==(const SteadyInfo&, const SteadyInfo&) = default;
};

struct Manifest {
  static constexpr std::string_view kFileName = "manifest.json";

  std::string task;
  std::string solver;
  int nx = 0;
  int ny = 0;
  double dt = 1.0;
  long steps = 0;  // lattice steps actually executed
  std::string status = "complete";  // complete | unstable
  long instability_step = -1;
  std::string message;
  std::vector<ManifestEntry> files;
  std::optional<SteadyInfo> steady;

  bool unstable() const { return status == "unstable"; }

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& j);

std::string render_manifest(const Manifest& manifest);
// Writes <dir>/manifest.json atomically (temporary file + rename).
void write_manifest(const std::string& dir, const Manifest& manifest);
// IoError if absent or malformed.
Manifest read_manifest(const std::string& dir);
bool manifest_exists(const std::string& dir);

std::uint32_t crc32_of(std::string_view bytes);
std::string checksum_of_file(const std::string& path);
std::string format_checksum(std::uint32_t crc);

// Files whose checksum no longer matches (or which are missing).
std::vector<std::string> verify_manifest(const std::string& dir, const Manifest& manifest);

}  // namespace pdedev::tasks
