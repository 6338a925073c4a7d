#include "pdedev/tasks/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

#include "pdedev/error.hpp"

namespace pdedev::tasks {

namespace fs = std::filesystem;
using nlohmann::json;

json manifest_to_json(const Manifest& m) {
  json j;
  j["task"] = m.task;
  j["solver"] = m.solver;
  j["nx"] = m.nx;
  j["ny"] = m.ny;
  j["dt"] = m.dt;
  j["steps"] = m.steps;
  j["status"] = m.status;
  if (m.instability_step >= 0) j["instability_step"] = m.instability_step;
  if (!m.message.empty()) j["message"] = m.message;
  json files = json::array();
  for (const auto& e : m.files) {
    files.push_back({{"timestep", e.timestep},
                     {"time", e.time},
                     {"filename", e.filename},
                     {"field_names", e.field_names},
                     {"checksum", e.checksum}});
  }
  j["files"] = std::move(files);
  if (m.steady) {
    j["steady"] = {{"converged", m.steady->converged},
                   {"residual", m.steady->residual},
                   {"steps", m.steady->steps}};
  }
  return j;
}

Manifest manifest_from_json(const json& j) {
  try {
    Manifest m;
    m.task = j.at("task").get<std::string>();
    m.solver = j.value("solver", std::string());
    m.nx = j.at("nx").get<int>();
    m.ny = j.at("ny").get<int>();
    m.dt = j.value("dt", 1.0);
    m.steps = j.at("steps").get<long>();
    m.status = j.value("status", std::string("complete"));
    m.instability_step = j.value("instability_step", -1L);
    m.message = j.value("message", std::string());
    for (const auto& f : j.at("files")) {
      ManifestEntry e;
      e.timestep = f.at("timestep").get<long>();
      e.time = f.value("time", static_cast<double>(e.timestep) * m.dt);
      e.filename = f.at("filename").get<std::string>();
      e.field_names = f.value("field_names", std::vector<std::string>{});
      e.checksum = f.value("checksum", std::string());
      m.files.push_back(std::move(e));
    }
    if (j.contains("steady")) {
      const auto& s = j["steady"];
      m.steady = SteadyInfo{s.at("converged").get<bool>(), s.at("residual").get<double>(),
                            s.at("steps").get<long>()};
    }
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
}

std::string render_manifest(const Manifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

void write_manifest(const std::string& dir, const Manifest& m) {
  const fs::path target = fs::path(dir) / Manifest::kFileName;
  const fs::path tmp = fs::path(dir) / (std::string(Manifest::kFileName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << render_manifest(m);
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move manifest into place: " + ec.message());
}

bool manifest_exists(const std::string& dir) {
  return fs::is_regular_file(fs::path(dir) / Manifest::kFileName);
}

Manifest read_manifest(const std::string& dir) {
  const fs::path p = fs::path(dir) / Manifest::kFileName;
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("no manifest at " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw IoError("manifest is not valid JSON: " + p.string());
  return manifest_from_json(j);
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string format_checksum(std::uint32_t crc) { return fmt::format("crc32:{:08x}", crc); }

std::string checksum_of_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return format_checksum(crc32_of(ss.str()));
}

std::vector<std::string> verify_manifest(const std::string& dir, const Manifest& m) {
  std::vector<std::string> bad;
  for (const auto& e : m.files) {
    const std::string path = (fs::path(dir) / e.filename).string();
    if (!fs::is_regular_file(path) || checksum_of_file(path) != e.checksum) bad.push_back(e.filename);
  }
  return bad;
}

}  // namespace pdedev::tasks
