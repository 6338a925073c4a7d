#include "pdedev/pipeline/artifact.hpp"

#include <filesystem>
#include <set>

#include "pdedev/error.hpp"

namespace pdedev::pipeline {

std::vector<SourceFile> CodeArtifact::all_files() const {
  std::vector<SourceFile> out = module_files;
  out.push_back(tester);
  return out;
}

const SourceFile* CodeArtifact::find(const std::string& name) const {
  if (tester.name == name) return &tester;
  for (const auto& f : module_files) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

void CodeArtifact::validate() const {
  if (tester.name.empty()) throw FormatError("artifact has no tester file");
  std::set<std::string> seen;
  for (const auto& f : all_files()) {
    if (f.name.empty()) throw FormatError("artifact file with an empty name");
    const std::filesystem::path p(f.name);
    if (p.is_absolute()) throw FormatError("artifact file name is absolute: " + f.name);
    for (const auto& part : p) {
      if (part == "..") throw FormatError("artifact file name leaves the tree: " + f.name);
    }
    if (!seen.insert(p.lexically_normal().string()).second) {
      throw FormatError("duplicate artifact file name: " + f.name);
    }
  }
}

}  // namespace pdedev::pipeline
