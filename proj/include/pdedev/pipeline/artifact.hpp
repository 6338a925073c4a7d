#pragma once

#include <string>
#include <vector>

namespace pdedev::pipeline {

struct SourceFile {
  std::string name;
  std::string text;

  bool operator==(const SourceFile&) const = default;
};

struct CodeArtifact {
  std::vector<SourceFile> module_files;
  SourceFile tester;
  std::string generator;  // "generator" or "debugger"
  int iteration = 0;

  // Tester last.
  std::vector<SourceFile> all_files() const;
  const SourceFile* find(const std::string& name) const;
  // FormatError on a missing tester, empty or duplicate names, or a name
  // that escapes the tree (absolute or containing "..").
  void validate() const;
};

}  // namespace pdedev::pipeline
