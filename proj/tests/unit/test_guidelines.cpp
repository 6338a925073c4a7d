#include <filesystem>

#include <gtest/gtest.h>

#include "pdedev/error.hpp"
#include "pdedev/guidelines/rules.hpp"
#include "pdedev/sandbox/sandbox.hpp"
#include "support.hpp"

using namespace pdedev;
using namespace pdedev::guidelines;
using pipeline::SourceFile;
using testsupport::TempDir;
using testsupport::fixture_dir;
namespace fs = std::filesystem;

namespace {

std::vector<Violation> lint_dir(const fs::path& dir) { return lint(read_sources(dir), default_rules()); }

}  // namespace

TEST(Rules, DefaultSetCarriesTheRequiredTexts) {
  const RuleSet set = default_rules();
  ASSERT_NE(set.find("forbidden-einsum"), nullptr);
  EXPECT_EQ(set.find("forbidden-einsum")->message, "Do not use the function einsum().");
  EXPECT_EQ(set.find("forbidden-import-jmp")->message, "Do not import library jmp.");
  EXPECT_EQ(set.find("output-format-vtk")->message, "You must produce the .vtk, .vtu files for evaluation.");
  const std::string text = render_guidelines(set);
  EXPECT_EQ(text.rfind("1. Do not use the function einsum().\n", 0), 0u);
  EXPECT_NE(text.find("2. Do not import library jmp."), std::string::npos);
  EXPECT_NE(text.find("3. You must produce the .vtk, .vtu files for evaluation."), std::string::npos);
  // Remediations act on code; they are not prompt text.
  for (const Rule* r : set.of_kind(Rule::Kind::remediation)) {
    EXPECT_EQ(text.find(r->message), std::string::npos);
  }
  EXPECT_EQ(render_guidelines(RuleSet{}), "");
}

TEST(Rules, ParseRoundTripAndDefaultsAppended) {
  const RuleSet parsed = parse_rules("# custom\nadvisory\tno-float32\tUse float64 throughout.\n\n"
                                     "lint\tno-eval\tcall:eval\tDo not call eval().\n");
  ASSERT_NE(parsed.find("no-eval"), nullptr);
  ASSERT_NE(parsed.find("forbidden-einsum"), nullptr);
  ASSERT_NE(parsed.find("forbidden-import-jmp"), nullptr);
  ASSERT_NE(parsed.find("output-format-vtk"), nullptr);
  EXPECT_EQ(parsed.rules.front().id, "no-float32");
  const RuleSet again = parse_rules(render_rules_file(parsed));
  ASSERT_EQ(again.rules.size(), parsed.rules.size());
  for (std::size_t k = 0; k < again.rules.size(); ++k) {
    EXPECT_EQ(again.rules[k].id, parsed.rules[k].id);
    EXPECT_EQ(again.rules[k].message, parsed.rules[k].message);
    EXPECT_EQ(again.rules[k].spec, parsed.rules[k].spec);
  }
}

TEST(Rules, ParseErrorsNameTheLine) {
  auto line_of = [](const std::string& text) {
    try {
      parse_rules(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("prompt\ta\tok\nbogus\tb\ttext\n"), 2);
  EXPECT_EQ(line_of("# c\n\nlint\tx\tcall:foo\n"), 3);                    // missing message
  EXPECT_EQ(line_of("lint\tx\tshape:foo\tmsg\n"), 1);                      // unknown matcher
  EXPECT_EQ(line_of("lint\tx\tregex:(unclosed\tmsg\n"), 1);               // bad regex
  EXPECT_EQ(line_of("prompt\tdup\tone\nprompt\tdup\ttwo\n"), 2);          // duplicate id
  EXPECT_EQ(line_of("remediation\tr\tdelete:all\tmsg\n"), 1);             // unknown action
  EXPECT_THROW(load_rules("/nonexistent/rules.tsv"), IoError);
}

TEST(Lint, Matchers) {
  const std::vector<SourceFile> files = {
      {"a.py", "x = np.einsum('ij->i', a)\ny = einsum (a)\nz = not_einsum(a)\n# einsum is banned\n"},
      {"b.py", "import os, jmp\nfrom jmp import policy\nimport jmpx\nfrom numpy import jmp_like\n"},
      {"c.cpp", "#include <jmp/jmp.h>\n#include \"jmpx.h\"\n"}};
  const auto v = lint(files, default_rules());
  std::vector<std::pair<std::string, int>> got;
  for (const auto& x : v) got.emplace_back(x.file, x.line);
  const std::vector<std::pair<std::string, int>> want = {{"a.py", 1}, {"a.py", 2}, {"b.py", 1}, {"b.py", 2},
                                                         {"c.cpp", 1}};
  EXPECT_EQ(got, want);
  EXPECT_EQ(v.front().rule_id, "forbidden-einsum");
  EXPECT_EQ(v.front().text, "x = np.einsum('ij->i', a)");
}

TEST(Lint, FixtureCorpus) {
  const auto einsum = lint_dir(fixture_dir() / "lint" / "einsum");
  ASSERT_EQ(einsum.size(), 1u);
  EXPECT_EQ(einsum[0].rule_id, "forbidden-einsum");
  EXPECT_EQ(einsum[0].line, 11);

  const auto jmp = lint_dir(fixture_dir() / "lint" / "jmp");
  ASSERT_EQ(jmp.size(), 1u);
  EXPECT_EQ(jmp[0].rule_id, "forbidden-import-jmp");
  EXPECT_EQ(jmp[0].line, 2);

  EXPECT_TRUE(lint_dir(fixture_dir() / "lint" / "clean").empty());
  EXPECT_TRUE(lint_dir(fixture_dir() / "rename").empty());
  for (const char* f : {"happy", "one_error", "batch_mixed"}) {
    EXPECT_TRUE(lint_dir(fixture_dir() / "pipeline" / f).empty()) << f;
  }
}

TEST(Lint, JsonReport) {
  const auto v = lint_dir(fixture_dir() / "lint" / "jmp");
  const auto j = violations_to_json(v);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["rule"], "forbidden-import-jmp");
  EXPECT_EQ(j[0]["line"], 2);
}

TEST(Rename, WholeWordsOnlyAndRoundTrip) {
  const auto files = read_sources(fixture_dir() / "rename");
  ASSERT_EQ(files.size(), 1u);
  const RenameResult r = remediate_rename(files, "omega", "freq_val");
  EXPECT_EQ(r.count, 8);
  const std::string& out = r.files[0].text;
  EXPECT_NE(out.find("omega_max = 1.95"), std::string::npos);
  EXPECT_NE(out.find("def check(omega_value):"), std::string::npos);
  EXPECT_NE(out.find("self.omegas = [freq_val, 1.0]"), std::string::npos);
  EXPECT_NE(out.find("self.freq_val = freq_val"), std::string::npos);
  EXPECT_NE(out.find("def collide(f, feq, freq_val):"), std::string::npos);

  const RenameResult back = remediate_rename(r.files, "freq_val", "omega");
  EXPECT_EQ(back.count, 8);
  EXPECT_EQ(back.files, files);
}

TEST(Rename, ConflictsAndBadNames) {
  const std::vector<SourceFile> files = {{"m.py", "omega = 1\nfreq_val = 2\n"}};
  EXPECT_THROW(remediate_rename(files, "omega", "freq_val"), CollisionError);
  EXPECT_THROW(remediate_rename(files, "omega", "freq-val"), PreconditionError);
  EXPECT_THROW(remediate_rename(files, "", "x"), PreconditionError);
  EXPECT_EQ(remediate_rename(files, "absent", "present").count, 0);
}

TEST(Rename, InPlaceOverDirectory) {
  TempDir dir;
  fs::copy(fixture_dir() / "rename", dir.path(), fs::copy_options::recursive);
  EXPECT_EQ(remediate_rename(dir.path(), "omega", "freq_val"), 8);
  EXPECT_EQ(testsupport::read_file(dir / "solver.py").find("omega ="), std::string::npos);
}

TEST(Placeholder, Templates) {
  EXPECT_EQ(placeholder_text("PeriodicBC", "src/bc.py"), "\n\nclass PeriodicBC:\n    pass\n");
  EXPECT_NE(placeholder_text("PeriodicBC", "bc.hpp").find("struct PeriodicBC"), std::string::npos);
  EXPECT_THROW(placeholder_text("PeriodicBC", "bc.rs2"), ConfigError);
  EXPECT_THROW(placeholder_text("9lives", "bc.py"), PreconditionError);
}

TEST(Placeholder, InjectionMakesTheNameResolvable) {
  TempDir codebase;
  fs::copy(fixture_dir() / "placeholder" / "src", codebase / "src", fs::copy_options::recursive);
  pipeline::CodeArtifact a;
  a.tester = {"test_case.py", testsupport::read_file(fixture_dir() / "placeholder" / "test_case.py")};

  sandbox::ExecutionReport before = sandbox::execute_tester(a, codebase.str());
  sandbox::remove_workdir(before);
  EXPECT_NE(before.exit_status, 0);
  ASSERT_FALSE(before.captured_errors.empty());
  EXPECT_NE(before.captured_errors.front().find("ImportError"), std::string::npos);

  PlaceholderResult r = inject_placeholder(codebase.path(), "PeriodicBC", "src/boundary_conditions.py");
  EXPECT_TRUE(r.injected);
  sandbox::ExecutionReport after = sandbox::execute_tester(a, codebase.str());
  sandbox::remove_workdir(after);
  EXPECT_EQ(after.exit_status, 0) << after.stderr_text;
  EXPECT_EQ(after.stdout_text, "1.0 PeriodicBC\n");

  const std::string text = testsupport::read_file(codebase / "src" / "boundary_conditions.py");
  PlaceholderResult again = inject_placeholder(codebase.path(), "PeriodicBC", "src/boundary_conditions.py");
  EXPECT_FALSE(again.injected);
  EXPECT_NE(again.warning.find("already defined"), std::string::npos);
  EXPECT_EQ(testsupport::read_file(codebase / "src" / "boundary_conditions.py"), text);

  EXPECT_THROW(inject_placeholder(codebase.path(), "X", "src/missing.py"), IoError);
}
