#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wdiv {

/// Category assigned to files whose names do not follow the Juliet convention.
inline constexpr std::string_view kUncategorized = "uncategorized";

/// Identity recovered from a `CWE<digits>_<category>_<variant>.c` file name.
struct TestName {
  int cwe_id = 0;
  std::string category;
  std::string variant;

  friend bool operator==(const TestName&, const TestName&) = default;
};

/// Splits a Juliet-style file name (a bare name or a path). Throws MalformedName.
TestName parse_test_name(std::string_view filename);

/// Inverse of parse_test_name for well-formed triples.
std::string render_test_name(const TestName& name);

struct PreprocessResult {
  std::string text;
  std::size_t replaced = 0;
  /// `rand(...)` calls with arguments, left untouched.
  std::size_t flagged = 0;
};

/// Replaces every argument-less call `rand ( )` with the literal `1`.
///
/// Works on tokens: identifiers such as `grand` or `srand`, member accesses
/// (`s.rand()`), comments, and string/character literals are never touched.
/// Idempotent, and an input without such a call maps to itself byte for byte.
PreprocessResult preprocess_source_detailed(std::string_view raw);

inline std::string preprocess_source(std::string_view raw) {
  return preprocess_source_detailed(raw).text;
}

/// Stable identifier of a preprocessed source (truncated SHA-256).
std::string test_case_id(std::string_view source_text);

struct TestCase {
  std::string id;
  std::filesystem::path path;
  int cwe_id = 0;
  std::string category;
  std::string variant;
  std::string source_text;
  std::string original_hash;
  std::size_t flagged_rand_calls = 0;
};

/// Builds a TestCase from raw file contents; unparseable names go to kUncategorized.
TestCase make_test_case(const std::filesystem::path& path, std::string_view raw);

struct CorpusFilter {
  std::vector<int> cwes;
  std::vector<std::string> categories;

  bool accepts(const TestCase& test) const;
};

struct SkippedFile {
  std::filesystem::path path;
  std::string reason;
};

struct IngestResult {
  std::vector<TestCase> cases;
  std::vector<SkippedFile> skipped;
};

/// Collects every `.c` file under root, sorted by path. Throws IoError when
/// root itself is unusable; per-file failures become SkippedFile entries.
IngestResult ingest(const std::filesystem::path& root, const CorpusFilter& filter = {});

/// Re-reads a manifest entry's file and checks it still preprocesses to the same id.
void reload_source(TestCase& test);

std::string encode_ingest_entry(const TestCase& test);
/// Decodes identity fields; source_text is left empty.
TestCase decode_ingest_entry(std::string_view line);
std::string encode_skipped_entry(const SkippedFile& skipped);

}  // namespace wdiv
