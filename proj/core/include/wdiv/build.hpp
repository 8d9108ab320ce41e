#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "wdiv/common.hpp"
#include "wdiv/corpus.hpp"

namespace wdiv {

/// Compiler settings for both targets. Command strings are split on
/// whitespace, so a wrapper such as `python3 -m ziglang cc` is accepted.
struct ToolchainConfig {
  std::string native_cc = "clang";
  std::string wasm_cc = "clang --target=wasm32-wasi";
  std::string wasm_sysroot;
  std::vector<std::string> cflags = {"-O2"};
  std::vector<std::string> native_cflags = {"-fstack-protector-strong"};
  std::vector<std::string> wasm_cflags;
  std::vector<std::string> defines = {"INCLUDEMAIN"};
  std::vector<std::string> include_dirs;
  std::vector<std::string> extra_sources;
  std::vector<std::string> ldflags = {"-lm"};
  std::chrono::seconds compile_timeout{120};
};

/// A compiler resolved to an executable, with its `--version` identity.
struct Toolchain {
  Target target = Target::native;
  std::vector<std::string> argv_prefix;
  std::string fingerprint;
};

/// Throws ToolchainMissing when the compiler cannot be found or run.
Toolchain resolve_toolchain(const ToolchainConfig& config, Target target);

struct CompileArtifact {
  std::string test_id;
  Target target = Target::native;
  /// Relative to the workspace: `bin/<target>/<test_id>`.
  std::string binary_path;
  std::string binary_hash;
  /// Argument vector, replayable from the workspace directory.
  std::vector<std::string> command;
  bool ok = false;
  std::string diagnostics;
  std::string toolchain_fingerprint;

  friend bool operator==(const CompileArtifact&, const CompileArtifact&) = default;
};

struct BuildPair {
  CompileArtifact native;
  CompileArtifact wasm;
  bool eligible = false;
};

/// Compiles test cases into `<workspace>/bin/<target>/<id>` with a
/// content-addressed cache under `<workspace>/cache`. Safe to share across
/// worker threads and across processes using the same workspace.
class Builder {
 public:
  /// Resolves both toolchains up front; throws ToolchainMissing.
  Builder(std::filesystem::path workspace, ToolchainConfig config);

  /// Never throws for ordinary compile errors; those yield ok == false.
  CompileArtifact compile(const TestCase& test, Target target);
  BuildPair build_pair(const TestCase& test);

  const std::filesystem::path& workspace() const { return workspace_; }
  const Toolchain& toolchain(Target target) const {
    return target == Target::native ? native_ : wasm_;
  }
  std::size_t compiler_invocations() const { return invocations_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  std::vector<std::string> command_for(const TestCase& test, Target target,
                                       const std::string& output) const;

  std::filesystem::path workspace_;
  ToolchainConfig config_;
  Toolchain native_;
  Toolchain wasm_;
  std::atomic<std::size_t> invocations_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

std::string encode_artifact(const CompileArtifact& artifact);
CompileArtifact decode_artifact(std::string_view line);

}  // namespace wdiv
