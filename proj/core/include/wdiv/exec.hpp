#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wdiv/build.hpp"
#include "wdiv/common.hpp"
#include "wdiv/process.hpp"

namespace wdiv {

/// How the environment is set up for the two targets.
///  - fixed:   both get the same minimal environment (PATH only).
///  - inherit: native inherits the harness environment, the Wasm guest gets
///             none (what a runtime does unless told otherwise).
///  - empty:   neither gets any variables.
enum class EnvMode { fixed, inherit, empty };

std::string_view to_string(EnvMode mode);
EnvMode parse_env_mode(std::string_view text);

/// True when the two targets see different environments.
inline bool env_is_asymmetric(EnvMode mode) { return mode == EnvMode::inherit; }

inline constexpr std::string_view kFixedPath = "/usr/local/bin:/usr/bin:/bin";

struct ExecutionLimits {
  std::chrono::milliseconds timeout{std::chrono::seconds(100)};
  std::size_t stdout_cap = 1 << 20;
  EnvMode env_mode = EnvMode::fixed;
  int n_runs = 10;
  /// Applied to native binaries only; Wasm runtimes reserve large virtual ranges.
  std::optional<std::uint64_t> native_address_space = std::uint64_t{4} << 30;
  std::optional<std::uint64_t> file_size = std::uint64_t{64} << 20;

  /// Throws ConfigError unless timeout > 0 and n_runs >= 1.
  void validate() const;
};

struct Termination {
  enum class Kind { exited, signaled, runtime_trap, timed_out };
  Kind kind = Kind::exited;
  int code = 0;
  int signal = 0;
  std::string message;

  static Termination exited(int code) { return {Kind::exited, code, 0, {}}; }
  static Termination signaled(int signal) { return {Kind::signaled, 0, signal, {}}; }
  static Termination trap(std::string message) {
    return {Kind::runtime_trap, 0, 0, std::move(message)};
  }
  static Termination timed_out() { return {Kind::timed_out, 0, 0, {}}; }

  friend bool operator==(const Termination&, const Termination&) = default;
};

std::string_view to_string(Termination::Kind kind);
/// "SIGABRT" style name; "SIG<n>" for unknown numbers.
std::string signal_name(int signal);
int signal_number(std::string_view name);
std::string describe(const Termination& termination);

struct ExecutionOutcome {
  Termination termination;
  StreamCapture stdout_stream;
  StreamCapture stderr_stream;
  std::chrono::milliseconds wall_time{0};
};

/// Equality used by the determinism probe and the diff: termination plus stdout digest.
bool same_behavior(const ExecutionOutcome& a, const ExecutionOutcome& b);

enum class Verdict { deterministic, non_deterministic, non_terminating };

std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view text);

/// Verdict over a list of runs. A timeout anywhere wins over any mismatch.
Verdict judge(const std::vector<ExecutionOutcome>& runs);

struct BehaviorProfile {
  std::string test_id;
  Target target = Target::native;
  EnvMode env_mode = EnvMode::fixed;
  std::vector<ExecutionOutcome> runs;
  Verdict verdict = Verdict::deterministic;

  /// First run; only meaningful for a deterministic verdict.
  const ExecutionOutcome& canonical() const { return runs.front(); }
};

/// External Wasm runtime invocation. `{module}` expands to the module path
/// and `{env}` to one `--env K=V` pair per guest variable.
struct WasmRuntimeConfig {
  std::string command_template = "wasmtime run {env} {module}";
  /// A nonzero exit whose stderr contains this marker is a runtime trap.
  std::string trap_marker = "wasm trap:";
};

/// Maps a raw runtime process result onto a Wasm termination.
Termination map_wasm_termination(const ProcessResult& result, std::string_view trap_marker);

class Executor {
 public:
  /// Throws BackendMissing when the runtime executable cannot be resolved.
  Executor(std::filesystem::path workspace, WasmRuntimeConfig runtime, ExecutionLimits limits);

  /// Runs one artifact once. Throws SpawnError.
  ExecutionOutcome execute(const CompileArtifact& artifact) const;

  /// Runs up to n_runs times, stopping at the first timeout or mismatch with run 1.
  BehaviorProfile probe(const CompileArtifact& artifact) const;

  const ExecutionLimits& limits() const { return limits_; }
  std::vector<std::string> wasm_command(const std::filesystem::path& module) const;

 private:
  std::filesystem::path workspace_;
  WasmRuntimeConfig runtime_;
  ExecutionLimits limits_;
};

std::string encode_outcome_json(const ExecutionOutcome& outcome);
ExecutionOutcome decode_outcome_json(std::string_view text);

std::string encode_profile(const BehaviorProfile& profile);
BehaviorProfile decode_profile(std::string_view line);

}  // namespace wdiv
