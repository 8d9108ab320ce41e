#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "wdiv/exec.hpp"

namespace wdiv {

/// Which observable parts of the two canonical outcomes differ.
struct Facets {
  bool termination_differs = false;
  bool stdout_differs = false;

  bool any() const { return termination_differs || stdout_differs; }
  friend bool operator==(const Facets&, const Facets&) = default;
};

enum class ExcludedReason {
  non_deterministic_native,
  non_deterministic_wasm,
  non_terminating_native,
  non_terminating_wasm,
  ineligible_build,
  /// Spawning or running the case failed inside the harness itself.
  harness_error,
};

std::string_view to_string(ExcludedReason reason);
ExcludedReason parse_excluded_reason(std::string_view text);

struct DivergenceRecord {
  std::string test_id;
  EnvMode env_mode = EnvMode::fixed;
  std::optional<ExecutionOutcome> native;
  std::optional<ExecutionOutcome> wasm;
  std::optional<Verdict> native_verdict;
  std::optional<Verdict> wasm_verdict;
  Facets facets;
  std::optional<std::uint64_t> first_stdout_mismatch;
  std::optional<ExcludedReason> excluded_reason;
  /// Free-form note for excluded cases (e.g. the failing build side).
  std::string note;

  bool divergent() const { return !excluded_reason && facets.any(); }
};

/// Facets of two canonical outcomes; a pure function of the pair.
Facets compute_facets(const ExecutionOutcome& native, const ExecutionOutcome& wasm);

/// Offset of the first differing stdout byte, or the shorter length when one
/// stream is a prefix of the other. nullopt when the streams are equal.
std::optional<std::uint64_t> first_mismatch(const StreamCapture& a, const StreamCapture& b);

/// Returns nullopt for NoDivergence. Excluded profiles yield a record with
/// excluded_reason set and no facets. Throws MismatchedCase on differing ids.
std::optional<DivergenceRecord> compare(const BehaviorProfile& native, const BehaviorProfile& wasm);

/// Record for a case whose build was not eligible on one or both sides.
DivergenceRecord ineligible_record(const std::string& test_id, EnvMode env_mode, std::string note);

std::string encode_divergence(const DivergenceRecord& record);
/// Throws ManifestError.
DivergenceRecord decode_divergence(std::string_view line);

}  // namespace wdiv
