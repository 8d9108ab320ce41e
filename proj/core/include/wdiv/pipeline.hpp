#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wdiv/config.hpp"

namespace wdiv {

namespace manifest {
inline constexpr const char* kIngest = "ingest.jsonl";
inline constexpr const char* kIngestSkipped = "ingest_skipped.jsonl";
inline constexpr const char* kBuild = "build.jsonl";
inline constexpr const char* kProbeNative = "probe_native.jsonl";
inline constexpr const char* kProbeWasm = "probe_wasm.jsonl";
inline constexpr const char* kDivergences = "divergences.jsonl";
inline constexpr const char* kEffectiveConfig = "effective_config.txt";
}  // namespace manifest

/// Exit statuses shared by the pipeline and every subcommand.
enum ExitStatus : int { kExitClean = 0, kExitDivergent = 1, kExitConfig = 2 };

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads. The first
/// exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body);

/// Stage functions. Each writes its manifest(s) into config.out and returns
/// what the next stage consumes; per-case failures are recorded, not thrown.
std::vector<TestCase> stage_ingest(const RunConfig& config, std::ostream& log);
std::vector<BuildPair> stage_build(const RunConfig& config, Builder& builder, const std::vector<TestCase>& cases,
                                   std::ostream& log);

struct ProbeSet {
  std::map<std::string, BehaviorProfile> native;
  std::map<std::string, BehaviorProfile> wasm;
  /// Cases whose probe failed inside the harness, with the reason.
  std::map<std::string, std::string> errors;
};

ProbeSet stage_run(const RunConfig& config, const Executor& executor, const std::vector<BuildPair>& builds,
                   std::ostream& log);
std::vector<DivergenceRecord> stage_diff(const RunConfig& config, const std::vector<BuildPair>& builds,
                                         const ProbeSet& probes);
std::vector<LabeledRecord> stage_classify(const RunConfig& config, const std::vector<TestCase>& cases,
                                          const std::vector<DivergenceRecord>& records, std::ostream& log);
/// Returns kExitDivergent when any case diverged, kExitClean otherwise.
int stage_report(const RunConfig& config, const std::vector<TestCase>& cases, const std::vector<BuildPair>& builds,
                 const std::vector<LabeledRecord>& labeled);

/// Manifest loaders used by the subcommands. Throw ManifestError / IoError.
std::vector<TestCase> load_ingest(const RunConfig& config, bool with_sources);
std::vector<BuildPair> load_builds(const RunConfig& config);
ProbeSet load_probes(const std::filesystem::path& native_manifest, const std::filesystem::path& wasm_manifest);
std::vector<DivergenceRecord> load_divergences(const std::filesystem::path& path);
std::vector<LabeledRecord> load_labeled(const std::filesystem::path& path);

/// Per-case rows for the report, derived from the three manifests.
std::vector<CaseResult> case_results(const std::vector<TestCase>& cases, const std::vector<BuildPair>& builds,
                                     const std::vector<LabeledRecord>& labeled);

/// Writes effective_config.txt into config.out.
void write_effective_config(const RunConfig& config);

/// The whole chain. Configuration and toolchain problems yield kExitConfig
/// before any case runs; the message goes to `log`.
int run_pipeline(const RunConfig& config, std::ostream& log);

}  // namespace wdiv
