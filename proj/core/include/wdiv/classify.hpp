#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wdiv/diff.hpp"
#include "wdiv/elf_symbols.hpp"
#include "wdiv/wasmscan.hpp"

namespace wdiv {

inline constexpr std::string_view kRulesVersion = "wdiv-rules/1";

enum class RootCause { stdlib, security_protection, execution_environment, unclassified };

enum class Subcause {
  wide_characters,
  malloc_free,
  puts_return,
  printf_args,
  stack_smashing,
  memory_protection,
  uninitialized_data,
  pointer_width,
  number_width,
  os_environment,
  memory_layout,
  none,
};

enum class Confidence { high, medium, low };

enum class EvidenceSource {
  native_stderr,
  native_symbols,
  wasm_stdout,
  native_stdout,
  outcome_shape,
  wasm_scan,
  source_text,
};

std::string_view to_string(RootCause root);
std::string_view to_string(Subcause subcause);
std::string_view to_string(Confidence confidence);
std::string_view to_string(EvidenceSource source);
RootCause parse_root_cause(std::string_view text);
Subcause parse_subcause(std::string_view text);
Confidence parse_confidence(std::string_view text);
EvidenceSource parse_evidence_source(std::string_view text);

/// Root cause a subcause belongs to; unclassified for none.
RootCause root_of(Subcause subcause);
/// Human-readable row title, e.g. "Stack smashing".
std::string_view title(Subcause subcause);
std::string_view title(RootCause root);

/// The eleven classified subcauses in report order, grouped by root.
const std::vector<Subcause>& all_subcauses();
const std::vector<RootCause>& classified_roots();

struct EvidenceItem {
  EvidenceSource source = EvidenceSource::outcome_shape;
  std::string signal;

  friend bool operator==(const EvidenceItem&, const EvidenceItem&) = default;
};

struct RootCauseLabel {
  RootCause root = RootCause::unclassified;
  Subcause subcause = Subcause::none;
  Confidence confidence = Confidence::low;
  std::vector<EvidenceItem> evidence;
  /// Rule that fired ("R1".."R11"), empty when unclassified.
  std::string rule;

  friend bool operator==(const RootCauseLabel&, const RootCauseLabel&) = default;
};

struct Evidence {
  std::string native_stderr;
  /// nullopt when the symbol table could not be read.
  std::optional<std::vector<std::string>> native_symbol_names;
  std::optional<wasm::WasmModuleSummary> wasm_summary;
  std::optional<ExecutionOutcome> native;
  std::optional<ExecutionOutcome> wasm;
  /// Preprocessed test source, for the source-keyword rules.
  std::string source_text;
  std::vector<std::string> notes;
};

struct EvidenceOptions {
  SymbolExtractor symbols;
  wasm::ScanOptions scan;
};

/// Best effort: unreadable inputs leave the matching field empty and add a note.
Evidence gather_evidence(const DivergenceRecord& record, const std::filesystem::path& native_binary,
                         const std::filesystem::path& wasm_binary, std::string source_text,
                         const EvidenceOptions& options = {});

enum class RuleId { R1 = 1, R2, R3, R4, R5, R6, R7, R8, R9, R10, R11 };

std::string_view to_string(RuleId rule);
/// Accepts "R3" or "r3"; throws ConfigError.
RuleId parse_rule_id(std::string_view text);

struct ClassifierOptions {
  /// Evaluation order; first match wins.
  std::vector<RuleId> order = {RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4,  RuleId::R5, RuleId::R6,
                               RuleId::R7, RuleId::R8, RuleId::R9, RuleId::R10, RuleId::R11};
  std::set<RuleId> disabled;
  /// R11 only runs when set.
  bool memory_layout = false;

  bool enabled(RuleId rule) const;
};

/// Comment-free text matching helpers, exposed for tests.
bool source_mentions(std::string_view source_text, std::string_view word);

/// Pure: identical inputs yield identical labels. Excluded records and
/// records without facets come back unclassified.
RootCauseLabel classify(const DivergenceRecord& record, const Evidence& evidence,
                        const ClassifierOptions& options = {});

struct LabeledRecord {
  DivergenceRecord record;
  std::optional<RootCauseLabel> label;
};

/// One JSON line: the divergence record plus `rules_version`, `root`,
/// `subcause`, `confidence`, `rule` and `evidence` when labeled.
std::string encode_labeled(const LabeledRecord& labeled);
/// Throws ManifestError.
LabeledRecord decode_labeled(std::string_view line);

}  // namespace wdiv
