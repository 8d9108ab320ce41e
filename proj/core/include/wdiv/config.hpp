#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wdiv/build.hpp"
#include "wdiv/classify.hpp"
#include "wdiv/corpus.hpp"
#include "wdiv/exec.hpp"
#include "wdiv/report.hpp"

namespace wdiv {

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path out = "wdiv-out";
  /// Defaults to `<out>/work`.
  std::filesystem::path workspace;
  ToolchainConfig toolchain;
  ExecutionLimits limits;
  WasmRuntimeConfig runtime;
  ClassifierOptions classifier;
  EvidenceOptions evidence;
  CorpusFilter filter;
  std::size_t sample_k = 3;
  std::uint64_t seed = 0;
  std::set<ReportFormat> formats = {ReportFormat::jsonl, ReportFormat::markdown, ReportFormat::csv};
  unsigned jobs = 1;

  std::filesystem::path workspace_dir() const { return workspace.empty() ? out / "work" : workspace; }
};

/// One `key = value` assignment and the directory relative paths resolve against.
struct Setting {
  std::string key;
  std::string value;
  std::filesystem::path base;
};

/// Lower-case, underscores to dashes: `TIMEOUT_SECS` -> `timeout-secs`.
std::string normalize_key(std::string_view key);

/// Every key accepted by files, `WDIV_` variables and flags.
const std::vector<std::string>& config_keys();

/// Flat `key = value` lines; `#` starts a comment. Throws ConfigError.
std::vector<Setting> parse_config_text(std::string_view text, const std::filesystem::path& base);
std::vector<Setting> read_config_file(const std::filesystem::path& path);

/// `WDIV_*` variables among `environ`-style entries; WDIV_CONFIG is skipped.
std::vector<Setting> settings_from_environment(const std::vector<std::string>& environ_entries,
                                               const std::filesystem::path& base);

/// Throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& config, const Setting& setting);

/// Defaults < config file < environment < flags.
RunConfig resolve_config(const std::optional<std::filesystem::path>& config_file,
                         const std::vector<std::string>& environ_entries,
                         const std::vector<Setting>& flags, const std::filesystem::path& cwd);

/// Checks ranges and that the corpus root (when required) is a directory.
void validate(const RunConfig& config, bool need_corpus);

/// `key = value` per line, in config_keys() order; readable by parse_config_text.
std::string dump_config(const RunConfig& config);

}  // namespace wdiv
