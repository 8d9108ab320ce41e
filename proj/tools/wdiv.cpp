#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wdiv/common.hpp"
#include "wdiv/errors.hpp"
#include "wdiv/pipeline.hpp"
#include "wdiv/wasmscan.hpp"

extern char** environ;

namespace fs = std::filesystem;

namespace {

std::vector<std::string> environment() {
  std::vector<std::string> out;
  for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
  return out;
}

struct Stage {
  bool needs_corpus = false;
};

int run_scan(const std::vector<std::string>& files, bool as_json, std::size_t window) {
  int status = wdiv::kExitClean;
  for (const auto& file : files) {
    try {
      const wdiv::Bytes bytes = wdiv::read_file(file);
      wdiv::wasm::ScanOptions options;
      options.prologue_window = window;
      const auto report = wdiv::wasm::protection_report(wdiv::wasm::parse_module(bytes, options));
      if (as_json) {
        std::cout << report.json() << "\n";
      } else {
        if (files.size() > 1) std::cout << "== " << file << "\n";
        std::cout << report.text();
      }
    } catch (const wdiv::Error& e) {
      std::cerr << "wdiv scan: " << file << ": " << e.what() << "\n";
      status = wdiv::kExitConfig;
    }
  }
  return status;
}

bool any_divergent(const std::vector<wdiv::DivergenceRecord>& records) {
  for (const auto& r : records) {
    if (r.divergent()) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential testing of C programs compiled natively and to WebAssembly"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_file;
  app.add_option("--config", config_file, "Flat key = value configuration file")->check(CLI::ExistingFile);

  struct Flag {
    const char* key;
    const char* help;
  };
  const std::vector<Flag> flags = {
      {"corpus", "Corpus root directory"},
      {"out", "Output directory for manifests and reports"},
      {"workspace", "Build workspace (default <out>/work)"},
      {"jobs", "Worker threads"},
      {"timeout-secs", "Per-run timeout in seconds"},
      {"runs", "Runs per target for the determinism probe"},
      {"env-mode", "fixed | inherit | empty"},
      {"native-cc", "Native compiler command"},
      {"wasm-cc", "Wasm compiler command"},
      {"wasm-runtime", "Runtime command template with {module} and {env}"},
      {"seed", "Seed for report sampling"},
      {"format", "Comma-separated report formats: jsonl, markdown, csv"},
      {"samples", "Samples per category"},
      {"rules-off", "Comma-separated classifier rules to disable, e.g. R11"},
      {"rule-order", "Comma-separated classifier rule order"},
  };
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  for (const auto& f : flags) {
    flag_options[f.key] = app.add_option(std::string("--") + f.key, flag_values[f.key], f.help);
  }
  bool memory_layout = false;
  auto* memory_layout_flag =
      app.add_flag("--memory-layout", memory_layout, "Enable the opt-in memory layout rule (R11)");
  std::vector<std::string> extra;
  app.add_option("--set", extra, "Any configuration key as key=value (repeatable)");

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage end to end (the default)");
  auto* ingest = app.add_subcommand("ingest", "Collect and preprocess the corpus");
  auto* build = app.add_subcommand("build", "Compile every ingested case for both targets");
  auto* run = app.add_subcommand("run", "Probe every eligible build pair");
  auto* diff = app.add_subcommand("diff", "Compare probe manifests");
  std::vector<std::string> probe_files;
  diff->add_option("probes", probe_files, "Native and Wasm probe manifests")->expected(0, 2);
  auto* classify = app.add_subcommand("classify", "Label divergences with root causes");
  auto* report = app.add_subcommand("report", "Aggregate and render reports");
  auto* scan = app.add_subcommand("scan", "Print the protection report of Wasm modules");
  std::vector<std::string> scan_files;
  bool scan_json = false;
  scan->add_option("modules", scan_files, "Wasm binaries")->required();
  scan->add_flag("--json", scan_json, "Machine-readable findings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wdiv::kExitConfig;
  }

  wdiv::RunConfig config;
  try {
    const fs::path cwd = fs::current_path();
    std::vector<wdiv::Setting> settings;
    for (const auto& f : flags) {
      if (flag_options[f.key]->count() > 0) settings.push_back({f.key, flag_values[f.key], cwd});
    }
    if (memory_layout_flag->count() > 0) settings.push_back({"memory-layout", memory_layout ? "true" : "false", cwd});
    for (const auto& kv : extra) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw wdiv::ConfigError("--set expects key=value, got " + kv);
      settings.push_back({wdiv::normalize_key(kv.substr(0, eq)), kv.substr(eq + 1), cwd});
    }
    std::optional<fs::path> file;
    if (!config_file.empty()) {
      file = config_file;
    } else if (const char* env_file = std::getenv("WDIV_CONFIG"); env_file && *env_file) {
      file = env_file;
    }
    config = wdiv::resolve_config(file, environment(), settings, cwd);
  } catch (const wdiv::Error& e) {
    std::cerr << "wdiv: " << e.what() << "\n";
    return wdiv::kExitConfig;
  }

  if (scan->parsed()) return run_scan(scan_files, scan_json, config.evidence.scan.prologue_window);

  const bool staged = ingest->parsed() || build->parsed() || run->parsed() || diff->parsed() ||
                      classify->parsed() || report->parsed();
  if (!staged || pipeline->parsed()) return wdiv::run_pipeline(config, std::cerr);

  try {
    wdiv::validate(config, ingest->parsed());
    wdiv::write_effective_config(config);
    if (ingest->parsed()) {
      wdiv::stage_ingest(config, std::cerr);
      return wdiv::kExitClean;
    }
    if (build->parsed()) {
      wdiv::Builder builder(config.workspace_dir(), config.toolchain);
      wdiv::stage_build(config, builder, wdiv::load_ingest(config, true), std::cerr);
      return wdiv::kExitClean;
    }
    if (run->parsed()) {
      wdiv::Executor executor(config.workspace_dir(), config.runtime, config.limits);
      wdiv::stage_run(config, executor, wdiv::load_builds(config), std::cerr);
      return wdiv::kExitClean;
    }
    if (diff->parsed()) {
      if (probe_files.size() == 1) throw wdiv::ConfigError("diff takes both probe manifests or neither");
      const fs::path native_probes = probe_files.empty() ? config.out / wdiv::manifest::kProbeNative
                                                         : fs::path(probe_files[0]);
      const fs::path wasm_probes = probe_files.empty() ? config.out / wdiv::manifest::kProbeWasm
                                                       : fs::path(probe_files[1]);
      const auto probes = wdiv::load_probes(native_probes, wasm_probes);
      std::vector<wdiv::BuildPair> builds;
      if (fs::exists(config.out / wdiv::manifest::kBuild)) {
        builds = wdiv::load_builds(config);
      } else {
        std::set<std::string> ids;
        for (const auto& [id, _] : probes.native) ids.insert(id);
        for (const auto& [id, _] : probes.wasm) ids.insert(id);
        for (const auto& id : ids) {
          wdiv::BuildPair pair;
          pair.native.test_id = pair.wasm.test_id = id;
          pair.native.target = wdiv::Target::native;
          pair.wasm.target = wdiv::Target::wasm;
          pair.native.ok = pair.wasm.ok = pair.eligible = true;
          builds.push_back(std::move(pair));
        }
      }
      const auto records = wdiv::stage_diff(config, builds, probes);
      return any_divergent(records) ? wdiv::kExitDivergent : wdiv::kExitClean;
    }
    if (classify->parsed()) {
      std::vector<wdiv::TestCase> cases;
      if (fs::exists(config.out / wdiv::manifest::kIngest)) cases = wdiv::load_ingest(config, true);
      const auto records = wdiv::load_divergences(config.out / wdiv::manifest::kDivergences);
      wdiv::stage_classify(config, cases, records, std::cerr);
      return any_divergent(records) ? wdiv::kExitDivergent : wdiv::kExitClean;
    }
    if (report->parsed()) {
      return wdiv::stage_report(config, wdiv::load_ingest(config, false), wdiv::load_builds(config),
                                wdiv::load_labeled(config.out / wdiv::manifest::kDivergences));
    }
  } catch (const wdiv::Error& e) {
    std::cerr << "wdiv: " << e.what() << "\n";
    return wdiv::kExitConfig;
  }
  return wdiv::kExitClean;
}
