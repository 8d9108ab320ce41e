#include "wdiv/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "wdiv/common.hpp"
#include "wdiv/errors.hpp"

namespace wdiv {

namespace fs = std::filesystem;

std::string normalize_key(std::string_view key) {
  std::string out;
  for (char c : key) {
    out += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "corpus",        "out",           "workspace",     "jobs",
      "timeout-secs",  "runs",          "env-mode",      "stdout-cap",
      "address-space-mb", "native-cc",  "wasm-cc",       "wasm-sysroot",
      "cflags",        "native-cflags", "wasm-cflags",   "defines",
      "include-dirs",  "extra-sources", "ldflags",       "compile-timeout-secs",
      "wasm-runtime",  "trap-marker",   "symbol-tool",   "prologue-window",
      "rule-order",    "rules-off",     "memory-layout", "cwe",
      "category",      "seed",          "samples",       "format",
  };
  return keys;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (auto t = trim(cur); !t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (auto t = trim(cur); !t.empty()) out.push_back(t);
  return out;
}

std::string join_list(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (const auto& i : items) {
    if (!out.empty()) out += sep;
    out += i;
  }
  return out;
}

fs::path resolve_path(const std::string& value, const fs::path& base) {
  fs::path p(value);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

std::uint64_t parse_unsigned(const Setting& s) {
  const std::string v = trim(s.value);
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw ConfigError(s.key + ": expected a non-negative integer, got '" + s.value + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::out_of_range&) {
    throw ConfigError(s.key + ": value out of range: " + s.value);
  }
}

std::chrono::milliseconds parse_seconds(const Setting& s) {
  const std::string v = trim(s.value);
  double secs = 0;
  std::size_t used = 0;
  try {
    secs = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(secs) || secs <= 0 || secs > 1e7) {
    throw ConfigError(s.key + ": expected a positive number of seconds, got '" + s.value + "'");
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(secs * 1000.0)));
}

bool parse_bool(const Setting& s) {
  const std::string v = normalize_key(trim(s.value));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(s.key + ": expected a boolean, got '" + s.value + "'");
}

std::string format_seconds(std::chrono::milliseconds ms) {
  std::ostringstream out;
  if (ms.count() % 1000 == 0) {
    out << ms.count() / 1000;
  } else {
    out << static_cast<double>(ms.count()) / 1000.0;
  }
  return out.str();
}

}  // namespace

std::vector<Setting> parse_config_text(std::string_view text, const fs::path& base) {
  std::vector<Setting> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    out.push_back({normalize_key(trim(t.substr(0, eq))), trim(t.substr(eq + 1)), base});
  }
  return out;
}

std::vector<Setting> read_config_file(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config file: ") + e.what());
  }
  return parse_config_text(text, fs::absolute(path).parent_path());
}

std::vector<Setting> settings_from_environment(const std::vector<std::string>& entries, const fs::path& base) {
  std::vector<Setting> out;
  for (const auto& e : entries) {
    if (e.rfind("WDIV_", 0) != 0) continue;
    const auto eq = e.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = normalize_key(e.substr(5, eq - 5));
    if (key == "config") continue;
    out.push_back({key, e.substr(eq + 1), base});
  }
  return out;
}

void apply_setting(RunConfig& c, const Setting& s) {
  const std::string& k = s.key;
  const std::string& v = s.value;
  if (k == "corpus") {
    c.corpus = resolve_path(v, s.base);
  } else if (k == "out") {
    c.out = resolve_path(v, s.base);
  } else if (k == "workspace") {
    c.workspace = v.empty() ? fs::path() : resolve_path(v, s.base);
  } else if (k == "jobs") {
    const auto n = parse_unsigned(s);
    if (n == 0 || n > 1024) throw ConfigError("jobs: must be between 1 and 1024");
    c.jobs = static_cast<unsigned>(n);
  } else if (k == "timeout-secs") {
    c.limits.timeout = parse_seconds(s);
  } else if (k == "runs") {
    const auto n = parse_unsigned(s);
    if (n == 0 || n > 1000) throw ConfigError("runs: must be between 1 and 1000");
    c.limits.n_runs = static_cast<int>(n);
  } else if (k == "env-mode") {
    c.limits.env_mode = parse_env_mode(v);
  } else if (k == "stdout-cap") {
    const auto n = parse_unsigned(s);
    if (n == 0) throw ConfigError("stdout-cap: must be positive");
    c.limits.stdout_cap = static_cast<std::size_t>(n);
  } else if (k == "address-space-mb") {
    const auto n = parse_unsigned(s);
    c.limits.native_address_space = n == 0 ? std::nullopt : std::optional<std::uint64_t>(n << 20);
  } else if (k == "native-cc") {
    c.toolchain.native_cc = v;
  } else if (k == "wasm-cc") {
    c.toolchain.wasm_cc = v;
  } else if (k == "wasm-sysroot") {
    c.toolchain.wasm_sysroot = v.empty() ? std::string() : resolve_path(v, s.base).string();
  } else if (k == "cflags") {
    c.toolchain.cflags = split_command(v);
  } else if (k == "native-cflags") {
    c.toolchain.native_cflags = split_command(v);
  } else if (k == "wasm-cflags") {
    c.toolchain.wasm_cflags = split_command(v);
  } else if (k == "defines") {
    c.toolchain.defines = split_command(v);
  } else if (k == "include-dirs" || k == "extra-sources") {
    std::vector<std::string> paths;
    for (const auto& p : split_command(v)) paths.push_back(resolve_path(p, s.base).string());
    (k == "include-dirs" ? c.toolchain.include_dirs : c.toolchain.extra_sources) = std::move(paths);
  } else if (k == "ldflags") {
    c.toolchain.ldflags = split_command(v);
  } else if (k == "compile-timeout-secs") {
    c.toolchain.compile_timeout = std::chrono::duration_cast<std::chrono::seconds>(parse_seconds(s));
    if (c.toolchain.compile_timeout.count() == 0) c.toolchain.compile_timeout = std::chrono::seconds(1);
  } else if (k == "wasm-runtime") {
    if (v.find("{module}") == std::string::npos) {
      throw ConfigError("wasm-runtime: command template must contain {module}");
    }
    c.runtime.command_template = v;
  } else if (k == "trap-marker") {
    c.runtime.trap_marker = v;
  } else if (k == "symbol-tool") {
    c.evidence.symbols.external_command = v;
  } else if (k == "prologue-window") {
    const auto n = parse_unsigned(s);
    if (n == 0) throw ConfigError("prologue-window: must be positive");
    c.evidence.scan.prologue_window = static_cast<std::size_t>(n);
  } else if (k == "rule-order") {
    std::vector<RuleId> order;
    for (const auto& r : split_list(v)) {
      const RuleId id = parse_rule_id(r);
      if (std::find(order.begin(), order.end(), id) != order.end()) {
        throw ConfigError("rule-order: " + r + " listed twice");
      }
      order.push_back(id);
    }
    c.classifier.order = std::move(order);
  } else if (k == "rules-off") {
    c.classifier.disabled.clear();
    for (const auto& r : split_list(v)) c.classifier.disabled.insert(parse_rule_id(r));
  } else if (k == "memory-layout") {
    c.classifier.memory_layout = parse_bool(s);
  } else if (k == "cwe") {
    c.filter.cwes.clear();
    for (const auto& item : split_list(v)) {
      Setting one{k, item, s.base};
      c.filter.cwes.push_back(static_cast<int>(parse_unsigned(one)));
    }
  } else if (k == "category") {
    c.filter.categories = split_list(v);
  } else if (k == "seed") {
    c.seed = parse_unsigned(s);
  } else if (k == "samples") {
    const auto n = parse_unsigned(s);
    if (n == 0) throw ConfigError("samples: must be at least 1");
    c.sample_k = static_cast<std::size_t>(n);
  } else if (k == "format") {
    std::set<ReportFormat> formats;
    for (const auto& f : split_list(v)) {
      if (f == "all") {
        formats = {ReportFormat::jsonl, ReportFormat::markdown, ReportFormat::csv};
      } else {
        formats.insert(parse_report_format(f));
      }
    }
    if (formats.empty()) throw ConfigError("format: at least one format is required");
    c.formats = std::move(formats);
  } else {
    throw ConfigError("unknown setting: " + k);
  }
}

RunConfig resolve_config(const std::optional<fs::path>& config_file, const std::vector<std::string>& environ_entries,
                         const std::vector<Setting>& flags, const fs::path& cwd) {
  RunConfig config;
  config.out = (cwd / config.out).lexically_normal();
  if (config_file) {
    for (const auto& s : read_config_file(*config_file)) apply_setting(config, s);
  }
  for (const auto& s : settings_from_environment(environ_entries, cwd)) apply_setting(config, s);
  for (const auto& s : flags) apply_setting(config, s);
  return config;
}

void validate(const RunConfig& c, bool need_corpus) {
  c.limits.validate();
  if (c.jobs == 0) throw ConfigError("jobs must be at least 1");
  if (c.sample_k == 0) throw ConfigError("samples must be at least 1");
  if (c.out.empty()) throw ConfigError("an output directory is required");
  if (need_corpus) {
    if (c.corpus.empty()) throw ConfigError("a corpus root is required (--corpus)");
    std::error_code ec;
    if (!fs::is_directory(c.corpus, ec)) throw ConfigError("corpus root is not a directory: " + c.corpus.string());
  }
  for (const auto& src : c.toolchain.extra_sources) {
    std::error_code ec;
    if (!fs::is_regular_file(src, ec)) throw ConfigError("extra source not found: " + src);
  }
}

std::string dump_config(const RunConfig& c) {
  std::vector<std::string> order;
  for (auto r : c.classifier.order) order.emplace_back(to_string(r));
  std::vector<std::string> off;
  for (auto r : c.classifier.disabled) off.emplace_back(to_string(r));
  std::vector<std::string> cwes;
  for (int w : c.filter.cwes) cwes.push_back(std::to_string(w));
  std::vector<std::string> formats;
  for (auto f : c.formats) formats.emplace_back(to_string(f));

  const std::map<std::string, std::string> values = {
      {"corpus", c.corpus.string()},
      {"out", c.out.string()},
      {"workspace", c.workspace_dir().string()},
      {"jobs", std::to_string(c.jobs)},
      {"timeout-secs", format_seconds(c.limits.timeout)},
      {"runs", std::to_string(c.limits.n_runs)},
      {"env-mode", std::string(to_string(c.limits.env_mode))},
      {"stdout-cap", std::to_string(c.limits.stdout_cap)},
      {"address-space-mb", std::to_string(c.limits.native_address_space.value_or(0) >> 20)},
      {"native-cc", c.toolchain.native_cc},
      {"wasm-cc", c.toolchain.wasm_cc},
      {"wasm-sysroot", c.toolchain.wasm_sysroot},
      {"cflags", join_command(c.toolchain.cflags)},
      {"native-cflags", join_command(c.toolchain.native_cflags)},
      {"wasm-cflags", join_command(c.toolchain.wasm_cflags)},
      {"defines", join_command(c.toolchain.defines)},
      {"include-dirs", join_command(c.toolchain.include_dirs)},
      {"extra-sources", join_command(c.toolchain.extra_sources)},
      {"ldflags", join_command(c.toolchain.ldflags)},
      {"compile-timeout-secs", std::to_string(c.toolchain.compile_timeout.count())},
      {"wasm-runtime", c.runtime.command_template},
      {"trap-marker", c.runtime.trap_marker},
      {"symbol-tool", c.evidence.symbols.external_command},
      {"prologue-window", std::to_string(c.evidence.scan.prologue_window)},
      {"rule-order", join_list(order, ",")},
      {"rules-off", join_list(off, ",")},
      {"memory-layout", c.classifier.memory_layout ? "true" : "false"},
      {"cwe", join_list(cwes, ",")},
      {"category", join_list(c.filter.categories, ",")},
      {"seed", std::to_string(c.seed)},
      {"samples", std::to_string(c.sample_k)},
      {"format", join_list(formats, ",")},
  };
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + values.at(key) + "\n";
  return out;
}

}  // namespace wdiv
