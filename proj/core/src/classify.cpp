#include "wdiv/classify.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <csignal>
#include <regex>

#include "json_codec.hpp"
#include "wdiv/common.hpp"
#include "wdiv/errors.hpp"

namespace wdiv {

namespace {

struct SubcauseInfo {
  Subcause subcause;
  std::string_view key;
  std::string_view title;
  RootCause root;
};

constexpr std::array<SubcauseInfo, 12> kSubcauses = {{
    {Subcause::wide_characters, "wide_characters", "Wide characters", RootCause::stdlib},
    {Subcause::malloc_free, "malloc_free", "malloc/free", RootCause::stdlib},
    {Subcause::puts_return, "puts_return", "puts", RootCause::stdlib},
    {Subcause::printf_args, "printf_args", "printf", RootCause::stdlib},
    {Subcause::stack_smashing, "stack_smashing", "Stack smashing", RootCause::security_protection},
    {Subcause::memory_protection, "memory_protection", "Memory protections", RootCause::security_protection},
    {Subcause::uninitialized_data, "uninitialized_data", "Uninitialised data", RootCause::execution_environment},
    {Subcause::pointer_width, "pointer_width", "Size of pointers", RootCause::execution_environment},
    {Subcause::number_width, "number_width", "Size of numbers", RootCause::execution_environment},
    {Subcause::os_environment, "os_environment", "OS environment", RootCause::execution_environment},
    {Subcause::memory_layout, "memory_layout", "Memory layout", RootCause::execution_environment},
    {Subcause::none, "none", "Unclassified", RootCause::unclassified},
}};

const SubcauseInfo& info(Subcause s) {
  for (const auto& i : kSubcauses) {
    if (i.subcause == s) return i;
  }
  return kSubcauses.back();
}

}  // namespace

std::string_view to_string(RootCause root) {
  switch (root) {
    case RootCause::stdlib: return "stdlib";
    case RootCause::security_protection: return "security_protection";
    case RootCause::execution_environment: return "execution_environment";
    case RootCause::unclassified: return "unclassified";
  }
  return "unclassified";
}

std::string_view title(RootCause root) {
  switch (root) {
    case RootCause::stdlib: return "Different standard library";
    case RootCause::security_protection: return "Security protections";
    case RootCause::execution_environment: return "Execution environment";
    case RootCause::unclassified: return "Unclassified";
  }
  return "Unclassified";
}

std::string_view to_string(Subcause subcause) { return info(subcause).key; }
std::string_view title(Subcause subcause) { return info(subcause).title; }
RootCause root_of(Subcause subcause) { return info(subcause).root; }

std::string_view to_string(Confidence confidence) {
  switch (confidence) {
    case Confidence::high: return "high";
    case Confidence::medium: return "medium";
    case Confidence::low: return "low";
  }
  return "low";
}

std::string_view to_string(EvidenceSource source) {
  switch (source) {
    case EvidenceSource::native_stderr: return "native_stderr";
    case EvidenceSource::native_symbols: return "native_symbols";
    case EvidenceSource::wasm_stdout: return "wasm_stdout";
    case EvidenceSource::native_stdout: return "native_stdout";
    case EvidenceSource::outcome_shape: return "outcome_shape";
    case EvidenceSource::wasm_scan: return "wasm_scan";
    case EvidenceSource::source_text: return "source_text";
  }
  return "outcome_shape";
}

RootCause parse_root_cause(std::string_view text) {
  for (auto r : {RootCause::stdlib, RootCause::security_protection, RootCause::execution_environment,
                 RootCause::unclassified}) {
    if (to_string(r) == text) return r;
  }
  throw ManifestError("unknown root cause: " + std::string(text));
}

Subcause parse_subcause(std::string_view text) {
  for (const auto& i : kSubcauses) {
    if (i.key == text) return i.subcause;
  }
  throw ManifestError("unknown subcause: " + std::string(text));
}

Confidence parse_confidence(std::string_view text) {
  for (auto c : {Confidence::high, Confidence::medium, Confidence::low}) {
    if (to_string(c) == text) return c;
  }
  throw ManifestError("unknown confidence: " + std::string(text));
}

EvidenceSource parse_evidence_source(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(EvidenceSource::source_text); ++i) {
    const auto s = static_cast<EvidenceSource>(i);
    if (to_string(s) == text) return s;
  }
  throw ManifestError("unknown evidence source: " + std::string(text));
}

const std::vector<Subcause>& all_subcauses() {
  static const std::vector<Subcause> list = [] {
    std::vector<Subcause> out;
    for (const auto& i : kSubcauses) {
      if (i.subcause != Subcause::none) out.push_back(i.subcause);
    }
    return out;
  }();
  return list;
}

const std::vector<RootCause>& classified_roots() {
  static const std::vector<RootCause> list = {RootCause::stdlib, RootCause::security_protection,
                                              RootCause::execution_environment};
  return list;
}

std::string_view to_string(RuleId rule) {
  static constexpr std::array<std::string_view, 11> names = {"R1", "R2", "R3", "R4",  "R5", "R6",
                                                             "R7", "R8", "R9", "R10", "R11"};
  return names[static_cast<std::size_t>(rule) - 1];
}

RuleId parse_rule_id(std::string_view text) {
  if (text.size() >= 2 && (text[0] == 'R' || text[0] == 'r')) {
    int n = 0;
    for (char c : text.substr(1)) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw ConfigError("bad rule id: " + std::string(text));
      n = n * 10 + (c - '0');
      if (n > 11) break;
    }
    if (n >= 1 && n <= 11) return static_cast<RuleId>(n);
  }
  throw ConfigError("bad rule id: " + std::string(text));
}

bool ClassifierOptions::enabled(RuleId rule) const {
  if (disabled.count(rule)) return false;
  if (rule == RuleId::R11) return memory_layout;
  return true;
}

namespace {

// Comments removed; string and character literal contents blanked.
std::string code_only(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == '/' && i + 1 < n && text[i + 1] == '/') {
      while (i < n && text[i] != '\n') {
        if (text[i] == '\\' && i + 1 < n && text[i + 1] == '\n') ++i;
        ++i;
      }
      out += ' ';
    } else if (c == '/' && i + 1 < n && text[i + 1] == '*') {
      const auto end = text.find("*/", i + 2);
      i = end == std::string_view::npos ? n : end + 2;
      out += ' ';
    } else if (c == '"' || c == '\'') {
      out += c;
      ++i;
      while (i < n && text[i] != c && text[i] != '\n') {
        if (text[i] == '\\') ++i;
        ++i;
      }
      out += c;
      if (i < n && text[i] == c) ++i;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool mentions(std::string_view code, std::string_view word) {
  for (auto pos = code.find(word); pos != std::string_view::npos; pos = code.find(word, pos + 1)) {
    const bool left = pos == 0 || !ident_char(code[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right = end >= code.size() || !ident_char(code[end]);
    if (left && right) return true;
  }
  return false;
}

std::optional<std::string> first_mention(std::string_view code, std::initializer_list<std::string_view> words) {
  for (auto w : words) {
    if (mentions(code, w)) return std::string(w);
  }
  return std::nullopt;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

bool is_signal(const Termination& t, int sig) {
  return t.kind == Termination::Kind::signaled && t.signal == sig;
}

bool printable_text(std::string_view bytes) {
  if (bytes.empty()) return false;
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      if (c < 0x20 && c != '\n' && c != '\r' && c != '\t') return false;
      if (c == 0x7F) return false;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= bytes.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(bytes[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::vector<unsigned long long> integers(std::string_view line) {
  std::vector<unsigned long long> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isdigit(static_cast<unsigned char>(line[i]))) {
      unsigned long long v = 0;
      bool overflow = false;
      while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        if (v > (~0ULL - 9) / 10) overflow = true;
        v = v * 10 + static_cast<unsigned>(line[i] - '0');
        ++i;
      }
      if (!overflow) out.push_back(v);
    } else {
      ++i;
    }
  }
  return out;
}

// A pair of corresponding lines where a native number is twice the Wasm one.
std::optional<std::string> width_halving(std::string_view native, std::string_view wasm) {
  const auto a = split_lines(native);
  const auto b = split_lines(wasm);
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] == b[i]) continue;
    const auto na = integers(a[i]);
    const auto nb = integers(b[i]);
    if (na.size() != nb.size()) continue;
    for (std::size_t k = 0; k < na.size(); ++k) {
      if (nb[k] > 0 && na[k] == 2 * nb[k]) {
        return std::to_string(na[k]) + " vs " + std::to_string(nb[k]);
      }
    }
  }
  return std::nullopt;
}

std::string shape(const DivergenceRecord& r) {
  return "native " + describe(r.native->termination) + ", wasm " + describe(r.wasm->termination);
}

const std::regex& puts_check() {
  static const std::regex re(
      R"(\bf?puts\s*\((?:[^;()]|\([^;()]*\))*\)\s*(?:==|!=|<=|>=|<|>)\s*0\b|\b0\s*(?:==|!=)\s*f?puts\s*\()");
  return re;
}

const std::regex& sizeof_pointer() {
  static const std::regex re(R"(\bsizeof\s*\(\s*[A-Za-z_][A-Za-z_0-9 \t]*\*[\s*]*\))");
  return re;
}

struct Context {
  const DivergenceRecord& record;
  const Evidence& ev;
  std::string code;
  std::string native_out;
  std::string wasm_out;
};

using Match = std::optional<RootCauseLabel>;

RootCauseLabel label(Subcause s, Confidence c, std::vector<EvidenceItem> evidence) {
  return RootCauseLabel{root_of(s), s, c, std::move(evidence), {}};
}

Match r1(const Context& x) {
  const auto& n = x.record.native->termination;
  const auto& w = x.record.wasm->termination;
  if (!is_signal(n, SIGABRT) || w.kind == Termination::Kind::signaled) return std::nullopt;
  for (std::string_view p : {"free(): invalid pointer", "double free", "malloc(): "}) {
    if (contains(x.ev.native_stderr, p)) {
      return label(Subcause::malloc_free, Confidence::high,
                   {{EvidenceSource::native_stderr, std::string(p)},
                    {EvidenceSource::outcome_shape, shape(x.record)}});
    }
  }
  return std::nullopt;
}

Match r2(const Context& x) {
  const auto& n = x.record.native->termination;
  const auto& w = x.record.wasm->termination;
  if (!is_signal(n, SIGABRT) || w.kind != Termination::Kind::exited) return std::nullopt;
  std::vector<EvidenceItem> items;
  if (contains(x.ev.native_stderr, "stack smashing detected")) {
    items.push_back({EvidenceSource::native_stderr, "stack smashing detected"});
  }
  if (x.ev.native_symbol_names) {
    const auto& names = *x.ev.native_symbol_names;
    if (std::find(names.begin(), names.end(), "__stack_chk_fail") != names.end()) {
      items.push_back({EvidenceSource::native_symbols, "__stack_chk_fail"});
    }
  }
  if (items.empty()) return std::nullopt;
  items.push_back({EvidenceSource::outcome_shape, shape(x.record)});
  if (x.ev.wasm_summary) {
    const auto report = wasm::protection_report(*x.ev.wasm_summary);
    const wasm::FrameFinding* pick = nullptr;
    for (std::string_view hint : {"_bad", "main"}) {
      for (const auto& f : report.frames) {
        if (!pick && contains(f.function_name, hint)) pick = &f;
      }
    }
    if (pick) {
      items.push_back({EvidenceSource::wasm_scan,
                       "frame " + std::to_string(pick->frame_size) + " bytes, " +
                           (pick->canary_check ? "canary check" : "no canary check")});
    } else if (report.canary_imports.empty()) {
      items.push_back({EvidenceSource::wasm_scan, "no canary imports"});
    }
  }
  return label(Subcause::stack_smashing, Confidence::high, std::move(items));
}

Match r3(const Context& x) {
  const auto& n = x.record.native->termination;
  const auto& w = x.record.wasm->termination;
  if (!is_signal(n, SIGSEGV) || w.kind != Termination::Kind::exited) return std::nullopt;
  if (x.wasm_out.compare(0, x.native_out.size(), x.native_out) != 0 || x.wasm_out.size() < x.native_out.size()) {
    return std::nullopt;
  }
  return label(Subcause::memory_protection, Confidence::medium,
               {{EvidenceSource::outcome_shape, shape(x.record)},
                {EvidenceSource::wasm_stdout, "extends native stdout (" + std::to_string(x.native_out.size()) +
                                                  " -> " + std::to_string(x.wasm_out.size()) + " bytes)"}});
}

Match r4(const Context& x) {
  if (x.record.facets.termination_differs || !x.record.facets.stdout_differs) return std::nullopt;
  const std::size_t at = static_cast<std::size_t>(x.record.first_stdout_mismatch.value_or(0));
  if (at >= x.wasm_out.size()) return std::nullopt;
  if (!printable_text(std::string_view(x.wasm_out).substr(at))) return std::nullopt;
  const auto word = first_mention(x.code, {"wprintf", "fwide", "wchar_t"});
  if (!word) return std::nullopt;
  return label(Subcause::wide_characters, Confidence::high,
               {{EvidenceSource::wasm_stdout,
                 std::to_string(x.wasm_out.size() - at) + " wasm-only text bytes at offset " + std::to_string(at)},
                {EvidenceSource::source_text, *word}});
}

Match r5(const Context& x) {
  if (!x.record.facets.stdout_differs) return std::nullopt;
  if (contains(x.native_out, "(null)")) return std::nullopt;
  const std::size_t at = static_cast<std::size_t>(x.record.first_stdout_mismatch.value_or(0));
  const std::size_t from = at >= 6 ? at - 6 : 0;
  if (from >= x.wasm_out.size()) return std::nullopt;
  const auto region = std::string_view(x.wasm_out).substr(from, 70);
  const auto hit = region.find("(null)");
  if (hit == std::string_view::npos) return std::nullopt;
  return label(Subcause::printf_args, Confidence::medium,
               {{EvidenceSource::wasm_stdout, "(null) at offset " + std::to_string(from + hit)}});
}

Match r6(const Context& x) {
  if (!x.record.facets.stdout_differs) return std::nullopt;
  std::smatch m;
  if (!std::regex_search(x.code, m, puts_check())) return std::nullopt;
  return label(Subcause::puts_return, Confidence::medium, {{EvidenceSource::source_text, m.str()}});
}

Match r7(const Context& x) {
  if (!x.record.facets.stdout_differs) return std::nullopt;
  std::smatch m;
  if (!std::regex_search(x.code, m, sizeof_pointer())) return std::nullopt;
  const auto pair = width_halving(x.native_out, x.wasm_out);
  if (!pair) return std::nullopt;
  return label(Subcause::pointer_width, Confidence::medium,
               {{EvidenceSource::native_stdout, *pair}, {EvidenceSource::source_text, m.str()}});
}

Match r8(const Context& x) {
  constexpr std::string_view kLongMax = "9223372036854775807";
  if (contains(x.native_out, kLongMax) && !contains(x.wasm_out, kLongMax)) {
    return label(Subcause::number_width, Confidence::medium,
                 {{EvidenceSource::native_stdout, std::string(kLongMax)}});
  }
  if (const auto word = first_mention(x.code, {"strtoul", "LONG_MAX"})) {
    return label(Subcause::number_width, Confidence::medium, {{EvidenceSource::source_text, *word}});
  }
  return std::nullopt;
}

Match r9(const Context& x) {
  if (!env_is_asymmetric(x.record.env_mode) || !mentions(x.code, "getenv")) return std::nullopt;
  return label(Subcause::os_environment, Confidence::high,
               {{EvidenceSource::source_text, "getenv"},
                {EvidenceSource::outcome_shape, "env_mode " + std::string(to_string(x.record.env_mode))}});
}

Match r10(const Context& x) {
  const bool segv = is_signal(x.record.native->termination, SIGSEGV);
  if (!segv && !x.record.facets.stdout_differs) return std::nullopt;
  const auto word = first_mention(x.code, {"alloca", "__builtin_alloca"});
  if (!word) return std::nullopt;
  return label(Subcause::uninitialized_data, Confidence::low,
               {{EvidenceSource::outcome_shape, shape(x.record)}, {EvidenceSource::source_text, *word}});
}

Match r11(const Context& x) {
  if (x.record.facets.termination_differs || !x.record.facets.stdout_differs) return std::nullopt;
  return label(Subcause::memory_layout, Confidence::low,
               {{EvidenceSource::outcome_shape, "stdout-only difference, " + describe(x.record.native->termination)}});
}

}  // namespace

bool source_mentions(std::string_view source_text, std::string_view word) {
  return mentions(code_only(source_text), word);
}

RootCauseLabel classify(const DivergenceRecord& record, const Evidence& evidence, const ClassifierOptions& options) {
  if (record.excluded_reason || !record.facets.any() || !record.native || !record.wasm) return RootCauseLabel{};
  Context x{record, evidence, code_only(evidence.source_text), to_text(record.native->stdout_stream.data),
            to_text(record.wasm->stdout_stream.data)};
  for (const RuleId rule : options.order) {
    if (!options.enabled(rule)) continue;
    Match m;
    switch (rule) {
      case RuleId::R1: m = r1(x); break;
      case RuleId::R2: m = r2(x); break;
      case RuleId::R3: m = r3(x); break;
      case RuleId::R4: m = r4(x); break;
      case RuleId::R5: m = r5(x); break;
      case RuleId::R6: m = r6(x); break;
      case RuleId::R7: m = r7(x); break;
      case RuleId::R8: m = r8(x); break;
      case RuleId::R9: m = r9(x); break;
      case RuleId::R10: m = r10(x); break;
      case RuleId::R11: m = r11(x); break;
    }
    if (m) {
      m->rule = std::string(to_string(rule));
      return *m;
    }
  }
  return RootCauseLabel{};
}

Evidence gather_evidence(const DivergenceRecord& record, const std::filesystem::path& native_binary,
                         const std::filesystem::path& wasm_binary, std::string source_text,
                         const EvidenceOptions& options) {
  Evidence ev;
  ev.native = record.native;
  ev.wasm = record.wasm;
  ev.source_text = std::move(source_text);
  if (record.native) {
    ev.native_stderr = to_text(record.native->stderr_stream.data);
  } else {
    ev.notes.push_back("native outcome unavailable");
  }
  ev.native_symbol_names = extract_undefined_symbols(native_binary, options.symbols);
  if (!ev.native_symbol_names) ev.notes.push_back("native symbols unavailable: " + native_binary.string());
  try {
    const Bytes module = read_file(wasm_binary);
    ev.wasm_summary = wasm::parse_module(module, options.scan);
  } catch (const std::exception& e) {
    ev.notes.push_back(std::string("wasm scan unavailable: ") + e.what());
  }
  return ev;
}

std::string encode_labeled(const LabeledRecord& labeled) {
  auto j = codec::divergence_to_json(labeled.record);
  if (labeled.label) {
    const auto& l = *labeled.label;
    j["rules_version"] = std::string(kRulesVersion);
    j["root"] = std::string(to_string(l.root));
    j["subcause"] = std::string(to_string(l.subcause));
    j["confidence"] = std::string(to_string(l.confidence));
    j["rule"] = l.rule;
    auto items = codec::json::array();
    for (const auto& e : l.evidence) {
      items.push_back({{"source", std::string(to_string(e.source))}, {"signal", e.signal}});
    }
    j["evidence"] = items;
  }
  return codec::dump(j);
}

LabeledRecord decode_labeled(std::string_view line) {
  try {
    const auto j = codec::json::parse(line);
    LabeledRecord out;
    out.record = codec::divergence_from_json(j);
    if (j.contains("root")) {
      RootCauseLabel l;
      l.root = parse_root_cause(j.at("root").get<std::string>());
      l.subcause = parse_subcause(j.at("subcause").get<std::string>());
      l.confidence = parse_confidence(j.at("confidence").get<std::string>());
      l.rule = j.value("rule", "");
      for (const auto& e : j.at("evidence")) {
        l.evidence.push_back(
            {parse_evidence_source(e.at("source").get<std::string>()), e.at("signal").get<std::string>()});
      }
      if (root_of(l.subcause) != l.root) throw ManifestError("subcause " + std::string(to_string(l.subcause)) +
                                                             " is not under " + std::string(to_string(l.root)));
      out.label = std::move(l);
    }
    return out;
  } catch (const codec::json::exception& e) {
    throw ManifestError(std::string("bad divergence entry: ") + e.what());
  } catch (const ConfigError& e) {
    throw ManifestError(e.what());
  }
}

}  // namespace wdiv
