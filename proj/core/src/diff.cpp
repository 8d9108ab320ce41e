#include "wdiv/diff.hpp"

#include <algorithm>

#include "json_codec.hpp"
#include "wdiv/errors.hpp"

namespace wdiv {

std::string_view to_string(ExcludedReason reason) {
  switch (reason) {
    case ExcludedReason::non_deterministic_native: return "non_deterministic_native";
    case ExcludedReason::non_deterministic_wasm: return "non_deterministic_wasm";
    case ExcludedReason::non_terminating_native: return "non_terminating_native";
    case ExcludedReason::non_terminating_wasm: return "non_terminating_wasm";
    case ExcludedReason::ineligible_build: return "ineligible_build";
    case ExcludedReason::harness_error: return "harness_error";
  }
  return "harness_error";
}

ExcludedReason parse_excluded_reason(std::string_view text) {
  for (auto r : {ExcludedReason::non_deterministic_native, ExcludedReason::non_deterministic_wasm,
                 ExcludedReason::non_terminating_native, ExcludedReason::non_terminating_wasm,
                 ExcludedReason::ineligible_build, ExcludedReason::harness_error}) {
    if (to_string(r) == text) return r;
  }
  throw ManifestError("unknown excluded reason: " + std::string(text));
}

std::optional<std::uint64_t> first_mismatch(const StreamCapture& a, const StreamCapture& b) {
  if (a.digest == b.digest && a.size == b.size) return std::nullopt;
  const std::size_t common = std::min(a.data.size(), b.data.size());
  const auto diff = std::mismatch(a.data.begin(), a.data.begin() + static_cast<std::ptrdiff_t>(common),
                                  b.data.begin());
  if (diff.first != a.data.begin() + static_cast<std::ptrdiff_t>(common)) {
    return static_cast<std::uint64_t>(diff.first - a.data.begin());
  }
  // Captured prefixes agree. If one side was cut by the cap the true offset is
  // somewhere past it; report the end of what both sides still show.
  if (a.truncated() || b.truncated()) return static_cast<std::uint64_t>(common);
  return std::min(a.size, b.size);
}

Facets compute_facets(const ExecutionOutcome& native, const ExecutionOutcome& wasm) {
  Facets f;
  f.termination_differs = !(native.termination == wasm.termination);
  f.stdout_differs = native.stdout_stream.digest != wasm.stdout_stream.digest ||
                     native.stdout_stream.size != wasm.stdout_stream.size;
  return f;
}

std::optional<DivergenceRecord> compare(const BehaviorProfile& native, const BehaviorProfile& wasm) {
  if (native.test_id != wasm.test_id) {
    throw MismatchedCase("comparing " + native.test_id + " with " + wasm.test_id);
  }
  DivergenceRecord record;
  record.test_id = native.test_id;
  record.env_mode = native.env_mode;
  record.native_verdict = native.verdict;
  record.wasm_verdict = wasm.verdict;
  if (!native.runs.empty()) record.native = native.canonical();
  if (!wasm.runs.empty()) record.wasm = wasm.canonical();

  // Non-termination outranks non-determinism, and native is reported first.
  if (native.verdict == Verdict::non_terminating) {
    record.excluded_reason = ExcludedReason::non_terminating_native;
  } else if (wasm.verdict == Verdict::non_terminating) {
    record.excluded_reason = ExcludedReason::non_terminating_wasm;
  } else if (native.verdict == Verdict::non_deterministic) {
    record.excluded_reason = ExcludedReason::non_deterministic_native;
  } else if (wasm.verdict == Verdict::non_deterministic) {
    record.excluded_reason = ExcludedReason::non_deterministic_wasm;
  }
  if (record.excluded_reason) return record;

  if (native.runs.empty() || wasm.runs.empty()) {
    record.excluded_reason = ExcludedReason::harness_error;
    record.note = "profile without runs";
    return record;
  }

  record.facets = compute_facets(*record.native, *record.wasm);
  if (!record.facets.any()) return std::nullopt;
  if (record.facets.stdout_differs) {
    record.first_stdout_mismatch =
        first_mismatch(record.native->stdout_stream, record.wasm->stdout_stream);
  }
  return record;
}

DivergenceRecord ineligible_record(const std::string& test_id, EnvMode env_mode, std::string note) {
  DivergenceRecord record;
  record.test_id = test_id;
  record.env_mode = env_mode;
  record.excluded_reason = ExcludedReason::ineligible_build;
  record.note = std::move(note);
  return record;
}

namespace codec {

json divergence_to_json(const DivergenceRecord& r) {
  json j;
  j["test_id"] = r.test_id;
  j["env_mode"] = std::string(to_string(r.env_mode));
  j["divergent"] = r.divergent();
  j["excluded_reason"] = r.excluded_reason ? json(std::string(to_string(*r.excluded_reason))) : json();
  j["note"] = r.note;
  j["native_verdict"] = r.native_verdict ? json(std::string(to_string(*r.native_verdict))) : json();
  j["wasm_verdict"] = r.wasm_verdict ? json(std::string(to_string(*r.wasm_verdict))) : json();
  j["facets"] = {{"termination_differs", r.facets.termination_differs},
                 {"stdout_differs", r.facets.stdout_differs}};
  j["first_stdout_mismatch"] = r.first_stdout_mismatch ? json(*r.first_stdout_mismatch) : json();
  j["native"] = r.native ? outcome_to_json(*r.native) : json();
  j["wasm"] = r.wasm ? outcome_to_json(*r.wasm) : json();
  return j;
}

DivergenceRecord divergence_from_json(const json& j) {
  DivergenceRecord r;
  r.test_id = j.at("test_id").get<std::string>();
  r.env_mode = parse_env_mode(j.at("env_mode").get<std::string>());
  if (!j.at("excluded_reason").is_null()) {
    r.excluded_reason = parse_excluded_reason(j.at("excluded_reason").get<std::string>());
  }
  r.note = j.value("note", "");
  if (!j.at("native_verdict").is_null()) r.native_verdict = parse_verdict(j.at("native_verdict").get<std::string>());
  if (!j.at("wasm_verdict").is_null()) r.wasm_verdict = parse_verdict(j.at("wasm_verdict").get<std::string>());
  r.facets.termination_differs = j.at("facets").at("termination_differs").get<bool>();
  r.facets.stdout_differs = j.at("facets").at("stdout_differs").get<bool>();
  if (!j.at("first_stdout_mismatch").is_null()) {
    r.first_stdout_mismatch = j.at("first_stdout_mismatch").get<std::uint64_t>();
  }
  if (!j.at("native").is_null()) r.native = outcome_from_json(j.at("native"));
  if (!j.at("wasm").is_null()) r.wasm = outcome_from_json(j.at("wasm"));
  return r;
}

}  // namespace codec

std::string encode_divergence(const DivergenceRecord& record) {
  return codec::dump(codec::divergence_to_json(record));
}

DivergenceRecord decode_divergence(std::string_view line) {
  try {
    return codec::divergence_from_json(codec::json::parse(line));
  } catch (const codec::json::exception& e) {
    throw ManifestError(std::string("bad divergence entry: ") + e.what());
  } catch (const ConfigError& e) {
    throw ManifestError(e.what());
  }
}

}  // namespace wdiv
