#include "wdiv/exec.hpp"

#include <algorithm>
#include <signal.h>

#include <cstring>

#include "json_codec.hpp"
#include "wdiv/errors.hpp"

namespace wdiv {

namespace fs = std::filesystem;

std::string_view to_string(EnvMode mode) {
  switch (mode) {
    case EnvMode::fixed: return "fixed";
    case EnvMode::inherit: return "inherit";
    case EnvMode::empty: return "empty";
  }
  return "fixed";
}

EnvMode parse_env_mode(std::string_view text) {
  if (text == "fixed") return EnvMode::fixed;
  if (text == "inherit") return EnvMode::inherit;
  if (text == "empty") return EnvMode::empty;
  throw ConfigError("env_mode must be fixed, inherit or empty, got: " + std::string(text));
}

void ExecutionLimits::validate() const {
  if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
  if (n_runs < 1) throw ConfigError("runs must be at least 1");
  if (stdout_cap == 0) throw ConfigError("stdout_cap must be positive");
}

std::string_view to_string(Termination::Kind kind) {
  switch (kind) {
    case Termination::Kind::exited: return "exited";
    case Termination::Kind::signaled: return "signaled";
    case Termination::Kind::runtime_trap: return "runtime_trap";
    case Termination::Kind::timed_out: return "timed_out";
  }
  return "exited";
}

std::string signal_name(int signal) {
  if (const char* abbrev = ::sigabbrev_np(signal); abbrev != nullptr) {
    return std::string("SIG") + abbrev;
  }
  return "SIG" + std::to_string(signal);
}

int signal_number(std::string_view name) {
  for (int sig = 1; sig < 65; ++sig) {
    if (signal_name(sig) == name) return sig;
  }
  if (name.substr(0, 3) == "SIG") {
    try {
      return std::stoi(std::string(name.substr(3)));
    } catch (const std::exception&) {
    }
  }
  throw ManifestError("unknown signal: " + std::string(name));
}

std::string describe(const Termination& t) {
  switch (t.kind) {
    case Termination::Kind::exited: return "exited(" + std::to_string(t.code) + ")";
    case Termination::Kind::signaled: return "signaled(" + signal_name(t.signal) + ")";
    case Termination::Kind::runtime_trap: return "runtime_trap(" + t.message + ")";
    case Termination::Kind::timed_out: return "timed_out";
  }
  return "?";
}

bool same_behavior(const ExecutionOutcome& a, const ExecutionOutcome& b) {
  return a.termination == b.termination && a.stdout_stream.digest == b.stdout_stream.digest;
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::deterministic: return "deterministic";
    case Verdict::non_deterministic: return "non_deterministic";
    case Verdict::non_terminating: return "non_terminating";
  }
  return "deterministic";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "deterministic") return Verdict::deterministic;
  if (text == "non_deterministic") return Verdict::non_deterministic;
  if (text == "non_terminating") return Verdict::non_terminating;
  throw ManifestError("unknown verdict: " + std::string(text));
}

Verdict judge(const std::vector<ExecutionOutcome>& runs) {
  bool mismatch = false;
  for (const auto& run : runs) {
    if (run.termination.kind == Termination::Kind::timed_out) return Verdict::non_terminating;
    if (!same_behavior(run, runs.front())) mismatch = true;
  }
  return mismatch ? Verdict::non_deterministic : Verdict::deterministic;
}

Termination map_wasm_termination(const ProcessResult& result, std::string_view trap_marker) {
  switch (result.kind) {
    case ProcessResult::Kind::timed_out: return Termination::timed_out();
    case ProcessResult::Kind::signaled: return Termination::signaled(result.signal);
    case ProcessResult::Kind::exited: break;
  }
  if (result.exit_code != 0 && !trap_marker.empty()) {
    const std::string err = to_text(result.err.data);
    // Runtimes print context lines before the trap cause; the last marker line is the cause.
    std::string message;
    std::size_t pos = 0;
    while (pos < err.size()) {
      auto end = err.find('\n', pos);
      if (end == std::string::npos) end = err.size();
      std::string_view line(err.data() + pos, end - pos);
      if (const auto at = line.find(trap_marker); at != std::string_view::npos) {
        line.remove_prefix(at);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        message = std::string(line);
      }
      pos = end + 1;
    }
    if (!message.empty()) return Termination::trap(std::move(message));
  }
  return Termination::exited(result.exit_code);
}

Executor::Executor(fs::path workspace, WasmRuntimeConfig runtime, ExecutionLimits limits)
    : workspace_(fs::absolute(std::move(workspace))),
      runtime_(std::move(runtime)),
      limits_(limits) {
  limits_.validate();
  std::vector<std::string> argv;
  try {
    argv = split_command(runtime_.command_template);
  } catch (const ConfigError& e) {
    throw BackendMissing(std::string("wasm_runtime: ") + e.what());
  }
  if (argv.empty()) throw BackendMissing("wasm_runtime is empty");
  if (!find_executable(argv.front())) {
    throw BackendMissing("wasm_runtime: executable not found: " + argv.front());
  }
  const bool has_module = std::any_of(argv.begin(), argv.end(), [](const std::string& a) {
    return a.find("{module}") != std::string::npos;
  });
  if (!has_module) throw BackendMissing("wasm_runtime template lacks {module}: " + runtime_.command_template);
}

namespace {

std::vector<std::string> guest_env(EnvMode mode) {
  if (mode == EnvMode::fixed) return {"PATH=" + std::string(kFixedPath)};
  return {};
}

std::optional<std::vector<std::string>> process_env(EnvMode mode) {
  switch (mode) {
    case EnvMode::fixed: return std::vector<std::string>{"PATH=" + std::string(kFixedPath)};
    case EnvMode::inherit: return std::nullopt;
    case EnvMode::empty: return std::vector<std::string>{};
  }
  return std::nullopt;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::vector<std::string> Executor::wasm_command(const fs::path& module) const {
  std::vector<std::string> out;
  for (std::string arg : split_command(runtime_.command_template)) {
    if (arg == "{env}") {
      for (const auto& kv : guest_env(limits_.env_mode)) {
        out.push_back("--env");
        out.push_back(kv);
      }
      continue;
    }
    replace_all(arg, "{module}", module.string());
    out.push_back(std::move(arg));
  }
  return out;
}

ExecutionOutcome Executor::execute(const CompileArtifact& artifact) const {
  if (!artifact.ok) throw SpawnError("artifact did not compile: " + artifact.test_id);
  const fs::path binary = workspace_ / artifact.binary_path;

  ProcessSpec spec;
  spec.cwd = workspace_;
  spec.timeout = limits_.timeout;
  spec.capture_cap = limits_.stdout_cap;
  spec.file_size_limit = limits_.file_size;
  if (artifact.target == Target::native) {
    spec.argv = {binary.string()};
    spec.env = process_env(limits_.env_mode);
    spec.address_space_limit = limits_.native_address_space;
  } else {
    spec.argv = wasm_command(binary);
    // The runtime process itself needs a usable environment in every mode
    // except `empty`; guest variables travel through {env}.
    spec.env = process_env(limits_.env_mode);
  }

  const ProcessResult result = run_process(spec);
  ExecutionOutcome outcome;
  outcome.stdout_stream = result.out;
  outcome.stderr_stream = result.err;
  outcome.wall_time = result.wall_time;
  if (artifact.target == Target::wasm) {
    outcome.termination = map_wasm_termination(result, runtime_.trap_marker);
  } else {
    switch (result.kind) {
      case ProcessResult::Kind::exited: outcome.termination = Termination::exited(result.exit_code); break;
      case ProcessResult::Kind::signaled: outcome.termination = Termination::signaled(result.signal); break;
      case ProcessResult::Kind::timed_out: outcome.termination = Termination::timed_out(); break;
    }
  }
  return outcome;
}

BehaviorProfile Executor::probe(const CompileArtifact& artifact) const {
  BehaviorProfile profile;
  profile.test_id = artifact.test_id;
  profile.target = artifact.target;
  profile.env_mode = limits_.env_mode;
  for (int i = 0; i < limits_.n_runs; ++i) {
    profile.runs.push_back(execute(artifact));
    const ExecutionOutcome& last = profile.runs.back();
    if (last.termination.kind == Termination::Kind::timed_out) break;
    if (!same_behavior(last, profile.runs.front())) break;
  }
  profile.verdict = judge(profile.runs);
  return profile;
}

namespace codec {

json stream_to_json(const StreamCapture& capture) {
  json j;
  j["b64"] = base64_encode(capture.data);
  j["sha256"] = capture.digest;
  j["size"] = capture.size;
  j["truncated"] = capture.truncated();
  return j;
}

StreamCapture stream_from_json(const json& j) {
  StreamCapture c;
  c.data = base64_decode(j.at("b64").get<std::string>());
  c.digest = j.at("sha256").get<std::string>();
  c.size = j.at("size").get<std::uint64_t>();
  return c;
}

json termination_to_json(const Termination& t) {
  json j;
  j["kind"] = std::string(to_string(t.kind));
  switch (t.kind) {
    case Termination::Kind::exited: j["code"] = t.code; break;
    case Termination::Kind::signaled:
      j["signal"] = signal_name(t.signal);
      j["signal_number"] = t.signal;
      break;
    case Termination::Kind::runtime_trap: j["message"] = t.message; break;
    case Termination::Kind::timed_out: break;
  }
  return j;
}

Termination termination_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "exited") return Termination::exited(j.at("code").get<int>());
  if (kind == "signaled") {
    if (j.contains("signal_number")) return Termination::signaled(j.at("signal_number").get<int>());
    return Termination::signaled(signal_number(j.at("signal").get<std::string>()));
  }
  if (kind == "runtime_trap") return Termination::trap(j.at("message").get<std::string>());
  if (kind == "timed_out") return Termination::timed_out();
  throw ManifestError("unknown termination kind: " + kind);
}

json outcome_to_json(const ExecutionOutcome& o) {
  json j;
  j["termination"] = termination_to_json(o.termination);
  j["stdout"] = stream_to_json(o.stdout_stream);
  j["stderr"] = stream_to_json(o.stderr_stream);
  j["wall_time_ms"] = o.wall_time.count();
  return j;
}

ExecutionOutcome outcome_from_json(const json& j) {
  ExecutionOutcome o;
  o.termination = termination_from_json(j.at("termination"));
  o.stdout_stream = stream_from_json(j.at("stdout"));
  o.stderr_stream = stream_from_json(j.at("stderr"));
  o.wall_time = std::chrono::milliseconds(j.value("wall_time_ms", std::int64_t{0}));
  return o;
}

}  // namespace codec

std::string encode_outcome_json(const ExecutionOutcome& outcome) {
  return codec::dump(codec::outcome_to_json(outcome));
}

ExecutionOutcome decode_outcome_json(std::string_view text) {
  try {
    return codec::outcome_from_json(codec::json::parse(text));
  } catch (const codec::json::exception& e) {
    throw ManifestError(std::string("bad outcome: ") + e.what());
  }
}

std::string encode_profile(const BehaviorProfile& profile) {
  codec::json j;
  j["test_id"] = profile.test_id;
  j["target"] = std::string(to_string(profile.target));
  j["env_mode"] = std::string(to_string(profile.env_mode));
  j["verdict"] = std::string(to_string(profile.verdict));
  j["runs"] = codec::json::array();
  for (const auto& run : profile.runs) j["runs"].push_back(codec::outcome_to_json(run));
  return codec::dump(j);
}

BehaviorProfile decode_profile(std::string_view line) {
  try {
    const auto j = codec::json::parse(line);
    BehaviorProfile p;
    p.test_id = j.at("test_id").get<std::string>();
    p.target = parse_target(j.at("target").get<std::string>());
    p.env_mode = parse_env_mode(j.at("env_mode").get<std::string>());
    p.verdict = parse_verdict(j.at("verdict").get<std::string>());
    for (const auto& run : j.at("runs")) p.runs.push_back(codec::outcome_from_json(run));
    if (p.runs.empty()) throw ManifestError("profile without runs: " + p.test_id);
    return p;
  } catch (const codec::json::exception& e) {
    throw ManifestError(std::string("bad probe entry: ") + e.what());
  } catch (const ConfigError& e) {
    throw ManifestError(e.what());
  }
}

}  // namespace wdiv
