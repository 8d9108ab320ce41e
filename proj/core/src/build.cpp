#include "wdiv/build.hpp"

#include <sys/stat.h>
#include <unistd.h>

#include <system_error>
#include <thread>

#include <nlohmann/json.hpp>
#include "wdiv/errors.hpp"
#include "wdiv/process.hpp"

namespace wdiv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kDiagnosticsCap = 16 * 1024;

std::string first_line(const Bytes& data) {
  std::string text = to_text(data);
  const auto start = text.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) return {};
  const auto end = text.find('\n', start);
  std::string line = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  return line;
}

std::string file_hash(const fs::path& path) {
  return sha256_hex(read_file(path));
}

/// Copies src over dst through a temporary so readers never see a partial binary.
void materialize(const fs::path& src, const fs::path& dst) {
  std::error_code ec;
  fs::create_directories(dst.parent_path(), ec);
  fs::path tmp = dst;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  fs::copy_file(src, tmp, fs::copy_options::overwrite_existing, ec);
  if (ec) throw IoError("copy " + src.string() + " -> " + tmp.string() + ": " + ec.message());
  fs::permissions(tmp, fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec |
                           fs::perms::others_read | fs::perms::others_exec, ec);
  fs::rename(tmp, dst, ec);
  if (ec) throw IoError("rename to " + dst.string() + ": " + ec.message());
}

std::atomic<std::uint64_t> g_tmp_counter{0};

}  // namespace

Toolchain resolve_toolchain(const ToolchainConfig& config, Target target) {
  const std::string& command = target == Target::native ? config.native_cc : config.wasm_cc;
  const std::string key = target == Target::native ? "native_cc" : "wasm_cc";
  std::vector<std::string> argv;
  try {
    argv = split_command(command);
  } catch (const ConfigError& e) {
    throw ToolchainMissing(key + ": " + e.what());
  }
  if (argv.empty()) throw ToolchainMissing(key + " is empty");
  if (!find_executable(argv.front())) {
    throw ToolchainMissing(key + ": executable not found: " + argv.front());
  }

  ProcessSpec spec;
  spec.argv = argv;
  spec.argv.push_back("--version");
  spec.timeout = std::chrono::seconds(60);
  spec.capture_cap = 64 * 1024;
  ProcessResult result;
  try {
    result = run_process(spec);
  } catch (const SpawnError& e) {
    throw ToolchainMissing(key + ": " + e.what());
  }
  if (result.kind != ProcessResult::Kind::exited || result.exit_code != 0) {
    throw ToolchainMissing(key + ": `" + command + " --version` failed: " +
                           first_line(result.err.data));
  }
  Toolchain tc;
  tc.target = target;
  tc.argv_prefix = std::move(argv);
  tc.fingerprint = first_line(result.out.data);
  if (tc.fingerprint.empty()) tc.fingerprint = first_line(result.err.data);
  return tc;
}

Builder::Builder(fs::path workspace, ToolchainConfig config)
    : workspace_(fs::absolute(std::move(workspace))),
      config_(std::move(config)),
      native_(resolve_toolchain(config_, Target::native)),
      wasm_(resolve_toolchain(config_, Target::wasm)) {
  std::error_code ec;
  for (const char* sub : {"src", "bin/native", "bin/wasm", "cache/tmp"}) {
    fs::create_directories(workspace_ / sub, ec);
    if (ec) throw IoError("cannot create workspace " + (workspace_ / sub).string() + ": " + ec.message());
  }
}

std::vector<std::string> Builder::command_for(const TestCase& test, Target target,
                                              const std::string& output) const {
  const Toolchain& tc = toolchain(target);
  std::vector<std::string> cmd = tc.argv_prefix;
  cmd.insert(cmd.end(), config_.cflags.begin(), config_.cflags.end());
  const auto& specific = target == Target::native ? config_.native_cflags : config_.wasm_cflags;
  cmd.insert(cmd.end(), specific.begin(), specific.end());
  if (target == Target::wasm && !config_.wasm_sysroot.empty()) {
    cmd.push_back("--sysroot=" + config_.wasm_sysroot);
  }
  for (const auto& def : config_.defines) cmd.push_back("-D" + def);
  for (const auto& dir : config_.include_dirs) cmd.push_back("-I" + dir);
  if (test.path.has_parent_path()) cmd.push_back("-I" + test.path.parent_path().string());
  cmd.push_back("src/" + test.id + ".c");
  cmd.insert(cmd.end(), config_.extra_sources.begin(), config_.extra_sources.end());
  cmd.push_back("-o");
  cmd.push_back(output);
  cmd.insert(cmd.end(), config_.ldflags.begin(), config_.ldflags.end());
  return cmd;
}

CompileArtifact Builder::compile(const TestCase& test, Target target) {
  const std::string target_name(to_string(target));
  const fs::path source_rel = fs::path("src") / (test.id + ".c");
  const fs::path source_abs = workspace_ / source_rel;
  {
    std::error_code ec;
    bool current = false;
    if (fs::exists(source_abs, ec)) {
      try {
        current = read_text_file(source_abs) == test.source_text;
      } catch (const IoError&) {
      }
    }
    if (!current) write_file_atomic(source_abs, test.source_text);
  }

  const std::string final_rel = "bin/" + target_name + "/" + test.id;
  CompileArtifact artifact;
  artifact.test_id = test.id;
  artifact.target = target;
  artifact.command = command_for(test, target, final_rel);
  artifact.toolchain_fingerprint = toolchain(target).fingerprint;

  // Cache key: source, target, every option, extra-source contents, toolchain identity.
  std::string key_material = sha256_hex(test.source_text);
  key_material += '\n' + target_name + '\n' + join_command(artifact.command) + '\n' +
                  artifact.toolchain_fingerprint + '\n';
  for (const auto& extra : config_.extra_sources) {
    try {
      key_material += extra + '=' + file_hash(extra) + '\n';
    } catch (const IoError&) {
      key_material += extra + "=missing\n";
    }
  }
  const std::string key = sha256_hex(key_material);
  const fs::path record_path = workspace_ / "cache" / (key + ".json");
  const fs::path cached_bin = workspace_ / "cache" / (key + ".bin");
  const fs::path final_abs = workspace_ / final_rel;

  std::error_code ec;
  if (fs::exists(record_path, ec)) {
    try {
      CompileArtifact cached = decode_artifact(read_text_file(record_path));
      if (!cached.ok || (fs::exists(cached_bin) && file_hash(cached_bin) == cached.binary_hash)) {
        if (cached.ok && (!fs::exists(final_abs) || file_hash(final_abs) != cached.binary_hash)) {
          materialize(cached_bin, final_abs);
        }
        ++cache_hits_;
        return cached;
      }
    } catch (const Error&) {
      // Corrupt cache entry: rebuild below.
    }
  }

  // Linkers may embed the output file name (wasm-ld does, in the name
  // section), so the temporary keeps the final base name inside a private directory.
  const std::string tmp_dir_rel = "cache/tmp/" + key + "." + std::to_string(::getpid()) + "." +
                                  std::to_string(g_tmp_counter.fetch_add(1));
  fs::create_directories(workspace_ / tmp_dir_rel, ec);
  const std::string tmp_rel = tmp_dir_rel + "/" + test.id;
  ProcessSpec spec;
  spec.argv = command_for(test, target, tmp_rel);
  spec.cwd = workspace_;
  spec.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(config_.compile_timeout);
  spec.capture_cap = kDiagnosticsCap;
  ++invocations_;
  const ProcessResult result = run_process(spec);
  const fs::path tmp_abs = workspace_ / tmp_rel;

  if (result.kind == ProcessResult::Kind::exited && result.exit_code == 0 && fs::exists(tmp_abs)) {
    if (::link(tmp_abs.c_str(), cached_bin.c_str()) != 0) {
      // Lost the race (or a stale binary exists): the first writer's binary wins.
      if (errno != EEXIST) {
        fs::remove_all(workspace_ / tmp_dir_rel, ec);
        throw IoError("cannot store " + cached_bin.string());
      }
    }
    fs::remove_all(workspace_ / tmp_dir_rel, ec);
    artifact.ok = true;
    artifact.binary_path = final_rel;
    artifact.binary_hash = file_hash(cached_bin);
    materialize(cached_bin, final_abs);
  } else {
    fs::remove_all(workspace_ / tmp_dir_rel, ec);
    artifact.ok = false;
    if (result.kind == ProcessResult::Kind::timed_out) {
      artifact.diagnostics = "compile timed out after " +
                             std::to_string(config_.compile_timeout.count()) + " s";
    } else {
      artifact.diagnostics = to_text(result.err.data) + to_text(result.out.data);
      if (artifact.diagnostics.empty()) {
        artifact.diagnostics = "compiler exited with status " + std::to_string(result.exit_code);
      }
    }
  }

  if (!fs::exists(record_path, ec)) write_file_atomic(record_path, encode_artifact(artifact));
  return artifact;
}

BuildPair Builder::build_pair(const TestCase& test) {
  BuildPair pair;
  pair.native = compile(test, Target::native);
  pair.wasm = compile(test, Target::wasm);
  pair.eligible = pair.native.ok && pair.wasm.ok;
  return pair;
}

std::string encode_artifact(const CompileArtifact& artifact) {
  json j;
  j["test_id"] = artifact.test_id;
  j["target"] = std::string(to_string(artifact.target));
  j["status"] = artifact.ok ? "ok" : "compile_error";
  j["binary_path"] = artifact.binary_path;
  j["binary_hash"] = artifact.binary_hash;
  j["command"] = artifact.command;
  j["toolchain_fingerprint"] = artifact.toolchain_fingerprint;
  j["diagnostics"] = artifact.diagnostics;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

CompileArtifact decode_artifact(std::string_view line) {
  try {
    const json j = json::parse(line);
    CompileArtifact a;
    a.test_id = j.at("test_id").get<std::string>();
    a.target = parse_target(j.at("target").get<std::string>());
    a.ok = j.at("status").get<std::string>() == "ok";
    a.binary_path = j.at("binary_path").get<std::string>();
    a.binary_hash = j.at("binary_hash").get<std::string>();
    a.command = j.at("command").get<std::vector<std::string>>();
    a.toolchain_fingerprint = j.at("toolchain_fingerprint").get<std::string>();
    a.diagnostics = j.value("diagnostics", std::string{});
    return a;
  } catch (const json::exception& e) {
    throw ManifestError(std::string("bad build entry: ") + e.what());
  }
}

}  // namespace wdiv
