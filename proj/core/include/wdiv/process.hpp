#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wdiv/common.hpp"

namespace wdiv {

/// One captured output stream: a bounded prefix plus a digest of everything.
struct StreamCapture {
  Bytes data;
  std::string digest;
  std::uint64_t size = 0;

  bool truncated() const { return size > data.size(); }
};

struct ProcessSpec {
  /// argv[0] is resolved through PATH when it has no slash.
  std::vector<std::string> argv;
  std::filesystem::path cwd;
  /// nullopt inherits the harness environment.
  std::optional<std::vector<std::string>> env;
  std::chrono::milliseconds timeout{std::chrono::seconds(100)};
  std::size_t capture_cap = 1 << 20;
  std::optional<std::uint64_t> address_space_limit;
  std::optional<std::uint64_t> file_size_limit;
};

struct ProcessResult {
  enum class Kind { exited, signaled, timed_out };
  Kind kind = Kind::exited;
  int exit_code = 0;
  int signal = 0;
  StreamCapture out;
  StreamCapture err;
  std::chrono::milliseconds wall_time{0};
};

/// Runs a child in its own session and process group, stdin from /dev/null.
///
/// On deadline the whole process group is killed and the result is
/// timed_out; output captured until then is kept. Core dumps are disabled.
/// Throws SpawnError when the program cannot be started.
ProcessResult run_process(const ProcessSpec& spec);

}  // namespace wdiv
