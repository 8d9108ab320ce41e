#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wdiv {

/// Base class for every error the harness raises deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem read/write failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A test file name that does not follow `CWE<digits>_<category>_<variant>.c`.
class MalformedName : public Error {
 public:
  using Error::Error;
};

/// Configured compiler cannot be resolved or does not answer `--version`.
class ToolchainMissing : public Error {
 public:
  using Error::Error;
};

/// Configured Wasm runtime cannot be resolved.
class BackendMissing : public Error {
 public:
  using Error::Error;
};

/// fork/exec of a child process failed.
class SpawnError : public Error {
 public:
  using Error::Error;
};

/// Two behavior profiles for different test cases were compared.
class MismatchedCase : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A manifest line that cannot be decoded.
class ManifestError : public Error {
 public:
  using Error::Error;
};

}  // namespace wdiv
