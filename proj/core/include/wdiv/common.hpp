#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wdiv {

using Bytes = std::vector<std::uint8_t>;

enum class Target { native, wasm };

std::string_view to_string(Target target);
Target parse_target(std::string_view text);

/// Lowercase hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

/// Incremental SHA-256; used for streams too large to keep in memory.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  Sha256(Sha256&& other) noexcept;
  Sha256& operator=(Sha256&& other) noexcept;

  void update(std::span<const std::uint8_t> data);
  /// Finishes the digest; the object must not be updated afterwards.
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

/// Reads a whole file; throws IoError.
Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames into place; throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Reads a JSON Lines file as raw lines, skipping blank ones.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// Splits a command string on whitespace, honouring single and double quotes.
std::vector<std::string> split_command(std::string_view command);
std::string join_command(const std::vector<std::string>& argv);

/// Resolves an executable name through PATH (or checks an explicit path).
std::optional<std::filesystem::path> find_executable(std::string_view name);

inline Bytes to_bytes(std::string_view text) { return Bytes(text.begin(), text.end()); }
inline std::string to_text(std::span<const std::uint8_t> data) {
  return std::string(data.begin(), data.end());
}

}  // namespace wdiv
