#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "wdiv/common.hpp"
#include "wdiv/errors.hpp"

namespace fs = std::filesystem;
using namespace wdiv;

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Sha256, IncrementalMatchesOneShot) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Bytes data(rng() % 5000);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    Sha256 h;
    std::size_t at = 0;
    while (at < data.size()) {
      const std::size_t n = std::min<std::size_t>(data.size() - at, 1 + rng() % 700);
      h.update(std::span(data).subspan(at, n));
      at += n;
    }
    EXPECT_EQ(h.hex_digest(), sha256_hex(data));
  }
}

TEST(Base64, Rfc4648Vectors) {
  const std::pair<const char*, const char*> vectors[] = {
      {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},         {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
  };
  for (const auto& [plain, encoded] : vectors) {
    EXPECT_EQ(base64_encode(to_bytes(plain)), encoded);
    EXPECT_EQ(to_text(base64_decode(encoded)), plain);
  }
}

TEST(Base64, RoundTripsRandomBytes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    Bytes data(rng() % 300);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(base64_decode(base64_encode(data)), data);
  }
}

TEST(SplitCommand, HonoursQuotes) {
  EXPECT_EQ(split_command("python3 -m ziglang cc"), (std::vector<std::string>{"python3", "-m", "ziglang", "cc"}));
  EXPECT_EQ(split_command("a 'b c' \"d e\"  f"), (std::vector<std::string>{"a", "b c", "d e", "f"}));
  EXPECT_TRUE(split_command("   ").empty());
}

TEST(Files, AtomicWriteAndLines) {
  const fs::path dir = fs::temp_directory_path() / "wdiv_test_common";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_lines(dir / "x.jsonl", {"{\"a\":1}", "{\"b\":2}"});
  EXPECT_EQ(read_lines(dir / "x.jsonl"), (std::vector<std::string>{"{\"a\":1}", "{\"b\":2}"}));
  write_file_atomic(dir / "y.txt", "hello");
  EXPECT_EQ(read_text_file(dir / "y.txt"), "hello");
  EXPECT_THROW(read_file(dir / "missing"), IoError);
  fs::remove_all(dir);
}

TEST(FindExecutable, ResolvesThroughPath) {
  EXPECT_TRUE(find_executable("sh").has_value());
  EXPECT_FALSE(find_executable("definitely-not-a-real-tool-xyz").has_value());
}

TEST(Target, RoundTrip) {
  EXPECT_EQ(parse_target(to_string(Target::native)), Target::native);
  EXPECT_EQ(parse_target(to_string(Target::wasm)), Target::wasm);
}
