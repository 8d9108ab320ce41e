#include <gtest/gtest.h>

#include <filesystem>

#include "wdiv/build.hpp"
#include "wdiv/errors.hpp"
#include "wdiv/exec.hpp"

namespace fs = std::filesystem;
using namespace wdiv;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wdiv_build_" + name);
  fs::remove_all(dir);
  return dir;
}

ToolchainConfig toolchain() {
  ToolchainConfig c;
  c.native_cc = "clang";
  c.wasm_cc = WDIV_WASM_CC;
  c.wasm_cflags = {"-g0"};
  return c;
}

bool wasm_available() {
  try {
    resolve_toolchain(toolchain(), Target::wasm);
    return true;
  } catch (const ToolchainMissing&) {
    return false;
  }
}

TestCase source_case(const std::string& text, const std::string& name = "CWE1_Case_01.c") {
  return make_test_case(name, text);
}

}  // namespace

TEST(Toolchain, MissingCompilerThrows) {
  ToolchainConfig c;
  c.native_cc = "/nonexistent/cc";
  EXPECT_THROW(resolve_toolchain(c, Target::native), ToolchainMissing);
  EXPECT_THROW(Builder(fresh_dir("missing"), c), ToolchainMissing);
  c.native_cc = "";
  EXPECT_THROW(resolve_toolchain(c, Target::native), ToolchainMissing);
}

TEST(Toolchain, FingerprintNamesCompiler) {
  const auto t = resolve_toolchain(toolchain(), Target::native);
  EXPECT_NE(t.fingerprint.find("clang"), std::string::npos);
}

TEST(Builder, MinimalProgramBothTargets) {
  if (!wasm_available()) GTEST_SKIP() << "no wasm toolchain";
  Builder builder(fresh_dir("minimal"), toolchain());
  const auto pair = builder.build_pair(source_case("int main(){return 0;}\n"));
  EXPECT_TRUE(pair.eligible);
  for (const auto* a : {&pair.native, &pair.wasm}) {
    EXPECT_TRUE(a->ok) << a->diagnostics;
    const fs::path bin = builder.workspace() / a->binary_path;
    ASSERT_TRUE(fs::exists(bin));
    EXPECT_EQ(sha256_hex(read_file(bin)), a->binary_hash);
    EXPECT_FALSE(a->command.empty());
  }
  EXPECT_EQ(pair.native.binary_path, "bin/native/" + pair.native.test_id);
  EXPECT_EQ(pair.wasm.binary_path, "bin/wasm/" + pair.wasm.test_id);
}

TEST(Builder, WasmOnlyFailureIsIneligible) {
  if (!wasm_available()) GTEST_SKIP() << "no wasm toolchain";
  Builder builder(fresh_dir("sockets"), toolchain());
  const auto pair = builder.build_pair(source_case(
      "#include <sys/socket.h>\n#include <netinet/in.h>\nint main(void){return socket(AF_INET,SOCK_STREAM,0) < 0;}\n"));
  EXPECT_TRUE(pair.native.ok) << pair.native.diagnostics;
  EXPECT_FALSE(pair.wasm.ok);
  EXPECT_FALSE(pair.eligible);
  EXPECT_FALSE(pair.wasm.diagnostics.empty());
}

TEST(Builder, CompileErrorIsAnArtifact) {
  Builder builder(fresh_dir("error"), [] {
    auto c = toolchain();
    c.wasm_cc = "clang";
    return c;
  }());
  const auto a = builder.compile(source_case("int main( {\n"), Target::native);
  EXPECT_FALSE(a.ok);
  EXPECT_NE(a.diagnostics.find("error"), std::string::npos);
}

TEST(Builder, CacheHitIsHashEqualWithoutRecompiling) {
  const fs::path ws = fresh_dir("cache");
  auto c = toolchain();
  c.wasm_cc = "clang";
  const auto test = source_case("#include <stdio.h>\nint main(void){puts(\"hi\");return 0;}\n");
  CompileArtifact cold;
  {
    Builder builder(ws, c);
    cold = builder.compile(test, Target::native);
    ASSERT_TRUE(cold.ok) << cold.diagnostics;
    EXPECT_EQ(builder.compiler_invocations(), 1u);
  }
  fs::remove(ws / cold.binary_path);
  Builder builder(ws, c);
  const auto warm = builder.compile(test, Target::native);
  EXPECT_EQ(builder.compiler_invocations(), 0u);
  EXPECT_EQ(builder.cache_hits(), 1u);
  EXPECT_EQ(warm, cold);
  EXPECT_EQ(sha256_hex(read_file(ws / warm.binary_path)), cold.binary_hash);

  c.cflags = {"-O0"};
  Builder other_flags(ws, c);
  other_flags.compile(test, Target::native);
  EXPECT_EQ(other_flags.compiler_invocations(), 1u);
}

TEST(Builder, CommandIsReplayable) {
  const fs::path ws = fresh_dir("replay");
  auto c = toolchain();
  c.wasm_cc = "clang";
  Builder builder(ws, c);
  const auto a = builder.compile(source_case("int main(void){return 3;}\n"), Target::native);
  ASSERT_TRUE(a.ok);
  ProcessSpec spec;
  spec.argv = a.command;
  spec.cwd = ws;
  const auto r = run_process(spec);
  EXPECT_EQ(r.exit_code, 0) << to_text(r.err.data);
}

TEST(BuildManifest, RoundTrip) {
  CompileArtifact a;
  a.test_id = "abc";
  a.target = Target::wasm;
  a.binary_path = "bin/wasm/abc";
  a.binary_hash = "00ff";
  a.command = {"cc", "-O2", "a b.c"};
  a.ok = false;
  a.diagnostics = "error: x\n";
  a.toolchain_fingerprint = "clang 14";
  EXPECT_EQ(decode_artifact(encode_artifact(a)), a);
}
