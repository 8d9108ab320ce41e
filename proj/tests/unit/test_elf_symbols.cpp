#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "generators.hpp"
#include "wdiv/elf_symbols.hpp"
#include "wdiv/process.hpp"

namespace fs = std::filesystem;
using namespace wdiv;

namespace {

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

fs::path compile_canary_binary() {
  const fs::path dir = fs::temp_directory_path() / ("wdiv_elf_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::ofstream(dir / "ssp.c") << "#include <string.h>\n#include <stdio.h>\n"
                                  "int main(int argc, char **argv){char buf[64];"
                                  "strcpy(buf, argc > 1 ? argv[1] : \"x\");puts(buf);return 0;}\n";
  ProcessSpec spec;
  spec.argv = {"clang", "-O2", "-fstack-protector-strong", (dir / "ssp.c").string(), "-o", (dir / "ssp").string()};
  const auto r = run_process(spec);
  EXPECT_EQ(r.exit_code, 0) << to_text(r.err.data);
  return dir / "ssp";
}

}  // namespace

TEST(ElfSymbols, CanaryBinaryImportsStackChkFail) {
  const auto bin = compile_canary_binary();
  const auto names = extract_undefined_symbols(bin);
  ASSERT_TRUE(names);
  EXPECT_TRUE(contains(*names, "__stack_chk_fail"));
  EXPECT_TRUE(contains(*names, "puts"));
  EXPECT_FALSE(contains(*names, "main"));
  EXPECT_TRUE(std::is_sorted(names->begin(), names->end()));
}

TEST(ElfSymbols, ExternalToolAgrees) {
  const auto bin = compile_canary_binary();
  const auto names = extract_undefined_symbols(bin, SymbolExtractor{"nm -D --undefined-only"});
  if (!names) GTEST_SKIP() << "nm unavailable";
  EXPECT_TRUE(contains(*names, "__stack_chk_fail"));
}

TEST(ElfSymbols, NonElfInputs) {
  EXPECT_FALSE(elf_undefined_symbols(to_bytes("#!/bin/sh\necho hi\n")));
  EXPECT_FALSE(elf_undefined_symbols(Bytes{}));
  EXPECT_FALSE(extract_undefined_symbols("/nonexistent/binary"));
  EXPECT_FALSE(extract_undefined_symbols("/bin/sh", SymbolExtractor{"/nonexistent/nm"}));
}

TEST(ElfSymbols, MutatedImagesNeverCrash) {
  const Bytes image = read_file(compile_canary_binary());
  testgen::Rng rng(31337);
  for (int i = 0; i < 3000; ++i) {
    Bytes b = image;
    for (std::size_t n = 1 + testgen::pick(rng, 16); n > 0; --n) {
      const std::size_t at = testgen::coin(rng) ? testgen::pick(rng, 128) : testgen::pick(rng, b.size());
      b[at] = static_cast<std::uint8_t>(rng());
    }
    if (testgen::coin(rng, 4)) b.resize(testgen::pick(rng, b.size()));
    (void)elf_undefined_symbols(b);
  }
}
