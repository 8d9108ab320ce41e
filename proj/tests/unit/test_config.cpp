#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "wdiv/config.hpp"
#include "wdiv/errors.hpp"

namespace fs = std::filesystem;
using namespace wdiv;

namespace {

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "wdiv_config" / name;
  fs::create_directories(dir);
  std::ofstream(dir / "wdiv.conf") << text;
  return dir / "wdiv.conf";
}

}  // namespace

TEST(Config, Defaults) {
  const auto c = resolve_config(std::nullopt, {}, {}, "/work");
  EXPECT_EQ(c.out, fs::path("/work/wdiv-out"));
  EXPECT_EQ(c.workspace_dir(), fs::path("/work/wdiv-out/work"));
  EXPECT_EQ(c.limits.n_runs, 10);
  EXPECT_EQ(c.limits.timeout, std::chrono::seconds(100));
  EXPECT_EQ(c.limits.env_mode, EnvMode::fixed);
  EXPECT_EQ(c.toolchain.cflags, std::vector<std::string>{"-O2"});
  EXPECT_EQ(c.sample_k, 3u);
  EXPECT_FALSE(c.classifier.memory_layout);
  EXPECT_EQ(c.formats.size(), 3u);
}

TEST(Config, PrecedenceFileEnvFlags) {
  const auto file = write_config("precedence", "# comment\nruns = 4\ntimeout_secs = 7\nseed = 1\ncorpus = cases\n");
  const std::vector<std::string> env = {"WDIV_TIMEOUT_SECS=8", "WDIV_SEED=2", "HOME=/root", "WDIV_CONFIG=/ignored"};
  const std::vector<Setting> flags = {{"seed", "3", "/cwd"}};
  const auto c = resolve_config(file, env, flags, "/cwd");
  EXPECT_EQ(c.limits.n_runs, 4);
  EXPECT_EQ(c.limits.timeout, std::chrono::seconds(8));
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.corpus, file.parent_path() / "cases");
}

TEST(Config, KeysNormalize) {
  EXPECT_EQ(normalize_key("TIMEOUT_SECS"), "timeout-secs");
  EXPECT_EQ(normalize_key("wasm_runtime"), "wasm-runtime");
  for (const auto& k : config_keys()) EXPECT_EQ(normalize_key(k), k);
}

TEST(Config, RejectsBadInput) {
  RunConfig c;
  EXPECT_THROW(apply_setting(c, {"no-such-key", "1", "/"}), ConfigError);
  EXPECT_THROW(apply_setting(c, {"runs", "0", "/"}), ConfigError);
  EXPECT_THROW(apply_setting(c, {"runs", "ten", "/"}), ConfigError);
  EXPECT_THROW(apply_setting(c, {"env-mode", "sometimes", "/"}), ConfigError);
  EXPECT_THROW(apply_setting(c, {"wasm-runtime", "wasmtime run", "/"}), ConfigError);
  EXPECT_THROW(apply_setting(c, {"rules-off", "R99", "/"}), ConfigError);
  EXPECT_THROW(apply_setting(c, {"format", "pdf", "/"}), ConfigError);
  EXPECT_THROW(parse_config_text("just words\n", "/"), ConfigError);
}

TEST(Config, ClassifierToggles) {
  RunConfig c;
  apply_setting(c, {"rules-off", "R11, r3", "/"});
  EXPECT_EQ(c.classifier.disabled, (std::set<RuleId>{RuleId::R3, RuleId::R11}));
  apply_setting(c, {"memory-layout", "true", "/"});
  EXPECT_TRUE(c.classifier.memory_layout);
  EXPECT_FALSE(c.classifier.enabled(RuleId::R11));
  apply_setting(c, {"rule-order", "R10,R3", "/"});
  EXPECT_EQ(c.classifier.order.front(), RuleId::R10);
}

TEST(Config, Validate) {
  RunConfig c;
  EXPECT_NO_THROW(validate(c, false));
  EXPECT_THROW(validate(c, true), ConfigError);
  c.corpus = "/nonexistent/corpus";
  EXPECT_THROW(validate(c, true), ConfigError);
  c.corpus = fs::temp_directory_path();
  EXPECT_NO_THROW(validate(c, true));
  c.toolchain.extra_sources = {"/nonexistent/io.c"};
  EXPECT_THROW(validate(c, true), ConfigError);
}

TEST(Config, DumpRoundTrips) {
  const auto file = write_config("dump",
                                 "corpus = /data/juliet\nruns = 3\nenv-mode = inherit\n"
                                 "cflags = -O2 -g\ndefines = INCLUDEMAIN OMITGOOD\nrules-off = R11\n"
                                 "cwe = 121,761\nformat = csv\nwasm-runtime = wasmtime run {env} {module}\n");
  const auto c = resolve_config(file, {}, {}, "/cwd");
  const std::string dumped = dump_config(c);
  RunConfig back;
  for (const auto& s : parse_config_text(dumped, "/")) apply_setting(back, s);
  EXPECT_EQ(dump_config(back), dumped);
  EXPECT_EQ(back.toolchain.defines, (std::vector<std::string>{"INCLUDEMAIN", "OMITGOOD"}));
  EXPECT_EQ(back.filter.cwes, (std::vector<int>{121, 761}));
  EXPECT_EQ(back.limits.env_mode, EnvMode::inherit);
}
