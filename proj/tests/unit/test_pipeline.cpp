#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "wdiv/errors.hpp"
#include "wdiv/pipeline.hpp"
#include "wdiv/process.hpp"

namespace fs = std::filesystem;
using namespace wdiv;
using namespace std::chrono_literals;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wdiv_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ProcessResult cli(std::vector<std::string> args, const fs::path& cwd = fs::temp_directory_path()) {
  ProcessSpec spec;
  spec.argv = {WDIV_CLI};
  spec.argv.insert(spec.argv.end(), args.begin(), args.end());
  spec.cwd = cwd;
  spec.timeout = 120s;
  return run_process(spec);
}

RunConfig micro_config(const fs::path& out) {
  RunConfig c = resolve_config(fs::path(WDIV_MICRO_CONF), {}, {}, fs::current_path());
  c.out = out;
  return c;
}

BehaviorProfile profile(const std::string& id, Target t, const std::string& out) {
  BehaviorProfile p;
  p.test_id = id;
  p.target = t;
  p.runs = {ExecutionOutcome{Termination::exited(0), testgen::capture(out), {}, 1ms}};
  return p;
}

}  // namespace

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (unsigned jobs : {1u, 3u, 16u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, RethrowsFirstError) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 37) throw IoError("boom");
                            }),
               IoError);
}

TEST(RunPipeline, EmptyCorpusExitsCleanWithEmptyReports) {
  const fs::path dir = fresh_dir("empty");
  fs::create_directories(dir / "corpus");
  RunConfig c = micro_config(dir / "out");
  c.corpus = dir / "corpus";
  std::ostringstream log;
  ASSERT_EQ(run_pipeline(c, log), kExitClean) << log.str();
  for (const char* f : {"ingest.jsonl", "build.jsonl", "probe_native.jsonl", "probe_wasm.jsonl", "divergences.jsonl",
                        "report.md", "report.csv", "summaries.jsonl", "funnel.json", "effective_config.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  EXPECT_TRUE(read_lines(dir / "out" / "divergences.jsonl").empty());
}

TEST(RunPipeline, BadRuntimeExitsBeforeRunning) {
  const fs::path dir = fresh_dir("badruntime");
  RunConfig c = micro_config(dir / "out");
  c.runtime.command_template = "/nonexistent/wasm-runtime {module}";
  std::ostringstream log;
  EXPECT_EQ(run_pipeline(c, log), kExitConfig);
  EXPECT_NE(log.str().find("/nonexistent/wasm-runtime"), std::string::npos) << log.str();
  EXPECT_FALSE(fs::exists(dir / "out" / "build.jsonl"));
}

TEST(RunPipeline, MissingCorpusIsConfigError) {
  const fs::path dir = fresh_dir("nocorpus");
  RunConfig c = micro_config(dir / "out");
  c.corpus = dir / "missing";
  std::ostringstream log;
  EXPECT_EQ(run_pipeline(c, log), kExitConfig);
}

TEST(Cli, ScanEmptyModule) {
  const fs::path dir = fresh_dir("scan");
  {
    std::ofstream f(dir / "empty.wasm", std::ios::binary);
    f.write("\0asm\1\0\0\0", 8);
  }
  auto r = cli({"scan", (dir / "empty.wasm").string()});
  EXPECT_EQ(r.exit_code, 0) << to_text(r.err.data);
  EXPECT_FALSE(r.out.data.empty());
  r = cli({"scan", "--json", (dir / "empty.wasm").string()});
  EXPECT_NE(to_text(r.out.data).find("\"frames\":[]"), std::string::npos) << to_text(r.out.data);
  {
    std::ofstream f(dir / "bad.wasm", std::ios::binary);
    f.write("\0asn\1\0\0\0", 8);
  }
  r = cli({"scan", (dir / "bad.wasm").string()});
  EXPECT_EQ(r.exit_code, kExitConfig);
  EXPECT_NE(to_text(r.err.data).find("bad_magic"), std::string::npos) << to_text(r.err.data);
}

TEST(Cli, DiffOverTwoProbeManifests) {
  const fs::path dir = fresh_dir("diff");
  write_lines(dir / "n.jsonl", {encode_profile(profile("same", Target::native, "x")),
                                encode_profile(profile("differs", Target::native, "a"))});
  write_lines(dir / "w.jsonl", {encode_profile(profile("same", Target::wasm, "x")),
                                encode_profile(profile("differs", Target::wasm, "b"))});
  const auto r = cli({"diff", (dir / "n.jsonl").string(), (dir / "w.jsonl").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.exit_code, kExitDivergent) << to_text(r.err.data);
  const auto lines = read_lines(dir / "out" / "divergences.jsonl");
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(decode_divergence(lines[0]).test_id, "differs");
}

TEST(Cli, ClassifyRulesOffR11) {
  const fs::path dir = fresh_dir("classify");
  const auto rec = compare(profile("t", Target::native, "a\n"), profile("t", Target::wasm, "b\n"));
  ASSERT_TRUE(rec);
  write_lines(dir / "divergences.jsonl", {encode_divergence(*rec)});
  auto label_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"classify", "--out", dir.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = cli(args);
    EXPECT_EQ(r.exit_code, kExitDivergent) << to_text(r.err.data);
    const auto labeled = load_labeled(dir / "divergences.jsonl");
    EXPECT_EQ(labeled.size(), 1u);
    return labeled.at(0).label.value().subcause;
  };
  EXPECT_EQ(label_of({"--memory-layout"}), Subcause::memory_layout);
  EXPECT_EQ(label_of({"--memory-layout", "--rules-off", "R11"}), Subcause::none);
  EXPECT_EQ(label_of({}), Subcause::none);
}

TEST(Cli, UnknownKeyIsConfigError) {
  const auto r = cli({"--set", "bogus=1", "ingest"});
  EXPECT_EQ(r.exit_code, kExitConfig);
  EXPECT_EQ(cli({"--no-such-flag"}).exit_code, kExitConfig);
}

TEST(Cli, IngestWritesManifest) {
  const fs::path dir = fresh_dir("ingest");
  fs::create_directories(dir / "c");
  std::ofstream(dir / "c" / "CWE1_A_01.c") << "int main(void){return rand();}\n";
  const auto r = cli({"ingest", "--corpus", (dir / "c").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.exit_code, 0) << to_text(r.err.data);
  const auto lines = read_lines(dir / "out" / "ingest.jsonl");
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(decode_ingest_entry(lines[0]).cwe_id, 1);
  EXPECT_TRUE(fs::exists(dir / "out" / "effective_config.txt"));
}
