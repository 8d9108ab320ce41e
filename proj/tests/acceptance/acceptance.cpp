// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "generators.hpp"
#include "oracle_module.hpp"
#include "report_checks.hpp"
#include "wdiv/pipeline.hpp"
#include "wdiv/process.hpp"
#include "wdiv/wasmscan.hpp"

namespace fs = std::filesystem;
using namespace wdiv;
using namespace std::chrono_literals;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

const fs::path kRoot = fs::temp_directory_path() / "wdiv_acceptance";

ProcessResult cli(const std::vector<std::string>& args) {
  ProcessSpec spec;
  spec.argv = {WDIV_CLI};
  spec.argv.insert(spec.argv.end(), args.begin(), args.end());
  spec.timeout = 600s;
  spec.capture_cap = 1 << 16;
  return run_process(spec);
}

std::string jobs() { return std::to_string(std::max(2u, std::thread::hardware_concurrency())); }

std::vector<std::string> config_args(const fs::path& out) {
  return {"--config", WDIV_MICRO_CONF, "--out", out.string(), "--jobs", jobs()};
}

// Pipeline run shared by criteria 1, 5 and 7.
struct MicroRun {
  int status = -1;
  std::chrono::milliseconds elapsed{0};
  std::string stderr_text;
};

MicroRun run_micro_pipeline(const fs::path& out) {
  fs::remove_all(out);
  auto args = config_args(out);
  args.insert(args.begin(), "pipeline");
  const auto start = std::chrono::steady_clock::now();
  const auto r = cli(args);
  MicroRun run;
  run.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  run.status = r.kind == ProcessResult::Kind::exited ? r.exit_code : -1;
  run.stderr_text = to_text(r.err.data);
  return run;
}

// `<file name> <subcause>[|<subcause>...]` per line.
std::map<std::string, std::set<std::string>> golden_labels() {
  std::map<std::string, std::set<std::string>> out;
  std::istringstream in(read_text_file(fs::path(WDIV_GOLDEN_DIR) / "micro_labels.txt"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string file;
    std::string labels;
    fields >> file >> labels;
    std::stringstream alts(labels);
    for (std::string l; std::getline(alts, l, '|');) out[file].insert(l);
  }
  return out;
}

Outcome criterion1(const fs::path& out, const MicroRun& run) {
  Outcome o;
  if (run.status != kExitDivergent) {
    o.fail("pipeline exit " + std::to_string(run.status) + ": " + run.stderr_text.substr(0, 400));
    return o;
  }
  if (run.elapsed > 5min) o.fail("took " + std::to_string(run.elapsed.count()) + " ms");
  const auto expected = golden_labels();
  if (expected.size() < 10) o.fail("golden file lists fewer than 10 programs");

  RunConfig config;
  config.out = out;
  std::map<std::string, std::string> file_of;
  for (const auto& c : load_ingest(config, false)) file_of[c.id] = c.path.filename().string();
  std::map<std::string, std::string> got;
  for (const auto& l : load_labeled(out / manifest::kDivergences)) {
    if (!l.record.divergent() || !l.label) continue;
    got[file_of[l.record.test_id]] = std::string(to_string(l.label->subcause));
  }
  std::size_t matched = 0;
  for (const auto& [file, allowed] : expected) {
    const auto it = got.find(file);
    if (it == got.end()) {
      o.fail(file + " not divergent");
    } else if (!allowed.count(it->second)) {
      o.fail(file + " labeled " + it->second);
    } else {
      ++matched;
    }
  }
  const std::string md = read_text_file(out / "report.md");
  const auto breakdown = testcheck::markdown_section(md, "Root causes");
  std::vector<std::string> golden_breakdown;
  {
    std::istringstream in(read_text_file(fs::path(WDIV_GOLDEN_DIR) / "micro_breakdown.md"));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) golden_breakdown.push_back(line);
    }
  }
  if (breakdown != golden_breakdown) o.fail("root-cause breakdown differs from golden");
  if (o.pass) {
    o.detail = std::to_string(matched) + "/" + std::to_string(expected.size()) + " programs divergent with expected label in " +
               std::to_string(run.elapsed.count() / 1000.0).substr(0, 4) + " s; breakdown matches golden";
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  testgen::Rng rng(2);
  const int streams = 1000;
  for (int i = 0; i < streams && o.pass; ++i) {
    const auto a = aggregate(testgen::case_stream(rng));
    const auto summaries = a.summaries();
    if (auto p = testcheck::invariant_problem(summaries, a.funnel()); !p.empty()) o.fail(p);
    if (auto p = testcheck::report_shape_problem(render_markdown(summaries, a.funnel())); !p.empty()) o.fail(p);
    if (parse_csv(render_csv(summaries)) != summaries) o.fail("csv parse-back lost counts");
  }
  if (o.pass) o.detail = std::to_string(streams) + " synthetic streams: 4 funnel stages, 3 roots, 11 subcauses + unclassified, invariants hold";
  return o;
}

Outcome criterion3() {
  Outcome o;
  testgen::Rng rng(3);
  const int n = 1000;
  int excluded = 0;
  for (int i = 0; i < n && o.pass; ++i) {
    const auto p = testgen::profile(rng, "c", Target::native);
    if (const auto r = compare(p, p); r && r->facets.any()) o.fail("compare(p, p) produced facets");
    const auto q = testgen::profile(rng, "c", Target::wasm);
    const auto r = compare(p, q);
    if (p.verdict != Verdict::deterministic || q.verdict != Verdict::deterministic) {
      ++excluded;
      if (!r || !r->excluded_reason || r->divergent()) o.fail("non-deterministic or non-terminating side not excluded");
    }
  }
  if (o.pass) o.detail = std::to_string(n) + " profiles reflexive; " + std::to_string(excluded) + " exclusion-dominance cases held";
  return o;
}

Outcome criterion4() {
  Outcome o;
  auto artifact = [](const std::string& name) {
    CompileArtifact a;
    a.test_id = name;
    a.binary_path = (fs::path(WDIV_FIXTURE_DIR) / name).string();
    a.ok = true;
    return a;
  };
  WasmRuntimeConfig runtime;
  runtime.command_template = WDIV_WASM_RUNTIME;
  ExecutionLimits limits;
  limits.n_runs = 10;
  limits.timeout = 10s;
  const Executor ex(kRoot, runtime, limits);
  int flagged = 0;
  int deterministic = 0;
  for (int trial = 0; trial < 100; ++trial) {
    if (ex.probe(artifact("stack_address")).verdict == Verdict::non_deterministic) ++flagged;
    if (ex.probe(artifact("constant_output")).verdict == Verdict::deterministic) ++deterministic;
  }
  limits.timeout = 1s;
  const Executor short_ex(kRoot, runtime, limits);
  const Verdict sleeper = short_ex.probe(artifact("sleeper")).verdict;
  if (flagged < 95) o.fail("stack-address fixture flagged in only " + std::to_string(flagged) + "/100 trials");
  if (deterministic != 100) o.fail("constant fixture deterministic in " + std::to_string(deterministic) + "/100 trials");
  if (sleeper != Verdict::non_terminating) o.fail("sleeper judged " + std::string(to_string(sleeper)));
  o.detail = "stack address non-deterministic " + std::to_string(flagged) + "/100, constant deterministic " +
             std::to_string(deterministic) + "/100, sleeper " + std::string(to_string(sleeper));
  return o;
}

bool sections_ok(const wasm::WasmModuleSummary& s, std::size_t size) {
  std::uint64_t end = 8;
  for (const auto& sec : s.sections) {
    if (sec.offset < end || sec.length == 0) return false;
    end = sec.offset + sec.length;
  }
  return end <= size;
}

Outcome criterion5(const fs::path& out) {
  Outcome o;
  const Bytes empty = {0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00};
  try {
    if (!wasm::parse_module(empty).sections.empty()) o.fail("empty module has sections");
  } catch (const std::exception& e) {
    o.fail(std::string("empty module: ") + e.what());
  }

  const auto oracle = wasm::parse_module(testdata::kOracle);
  if (oracle.functions.size() != 4 || !oracle.functions[0].sp_prologue ||
      oracle.functions[0].sp_prologue->frame_size != 64 || !sections_ok(oracle, testdata::kOracle.size())) {
    o.fail("reference module misread");
  }

  std::size_t modules = 0;
  bool frame64 = false;
  const fs::path bins = out / "work" / "bin" / "wasm";
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(bins, ec)) {
    const Bytes bytes = read_file(entry.path());
    try {
      const auto s = wasm::parse_module(bytes);
      if (!sections_ok(s, bytes.size())) o.fail("section invariants broken in " + entry.path().filename().string());
      for (const auto& f : s.functions) frame64 = frame64 || (f.sp_prologue && f.sp_prologue->frame_size == 64);
      ++modules;
    } catch (const std::exception& e) {
      o.fail(entry.path().filename().string() + ": " + e.what());
    }
  }
  if (modules < 10) o.fail("only " + std::to_string(modules) + " micro-corpus modules found");
  if (!frame64) o.fail("no 64-byte frame in the micro-corpus modules");

  testgen::Rng rng(5);
  std::size_t errors = 0;
  for (int i = 0; i < 10000; ++i) {
    const Bytes b = testgen::wasm_fuzz_input(rng, testdata::kOracle);
    try {
      const auto s = wasm::parse_module(b);
      if (!sections_ok(s, b.size())) o.fail("fuzzed parse broke section invariants");
    } catch (const wasm::ParseError& e) {
      if (e.offset() > b.size()) o.fail("error offset past input");
      ++errors;
    } catch (const std::exception& e) {
      o.fail(std::string("unexpected exception on fuzz input: ") + e.what());
    }
  }
  if (o.pass) {
    o.detail = "empty module and " + std::to_string(modules) + " micro modules parsed, 64-byte frame found, 10000 fuzz inputs (" +
               std::to_string(errors) + " positioned errors, no crash)";
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  testgen::Rng rng(6);
  auto count = [](const std::string& s, const std::string& w) {
    std::size_t n = 0;
    for (auto at = s.find(w); at != std::string::npos; at = s.find(w, at + 1)) ++n;
    return n;
  };
  std::size_t replaced = 0;
  for (int i = 0; i < 10000 && o.pass; ++i) {
    const std::string src = testgen::c_like_source(rng);
    const auto r = preprocess_source_detailed(src);
    replaced += r.replaced;
    if (preprocess_source(r.text) != r.text) o.fail("not idempotent on: " + src);
    if (r.replaced == 0 && r.text != src) o.fail("changed input without rand() call: " + src);
    if (count(r.text, "srand") != count(src, "srand") || count(r.text, "grand") != count(src, "grand")) {
      o.fail("altered srand/grand in: " + src);
    }
  }
  if (o.pass) o.detail = "10000 generated inputs, " + std::to_string(replaced) + " replacements, idempotent, srand/grand intact";
  return o;
}

std::string normalized(const fs::path& file) {
  static const std::regex wall(R"("wall_time_ms":[0-9]+)");
  return std::regex_replace(read_text_file(file), wall, "\"wall_time_ms\":0");
}

Outcome criterion7(const fs::path& piped, const MicroRun& run) {
  Outcome o;
  if (run.status != kExitDivergent) {
    o.fail("pipeline run failed");
    return o;
  }
  const fs::path chained = kRoot / "chained";
  fs::remove_all(chained);
  const std::vector<std::pair<std::string, int>> steps = {
      {"ingest", kExitClean}, {"build", kExitClean},  {"run", kExitClean},
      {"diff", kExitDivergent}, {"classify", kExitDivergent}, {"report", kExitDivergent}};
  for (const auto& [step, expected] : steps) {
    auto args = config_args(chained);
    args.insert(args.begin(), step);
    const auto r = cli(args);
    if (r.exit_code != expected) {
      o.fail(step + " exited " + std::to_string(r.exit_code) + ": " + to_text(r.err.data).substr(0, 300));
      return o;
    }
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(piped)) {
    if (!entry.is_regular_file() || entry.path().filename() == manifest::kEffectiveConfig) continue;
    const fs::path other = chained / entry.path().filename();
    if (!fs::exists(other)) {
      o.fail(entry.path().filename().string() + " missing from chained run");
    } else if (normalized(entry.path()) != normalized(other)) {
      o.fail(entry.path().filename().string() + " differs");
    }
    ++compared;
  }
  if (o.pass) o.detail = std::to_string(compared) + " output files byte-identical apart from wall_time_ms";
  return o;
}

}  // namespace

int main() {
  fs::create_directories(kRoot);
  const fs::path piped = kRoot / "pipeline";
  const MicroRun run = run_micro_pipeline(piped);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"golden micro-corpus classification", [&] { return criterion1(piped, run); }},
      {"report shape and invariants on synthetic streams", criterion2},
      {"diff reflexivity and exclusion dominance", criterion3},
      {"determinism probe", criterion4},
      {"wasm scanner", [&] { return criterion5(piped); }},
      {"rand() preprocessing", criterion6},
      {"pipeline equals chained subcommands", [&] { return criterion7(piped, run); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
