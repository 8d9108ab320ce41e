#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wdiv/corpus.hpp"
#include "wdiv/diff.hpp"
#include "wdiv/report.hpp"
#include "wdiv/wasmscan.hpp"

namespace {

void leb(std::vector<std::uint8_t>& out, std::uint64_t v) {
  do {
    std::uint8_t b = v & 0x7F;
    v >>= 7;
    if (v) b |= 0x80;
    out.push_back(b);
  } while (v);
}

void sleb(std::vector<std::uint8_t>& out, std::int64_t v) {
  for (;;) {
    std::uint8_t b = v & 0x7F;
    v >>= 7;
    const bool done = (v == 0 && !(b & 0x40)) || (v == -1 && (b & 0x40));
    out.push_back(done ? b : (b | 0x80));
    if (done) return;
  }
}

// A module with `functions` bodies, each carrying a 64-byte frame prologue and epilogue.
std::vector<std::uint8_t> synthetic_module(std::uint32_t functions) {
  std::vector<std::uint8_t> m = {0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00};
  auto section = [&](std::uint8_t id, const std::vector<std::uint8_t>& body) {
    m.push_back(id);
    leb(m, body.size());
    m.insert(m.end(), body.begin(), body.end());
  };
  section(1, {0x01, 0x60, 0x00, 0x00});
  std::vector<std::uint8_t> funcs;
  leb(funcs, functions);
  for (std::uint32_t i = 0; i < functions; ++i) funcs.push_back(0x00);
  section(3, funcs);
  section(6, {0x01, 0x7F, 0x01, 0x41, 0x80, 0x80, 0x04, 0x0B});
  std::vector<std::uint8_t> code;
  leb(code, functions);
  for (std::uint32_t i = 0; i < functions; ++i) {
    std::vector<std::uint8_t> body = {0x01, 0x01, 0x7F, 0x23, 0x00, 0x41};
    sleb(body, 64);
    body.insert(body.end(), {0x6B, 0x22, 0x00, 0x24, 0x00});
    for (int k = 0; k < 40; ++k) {
      body.insert(body.end(), {0x20, 0x00, 0x41});
      sleb(body, k);
      body.insert(body.end(), {0x3A, 0x00, 0x00});
    }
    body.insert(body.end(), {0x20, 0x00, 0x41});
    sleb(body, 64);
    body.insert(body.end(), {0x6A, 0x24, 0x00, 0x0B});
    leb(code, body.size());
    code.insert(code.end(), body.begin(), body.end());
  }
  section(10, code);
  return m;
}

void BM_ParseModule(benchmark::State& state) {
  const auto module = synthetic_module(static_cast<std::uint32_t>(state.range(0)));
  for (auto _ : state) {
    auto summary = wdiv::wasm::parse_module(module);
    benchmark::DoNotOptimize(summary);
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * module.size()));
}
BENCHMARK(BM_ParseModule)->Arg(16)->Arg(1024);

void BM_Preprocess(benchmark::State& state) {
  std::string source;
  for (int i = 0; i < 2000; ++i) {
    source += "int f" + std::to_string(i) + "(void) { /* rand() */ return rand() + grand(3) + \"rand()\"[0]; }\n";
  }
  for (auto _ : state) {
    auto result = wdiv::preprocess_source(source);
    benchmark::DoNotOptimize(result);
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * source.size()));
}
BENCHMARK(BM_Preprocess);

wdiv::BehaviorProfile profile(wdiv::Target target, const std::string& out) {
  wdiv::BehaviorProfile p;
  p.test_id = "0123456789abcdef";
  p.target = target;
  wdiv::ExecutionOutcome o;
  o.stdout_stream.data = wdiv::to_bytes(out);
  o.stdout_stream.size = out.size();
  o.stdout_stream.digest = wdiv::sha256_hex(out);
  p.runs.push_back(o);
  return p;
}

void BM_Compare(benchmark::State& state) {
  const std::string base(64 * 1024, 'x');
  const auto native = profile(wdiv::Target::native, base);
  const auto wasm = profile(wdiv::Target::wasm, base.substr(0, base.size() - 1) + "y");
  for (auto _ : state) {
    auto record = wdiv::compare(native, wasm);
    benchmark::DoNotOptimize(record);
  }
}
BENCHMARK(BM_Compare);

void BM_Aggregate(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::vector<wdiv::CaseResult> results(10000);
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& r = results[i];
    r.test_id = std::to_string(i);
    r.cwe_id = static_cast<int>(rng() % 50);
    r.category = "cat" + std::to_string(r.cwe_id % 7);
    r.compiled_both = rng() % 4 != 0;
    r.deterministic_both = r.compiled_both && rng() % 10 != 0;
    r.divergent = r.deterministic_both && rng() % 3 == 0;
    if (r.divergent) r.subcause = wdiv::all_subcauses()[rng() % wdiv::all_subcauses().size()];
  }
  for (auto _ : state) {
    auto summaries = wdiv::aggregate(results).summaries(3, 1);
    benchmark::DoNotOptimize(summaries);
  }
}
BENCHMARK(BM_Aggregate);

}  // namespace

BENCHMARK_MAIN();
