#include "wdiv/pipeline.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "wdiv/common.hpp"
#include "wdiv/errors.hpp"

namespace wdiv {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        if (failed.load()) return;
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

namespace {

void ensure_out(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec) throw IoError("cannot create " + config.out.string() + ": " + ec.message());
}

CompileArtifact failed_artifact(const TestCase& test, Target target, const std::string& why) {
  CompileArtifact a;
  a.test_id = test.id;
  a.target = target;
  a.ok = false;
  a.diagnostics = why;
  return a;
}

std::string ineligible_note(const BuildPair& pair) {
  std::vector<std::string> sides;
  if (!pair.native.ok) sides.emplace_back("native");
  if (!pair.wasm.ok) sides.emplace_back("wasm");
  std::string note = "compile failed:";
  for (const auto& s : sides) note += " " + s;
  return note;
}

}  // namespace

std::vector<TestCase> stage_ingest(const RunConfig& config, std::ostream& log) {
  ensure_out(config);
  IngestResult result = ingest(config.corpus, config.filter);
  std::vector<std::string> lines;
  for (const auto& c : result.cases) lines.push_back(encode_ingest_entry(c));
  write_lines(config.out / manifest::kIngest, lines);
  lines.clear();
  for (const auto& s : result.skipped) lines.push_back(encode_skipped_entry(s));
  write_lines(config.out / manifest::kIngestSkipped, lines);
  log << "ingest: " << result.cases.size() << " cases, " << result.skipped.size() << " skipped\n";
  return std::move(result.cases);
}

std::vector<BuildPair> stage_build(const RunConfig& config, Builder& builder, const std::vector<TestCase>& cases,
                                   std::ostream& log) {
  ensure_out(config);
  std::vector<BuildPair> pairs(cases.size());
  parallel_for(cases.size(), config.jobs, [&](std::size_t i) {
    const TestCase& test = cases[i];
    try {
      pairs[i] = builder.build_pair(test);
    } catch (const std::exception& e) {
      pairs[i].native = failed_artifact(test, Target::native, e.what());
      pairs[i].wasm = failed_artifact(test, Target::wasm, e.what());
      pairs[i].eligible = false;
    }
  });
  std::vector<std::string> lines;
  std::size_t eligible = 0;
  for (const auto& p : pairs) {
    lines.push_back(encode_artifact(p.native));
    lines.push_back(encode_artifact(p.wasm));
    eligible += p.eligible ? 1 : 0;
  }
  write_lines(config.out / manifest::kBuild, lines);
  log << "build: " << eligible << " of " << pairs.size() << " compiled for both targets ("
      << builder.compiler_invocations() << " compiler runs, " << builder.cache_hits() << " cache hits)\n";
  return pairs;
}

ProbeSet stage_run(const RunConfig& config, const Executor& executor, const std::vector<BuildPair>& builds,
                   std::ostream& log) {
  ensure_out(config);
  struct Slot {
    std::optional<BehaviorProfile> native;
    std::optional<BehaviorProfile> wasm;
    std::string error;
  };
  std::vector<Slot> slots(builds.size());
  parallel_for(builds.size(), config.jobs, [&](std::size_t i) {
    const BuildPair& pair = builds[i];
    if (!pair.eligible) return;
    try {
      slots[i].native = executor.probe(pair.native);
      slots[i].wasm = executor.probe(pair.wasm);
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });
  ProbeSet set;
  std::vector<std::string> native_lines;
  std::vector<std::string> wasm_lines;
  for (std::size_t i = 0; i < builds.size(); ++i) {
    const std::string& id = builds[i].native.test_id;
    if (!slots[i].error.empty()) {
      set.errors[id] = slots[i].error;
      log << "run: " << id << ": " << slots[i].error << "\n";
      continue;
    }
    if (slots[i].native && slots[i].wasm) {
      native_lines.push_back(encode_profile(*slots[i].native));
      wasm_lines.push_back(encode_profile(*slots[i].wasm));
      set.native.emplace(id, std::move(*slots[i].native));
      set.wasm.emplace(id, std::move(*slots[i].wasm));
    }
  }
  write_lines(config.out / manifest::kProbeNative, native_lines);
  write_lines(config.out / manifest::kProbeWasm, wasm_lines);
  log << "run: probed " << set.native.size() << " pairs, " << set.errors.size() << " harness errors\n";
  return set;
}

std::vector<DivergenceRecord> stage_diff(const RunConfig& config, const std::vector<BuildPair>& builds,
                                         const ProbeSet& probes) {
  ensure_out(config);
  std::vector<DivergenceRecord> records;
  const EnvMode mode = config.limits.env_mode;
  for (const auto& pair : builds) {
    const std::string& id = pair.native.test_id;
    if (!pair.eligible) {
      records.push_back(ineligible_record(id, mode, ineligible_note(pair)));
      continue;
    }
    const auto n = probes.native.find(id);
    const auto w = probes.wasm.find(id);
    if (n == probes.native.end() || w == probes.wasm.end()) {
      DivergenceRecord r;
      r.test_id = id;
      r.env_mode = mode;
      r.excluded_reason = ExcludedReason::harness_error;
      r.note = n == probes.native.end() ? "no native probe" : "no wasm probe";
      records.push_back(std::move(r));
      continue;
    }
    if (auto r = compare(n->second, w->second)) records.push_back(std::move(*r));
  }
  std::vector<std::string> lines;
  for (const auto& r : records) lines.push_back(encode_divergence(r));
  write_lines(config.out / manifest::kDivergences, lines);
  return records;
}

std::vector<LabeledRecord> stage_classify(const RunConfig& config, const std::vector<TestCase>& cases,
                                          const std::vector<DivergenceRecord>& records, std::ostream& log) {
  ensure_out(config);
  std::map<std::string, const TestCase*> by_id;
  for (const auto& c : cases) by_id.emplace(c.id, &c);
  const fs::path ws = config.workspace_dir();
  std::vector<LabeledRecord> labeled(records.size());
  parallel_for(records.size(), config.jobs, [&](std::size_t i) {
    const DivergenceRecord& r = records[i];
    labeled[i].record = r;
    if (!r.divergent()) return;
    const auto it = by_id.find(r.test_id);
    std::string source = it == by_id.end() ? std::string() : it->second->source_text;
    Evidence ev = gather_evidence(r, ws / "bin" / "native" / r.test_id, ws / "bin" / "wasm" / r.test_id,
                                  std::move(source), config.evidence);
    labeled[i].label = classify(r, ev, config.classifier);
  });
  std::vector<std::string> lines;
  std::size_t classified = 0;
  std::size_t divergent = 0;
  for (const auto& l : labeled) {
    lines.push_back(encode_labeled(l));
    if (l.label) {
      ++divergent;
      if (l.label->root != RootCause::unclassified) ++classified;
    }
  }
  write_lines(config.out / manifest::kDivergences, lines);
  log << "classify: " << classified << " of " << divergent << " divergences labeled\n";
  return labeled;
}

std::vector<CaseResult> case_results(const std::vector<TestCase>& cases, const std::vector<BuildPair>& builds,
                                     const std::vector<LabeledRecord>& labeled) {
  std::map<std::string, bool> eligible;
  for (const auto& b : builds) eligible[b.native.test_id] = b.eligible;
  std::map<std::string, const LabeledRecord*> by_id;
  for (const auto& l : labeled) by_id[l.record.test_id] = &l;
  std::vector<CaseResult> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    CaseResult r;
    r.test_id = c.id;
    r.cwe_id = c.cwe_id;
    r.category = c.category;
    const auto e = eligible.find(c.id);
    r.compiled_both = e != eligible.end() && e->second;
    const auto l = by_id.find(c.id);
    const LabeledRecord* rec = l == by_id.end() ? nullptr : l->second;
    r.deterministic_both = r.compiled_both && !(rec && rec->record.excluded_reason);
    r.divergent = r.deterministic_both && rec && rec->record.divergent();
    if (r.divergent) r.subcause = rec->label ? rec->label->subcause : Subcause::none;
    out.push_back(std::move(r));
  }
  return out;
}

int stage_report(const RunConfig& config, const std::vector<TestCase>& cases, const std::vector<BuildPair>& builds,
                 const std::vector<LabeledRecord>& labeled) {
  const Aggregate agg = aggregate(case_results(cases, builds, labeled));
  emit(agg.summaries(config.sample_k, config.seed), agg.funnel(), config.out, config.formats);
  return agg.funnel().divergent > 0 ? kExitDivergent : kExitClean;
}

std::vector<TestCase> load_ingest(const RunConfig& config, bool with_sources) {
  std::vector<TestCase> cases;
  for (const auto& line : read_lines(config.out / manifest::kIngest)) {
    TestCase c = decode_ingest_entry(line);
    if (with_sources) {
      try {
        reload_source(c);
      } catch (const Error&) {
        c.source_text.clear();
      }
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

std::vector<BuildPair> load_builds(const RunConfig& config) {
  std::vector<BuildPair> pairs;
  std::map<std::string, std::size_t> index;
  for (const auto& line : read_lines(config.out / manifest::kBuild)) {
    CompileArtifact a = decode_artifact(line);
    auto [it, fresh] = index.emplace(a.test_id, pairs.size());
    if (fresh) pairs.emplace_back();
    BuildPair& p = pairs[it->second];
    (a.target == Target::native ? p.native : p.wasm) = std::move(a);
  }
  for (auto& p : pairs) {
    if (p.native.test_id.empty()) p.native.test_id = p.wasm.test_id;
    if (p.wasm.test_id.empty()) p.wasm.test_id = p.native.test_id;
    p.eligible = p.native.ok && p.wasm.ok;
  }
  return pairs;
}

ProbeSet load_probes(const fs::path& native_manifest, const fs::path& wasm_manifest) {
  ProbeSet set;
  for (const auto& line : read_lines(native_manifest)) {
    BehaviorProfile p = decode_profile(line);
    if (p.target != Target::native) throw ManifestError("wasm profile in native manifest: " + p.test_id);
    set.native.insert_or_assign(p.test_id, std::move(p));
  }
  for (const auto& line : read_lines(wasm_manifest)) {
    BehaviorProfile p = decode_profile(line);
    if (p.target != Target::wasm) throw ManifestError("native profile in wasm manifest: " + p.test_id);
    set.wasm.insert_or_assign(p.test_id, std::move(p));
  }
  return set;
}

std::vector<DivergenceRecord> load_divergences(const fs::path& path) {
  std::vector<DivergenceRecord> out;
  for (const auto& line : read_lines(path)) out.push_back(decode_divergence(line));
  return out;
}

std::vector<LabeledRecord> load_labeled(const fs::path& path) {
  std::vector<LabeledRecord> out;
  for (const auto& line : read_lines(path)) out.push_back(decode_labeled(line));
  return out;
}

void write_effective_config(const RunConfig& config) {
  ensure_out(config);
  write_file_atomic(config.out / manifest::kEffectiveConfig, dump_config(config));
}

int run_pipeline(const RunConfig& config, std::ostream& log) {
  std::optional<Builder> builder;
  std::optional<Executor> executor;
  try {
    validate(config, true);
    write_effective_config(config);
    builder.emplace(config.workspace_dir(), config.toolchain);
    executor.emplace(config.workspace_dir(), config.runtime, config.limits);
  } catch (const Error& e) {
    log << "wdiv: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const auto cases = stage_ingest(config, log);
    const auto builds = stage_build(config, *builder, cases, log);
    const auto probes = stage_run(config, *executor, builds, log);
    const auto records = stage_diff(config, builds, probes);
    const auto labeled = stage_classify(config, cases, records, log);
    return stage_report(config, cases, builds, labeled);
  } catch (const Error& e) {
    log << "wdiv: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace wdiv
