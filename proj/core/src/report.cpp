#include "wdiv/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json_codec.hpp"
#include "wdiv/common.hpp"
#include "wdiv/errors.hpp"

namespace wdiv {

double FunnelCounts::divergence_ratio() const {
  return deterministic_both == 0 ? 0.0 : static_cast<double>(divergent) / static_cast<double>(deterministic_both);
}

bool FunnelCounts::monotone() const {
  return divergent <= deterministic_both && deterministic_both <= compiled_both && compiled_both <= ingested;
}

FunnelCounts& FunnelCounts::operator+=(const FunnelCounts& o) {
  ingested += o.ingested;
  compiled_both += o.compiled_both;
  deterministic_both += o.deterministic_both;
  divergent += o.divergent;
  return *this;
}

std::uint64_t CategorySummary::histogram_total() const {
  std::uint64_t total = 0;
  for (const auto& [_, n] : label_histogram) total += n;
  return total;
}

void Aggregate::add(const CaseResult& r) {
  FunnelCounts f;
  f.ingested = 1;
  f.compiled_both = r.compiled_both ? 1 : 0;
  f.deterministic_both = f.compiled_both && r.deterministic_both ? 1 : 0;
  f.divergent = f.deterministic_both && r.divergent ? 1 : 0;
  Bucket& b = buckets_[{r.cwe_id, r.category}];
  b.totals += f;
  funnel_ += f;
  if (f.divergent) {
    const Subcause s = r.subcause.value_or(Subcause::none);
    if (s == Subcause::none) {
      ++b.unclassified;
    } else {
      ++b.histogram[s];
    }
    b.divergent_ids.insert(r.test_id);
  }
}

void Aggregate::merge(const Aggregate& other) {
  for (const auto& [key, ob] : other.buckets_) {
    Bucket& b = buckets_[key];
    b.totals += ob.totals;
    for (const auto& [s, n] : ob.histogram) b.histogram[s] += n;
    b.unclassified += ob.unclassified;
    b.divergent_ids.insert(ob.divergent_ids.begin(), ob.divergent_ids.end());
  }
  funnel_ += other.funnel_;
}

std::vector<CategorySummary> Aggregate::summaries(std::size_t k, std::uint64_t seed) const {
  std::vector<CategorySummary> out;
  out.reserve(buckets_.size());
  for (const auto& [key, b] : buckets_) {
    CategorySummary s;
    s.cwe_id = key.first;
    s.category = key.second;
    s.totals = b.totals;
    s.label_histogram = b.histogram;
    s.unclassified = b.unclassified;
    s.sample_ids = select_samples(std::vector<std::string>(b.divergent_ids.begin(), b.divergent_ids.end()), k, seed);
    out.push_back(std::move(s));
  }
  return out;
}

Aggregate aggregate(const std::vector<CaseResult>& results) {
  Aggregate a;
  for (const auto& r : results) a.add(r);
  return a;
}

std::vector<std::string> select_samples(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("sample size must be at least 1");
  std::vector<std::pair<std::string, std::string>> ranked;
  ranked.reserve(ids.size());
  const std::string prefix = std::to_string(seed) + ":";
  for (const auto& id : ids) ranked.emplace_back(sha256_hex(prefix + id), id);
  std::sort(ranked.begin(), ranked.end());
  ranked.erase(std::unique(ranked.begin(), ranked.end()), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && out.size() < k; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> select_samples(const std::vector<CaseResult>& results, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& r : results) {
    if (r.divergent) ids.push_back(r.test_id);
  }
  return select_samples(ids, k, seed);
}

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::jsonl: return "jsonl";
    case ReportFormat::markdown: return "markdown";
    case ReportFormat::csv: return "csv";
  }
  return "jsonl";
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "jsonl") return ReportFormat::jsonl;
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  if (text == "csv") return ReportFormat::csv;
  throw ConfigError("format must be jsonl, markdown or csv, got: " + std::string(text));
}

namespace {

std::string percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", ratio * 100.0);
  return buf;
}

std::string md_cell(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_markdown(const std::vector<CategorySummary>& summaries, const FunnelCounts& funnel) {
  std::map<Subcause, std::uint64_t> totals;
  std::uint64_t unclassified = 0;
  for (const auto& s : summaries) {
    for (const auto& [sub, n] : s.label_histogram) totals[sub] += n;
    unclassified += s.unclassified;
  }

  std::ostringstream md;
  md << "# Divergence report\n\n";
  md << "## Funnel\n\n";
  md << "| Stage | Programs |\n|---|---:|\n";
  md << "| Ingested | " << funnel.ingested << " |\n";
  md << "| Compiled for both targets | " << funnel.compiled_both << " |\n";
  md << "| Deterministic on both targets | " << funnel.deterministic_both << " |\n";
  md << "| Divergent | " << funnel.divergent << " (" << percent(funnel.divergence_ratio()) << ") |\n\n";

  md << "## Root causes\n\n";
  md << "| Root cause | Due to | Programs affected |\n|---|---|---:|\n";
  std::uint64_t labeled = 0;
  for (const RootCause root : classified_roots()) {
    std::uint64_t root_total = 0;
    for (const Subcause s : all_subcauses()) {
      if (root_of(s) == root) root_total += totals[s];
    }
    labeled += root_total;
    md << "| " << title(root) << " | | " << root_total << " |\n";
    for (const Subcause s : all_subcauses()) {
      if (root_of(s) == root) md << "| | " << title(s) << " | " << totals[s] << " |\n";
    }
  }
  md << "| " << title(RootCause::unclassified) << " | | " << unclassified << " |\n";
  md << "| Total divergent | | " << labeled + unclassified << " |\n\n";

  md << "## Categories\n\n";
  md << "| CWE | Category | Ingested | Compiled | Deterministic | Divergent | Unclassified | Samples |\n";
  md << "|---:|---|---:|---:|---:|---:|---:|---|\n";
  for (const auto& s : summaries) {
    std::string samples;
    for (const auto& id : s.sample_ids) samples += (samples.empty() ? "" : ", ") + id;
    md << "| " << s.cwe_id << " | " << md_cell(s.category) << " | " << s.totals.ingested << " | "
       << s.totals.compiled_both << " | " << s.totals.deterministic_both << " | " << s.totals.divergent << " | "
       << s.unclassified << " | " << samples << " |\n";
  }
  return md.str();
}

namespace {

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_header() {
  std::vector<std::string> h = {"cwe_id", "category", "ingested", "compiled_both", "deterministic_both", "divergent"};
  for (const Subcause s : all_subcauses()) h.emplace_back(to_string(s));
  h.emplace_back("unclassified");
  h.emplace_back("samples");
  return h;
}

// RFC 4180 records; quoted fields may span lines.
std::vector<std::vector<std::string>> csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ManifestError("csv: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::uint64_t parse_count(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw ManifestError("csv: bad count: " + text);
    return v;
  } catch (const std::logic_error&) {
    throw ManifestError("csv: bad count: " + text);
  }
}

}  // namespace

std::string render_csv(const std::vector<CategorySummary>& summaries) {
  std::ostringstream out;
  const auto header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\r\n";
  for (const auto& s : summaries) {
    out << s.cwe_id << ',' << csv_field(s.category) << ',' << s.totals.ingested << ',' << s.totals.compiled_both
        << ',' << s.totals.deterministic_both << ',' << s.totals.divergent;
    for (const Subcause sub : all_subcauses()) {
      const auto it = s.label_histogram.find(sub);
      out << ',' << (it == s.label_histogram.end() ? 0 : it->second);
    }
    std::string samples;
    for (const auto& id : s.sample_ids) samples += (samples.empty() ? "" : ";") + id;
    out << ',' << s.unclassified << ',' << csv_field(samples) << "\r\n";
  }
  return out.str();
}

std::vector<CategorySummary> parse_csv(std::string_view text) {
  const auto rows = csv_records(text);
  if (rows.empty()) throw ManifestError("csv: missing header");
  const auto header = csv_header();
  if (rows.front() != header) throw ManifestError("csv: unexpected header");
  std::vector<CategorySummary> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw ManifestError("csv: row " + std::to_string(r) + " has wrong arity");
    CategorySummary s;
    s.cwe_id = static_cast<int>(parse_count(row[0]));
    s.category = row[1];
    s.totals.ingested = parse_count(row[2]);
    s.totals.compiled_both = parse_count(row[3]);
    s.totals.deterministic_both = parse_count(row[4]);
    s.totals.divergent = parse_count(row[5]);
    std::size_t col = 6;
    for (const Subcause sub : all_subcauses()) {
      const auto n = parse_count(row[col++]);
      if (n) s.label_histogram[sub] = n;
    }
    s.unclassified = parse_count(row[col++]);
    std::string_view samples = row[col];
    while (!samples.empty()) {
      const auto semi = samples.find(';');
      s.sample_ids.emplace_back(samples.substr(0, semi));
      if (semi == std::string_view::npos) break;
      samples.remove_prefix(semi + 1);
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

codec::json summary_to_json(const CategorySummary& s) {
  codec::json j;
  j["cwe_id"] = s.cwe_id;
  j["category"] = s.category;
  j["totals"] = {{"ingested", s.totals.ingested},
                 {"compiled_both", s.totals.compiled_both},
                 {"deterministic_both", s.totals.deterministic_both},
                 {"divergent", s.totals.divergent}};
  codec::json hist = codec::json::object();
  for (const auto& [sub, n] : s.label_histogram) hist[std::string(to_string(sub))] = n;
  j["label_histogram"] = hist;
  j["unclassified"] = s.unclassified;
  j["sample_ids"] = s.sample_ids;
  return j;
}

}  // namespace

std::string render_jsonl(const std::vector<CategorySummary>& summaries) {
  std::string out;
  for (const auto& s : summaries) out += codec::dump(summary_to_json(s)) + "\n";
  return out;
}

std::vector<CategorySummary> parse_jsonl(std::string_view text) {
  std::vector<CategorySummary> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      const auto j = codec::json::parse(line);
      CategorySummary s;
      s.cwe_id = j.at("cwe_id").get<int>();
      s.category = j.at("category").get<std::string>();
      const auto& t = j.at("totals");
      s.totals.ingested = t.at("ingested").get<std::uint64_t>();
      s.totals.compiled_both = t.at("compiled_both").get<std::uint64_t>();
      s.totals.deterministic_both = t.at("deterministic_both").get<std::uint64_t>();
      s.totals.divergent = t.at("divergent").get<std::uint64_t>();
      for (const auto& [key, n] : j.at("label_histogram").items()) s.label_histogram[parse_subcause(key)] = n;
      s.unclassified = j.at("unclassified").get<std::uint64_t>();
      s.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
      out.push_back(std::move(s));
    } catch (const codec::json::exception& e) {
      throw ManifestError(std::string("bad summary entry: ") + e.what());
    }
  }
  return out;
}

std::string render_funnel_json(const FunnelCounts& f) {
  codec::json j;
  j["ingested"] = f.ingested;
  j["compiled_both"] = f.compiled_both;
  j["deterministic_both"] = f.deterministic_both;
  j["divergent"] = f.divergent;
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.4f", f.divergence_ratio());
  j["divergence_ratio"] = codec::json::parse(ratio);
  return codec::dump(j) + "\n";
}

void emit(const std::vector<CategorySummary>& summaries, const FunnelCounts& funnel,
          const std::filesystem::path& out_dir, const std::set<ReportFormat>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  if (formats.count(ReportFormat::markdown)) write_file_atomic(out_dir / "report.md", render_markdown(summaries, funnel));
  if (formats.count(ReportFormat::csv)) write_file_atomic(out_dir / "report.csv", render_csv(summaries));
  if (formats.count(ReportFormat::jsonl)) write_file_atomic(out_dir / "summaries.jsonl", render_jsonl(summaries));
  write_file_atomic(out_dir / "funnel.json", render_funnel_json(funnel));
}

}  // namespace wdiv
