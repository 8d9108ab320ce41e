#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wdiv/classify.hpp"

namespace wdiv {

/// Everything the report needs to know about one ingested case.
struct CaseResult {
  std::string test_id;
  int cwe_id = 0;
  std::string category;
  bool compiled_both = false;
  bool deterministic_both = false;
  bool divergent = false;
  /// Set for divergent cases; Subcause::none means unclassified.
  std::optional<Subcause> subcause;
};

struct FunnelCounts {
  std::uint64_t ingested = 0;
  std::uint64_t compiled_both = 0;
  std::uint64_t deterministic_both = 0;
  std::uint64_t divergent = 0;

  /// divergent / deterministic_both, 0 when nothing was deterministic.
  double divergence_ratio() const;
  bool monotone() const;
  FunnelCounts& operator+=(const FunnelCounts& other);
  friend bool operator==(const FunnelCounts&, const FunnelCounts&) = default;
};

struct CategorySummary {
  int cwe_id = 0;
  std::string category;
  FunnelCounts totals;
  /// Classified subcauses only; zero entries omitted.
  std::map<Subcause, std::uint64_t> label_histogram;
  std::uint64_t unclassified = 0;
  std::vector<std::string> sample_ids;

  std::uint64_t histogram_total() const;
  friend bool operator==(const CategorySummary&, const CategorySummary&) = default;
};

/// Commutative monoid over case results. Sampling is deferred to summaries()
/// so merge order never matters.
class Aggregate {
 public:
  void add(const CaseResult& result);
  void merge(const Aggregate& other);

  const FunnelCounts& funnel() const { return funnel_; }
  /// Sorted by (cwe_id, category).
  std::vector<CategorySummary> summaries(std::size_t k = 3, std::uint64_t seed = 0) const;

  friend bool operator==(const Aggregate&, const Aggregate&) = default;

 private:
  struct Bucket {
    FunnelCounts totals;
    std::map<Subcause, std::uint64_t> histogram;
    std::uint64_t unclassified = 0;
    std::set<std::string> divergent_ids;
    friend bool operator==(const Bucket&, const Bucket&) = default;
  };
  using Key = std::pair<int, std::string>;

  std::map<Key, Bucket> buckets_;
  FunnelCounts funnel_;
};

Aggregate aggregate(const std::vector<CaseResult>& results);

/// Up to k ids ranked by a seeded hash of each id; order of `ids` is irrelevant.
/// Result is sorted. Throws ConfigError when k == 0.
std::vector<std::string> select_samples(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed);
/// Same, restricted to divergent results.
std::vector<std::string> select_samples(const std::vector<CaseResult>& results, std::size_t k, std::uint64_t seed);

enum class ReportFormat { jsonl, markdown, csv };

std::string_view to_string(ReportFormat format);
/// Throws ConfigError.
ReportFormat parse_report_format(std::string_view text);

std::string render_markdown(const std::vector<CategorySummary>& summaries, const FunnelCounts& funnel);
std::string render_csv(const std::vector<CategorySummary>& summaries);
std::string render_jsonl(const std::vector<CategorySummary>& summaries);
std::string render_funnel_json(const FunnelCounts& funnel);

/// Throws ManifestError.
std::vector<CategorySummary> parse_csv(std::string_view text);
std::vector<CategorySummary> parse_jsonl(std::string_view text);

/// Writes report.md / report.csv / summaries.jsonl (per the formats) plus
/// funnel.json into `out_dir`. Throws IoError.
void emit(const std::vector<CategorySummary>& summaries, const FunnelCounts& funnel,
          const std::filesystem::path& out_dir, const std::set<ReportFormat>& formats);

}  // namespace wdiv
