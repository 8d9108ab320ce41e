#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "wdiv/report.hpp"

namespace wdiv::testcheck {

/// Lines of one `## <heading>` section of the markdown report.
inline std::vector<std::string> markdown_section(const std::string& md, const std::string& heading) {
  std::vector<std::string> lines;
  std::istringstream in(md);
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.rfind("## ", 0) == 0) {
      inside = line == "## " + heading;
      continue;
    }
    if (inside && !line.empty()) lines.push_back(line);
  }
  return lines;
}

/// Empty when the report has the expected layout, else a description of the problem.
inline std::string report_shape_problem(const std::string& md) {
  const auto funnel = markdown_section(md, "Funnel");
  if (funnel.size() != 2 + 4) return "funnel table should have 4 stage rows";
  const auto roots = markdown_section(md, "Root causes");
  if (roots.size() != 2 + 3 + 11 + 2) return "root cause table should have 3 roots, 11 subcauses, unclassified and total";
  std::size_t root_rows = 0;
  std::size_t sub_rows = 0;
  for (std::size_t i = 2; i < roots.size(); ++i) {
    if (roots[i].rfind("| | ", 0) == 0) {
      ++sub_rows;
    } else {
      ++root_rows;
    }
  }
  if (sub_rows != 11 || root_rows != 5) return "unexpected split of root and subcause rows";
  if (roots[roots.size() - 2].rfind("| Unclassified |", 0) != 0) return "missing explicit unclassified row";
  return {};
}

/// Empty when every summary and the funnel satisfy the count invariants.
inline std::string invariant_problem(const std::vector<CategorySummary>& summaries, const FunnelCounts& funnel) {
  if (!funnel.monotone()) return "global funnel not monotone";
  FunnelCounts sum;
  for (const auto& s : summaries) {
    if (!s.totals.monotone()) return "funnel not monotone for CWE" + std::to_string(s.cwe_id) + " " + s.category;
    if (s.histogram_total() + s.unclassified != s.totals.divergent) {
      return "histogram + unclassified != divergent for CWE" + std::to_string(s.cwe_id) + " " + s.category;
    }
    sum += s.totals;
  }
  if (!(sum == funnel)) return "category totals do not add up to the funnel";
  return {};
}

}  // namespace wdiv::testcheck
