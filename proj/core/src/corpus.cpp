#include "wdiv/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <system_error>

#include <nlohmann/json.hpp>
#include "wdiv/common.hpp"
#include "wdiv/errors.hpp"

namespace wdiv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

TestName parse_test_name(std::string_view filename) {
  if (const auto slash = filename.find_last_of('/'); slash != std::string_view::npos) {
    filename.remove_prefix(slash + 1);
  }
  const std::string original(filename);
  if (filename.size() < 2 || filename.substr(filename.size() - 2) != ".c") {
    throw MalformedName("not a .c file: " + original);
  }
  std::string_view stem = filename.substr(0, filename.size() - 2);
  if (stem.substr(0, 3) != "CWE") throw MalformedName("missing CWE prefix: " + original);
  stem.remove_prefix(3);

  std::size_t digits = 0;
  while (digits < stem.size() && std::isdigit(static_cast<unsigned char>(stem[digits])) != 0) {
    ++digits;
  }
  if (digits == 0 || digits > 9 || digits >= stem.size() || stem[digits] != '_') {
    throw MalformedName("missing CWE<digits>_ prefix: " + original);
  }
  const int cwe = std::stoi(std::string(stem.substr(0, digits)));
  if (cwe <= 0) throw MalformedName("CWE number must be positive: " + original);
  stem.remove_prefix(digits + 1);

  const auto last = stem.find_last_of('_');
  if (last == std::string_view::npos || last == 0 || last + 1 >= stem.size()) {
    throw MalformedName("missing variant suffix: " + original);
  }
  const std::string_view variant = stem.substr(last + 1);
  if (!std::all_of(variant.begin(), variant.end(),
                   [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; })) {
    throw MalformedName("variant must be alphanumeric: " + original);
  }
  return TestName{cwe, std::string(stem.substr(0, last)), std::string(variant)};
}

std::string render_test_name(const TestName& name) {
  return "CWE" + std::to_string(name.cwe_id) + "_" + name.category + "_" + name.variant + ".c";
}

PreprocessResult preprocess_source_detailed(std::string_view raw) {
  PreprocessResult result;
  std::string& out = result.text;
  out.reserve(raw.size());

  const std::size_t n = raw.size();
  std::size_t i = 0;
  // Last significant character emitted outside comments; used to spot `.rand` / `->rand`.
  char prev_sig = 0;
  char prev_sig2 = 0;

  auto note_sig = [&](char c) {
    prev_sig2 = prev_sig;
    prev_sig = c;
  };

  while (i < n) {
    const char c = raw[i];

    if (c == '/' && i + 1 < n && raw[i + 1] == '/') {
      const std::size_t start = i;
      i += 2;
      while (i < n && raw[i] != '\n') {
        if (raw[i] == '\\' && i + 1 < n && raw[i + 1] == '\n') ++i;
        ++i;
      }
      out.append(raw.substr(start, i - start));
      continue;
    }
    if (c == '/' && i + 1 < n && raw[i + 1] == '*') {
      const std::size_t start = i;
      const auto end = raw.find("*/", i + 2);
      i = end == std::string_view::npos ? n : end + 2;
      out.append(raw.substr(start, i - start));
      continue;
    }
    if (c == '"' || c == '\'') {
      const std::size_t start = i;
      ++i;
      while (i < n && raw[i] != c && raw[i] != '\n') {
        if (raw[i] == '\\' && i + 1 < n) ++i;
        ++i;
      }
      if (i < n && raw[i] == c) ++i;
      out.append(raw.substr(start, i - start));
      note_sig(c);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) != 0 ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(raw[i + 1])) != 0)) {
      // pp-number: keeps identifiers glued to digits (e.g. `1rand`) out of the match.
      const std::size_t start = i;
      ++i;
      while (i < n) {
        const char d = raw[i];
        if ((d == '+' || d == '-') && (raw[i - 1] == 'e' || raw[i - 1] == 'E' ||
                                       raw[i - 1] == 'p' || raw[i - 1] == 'P')) {
          ++i;
        } else if (is_ident_char(d) || d == '.') {
          ++i;
        } else {
          break;
        }
      }
      out.append(raw.substr(start, i - start));
      note_sig('0');
      continue;
    }
    if (is_ident_start(c)) {
      const std::size_t start = i;
      while (i < n && is_ident_char(raw[i])) ++i;
      const std::string_view ident = raw.substr(start, i - start);
      const bool member = prev_sig == '.' || (prev_sig == '>' && prev_sig2 == '-');
      if (ident == "rand" && !member) {
        std::size_t j = i;
        while (j < n && is_space(raw[j])) ++j;
        if (j < n && raw[j] == '(') {
          std::size_t k = j + 1;
          while (k < n && is_space(raw[k])) ++k;
          if (k < n && raw[k] == ')') {
            out.push_back('1');
            ++result.replaced;
            i = k + 1;
            note_sig('1');
            continue;
          }
          const bool void_param = raw.substr(k, 4) == "void" &&
                                  (k + 4 >= n || !is_ident_char(raw[k + 4]));
          if (!void_param) ++result.flagged;
        }
      }
      out.append(ident);
      note_sig('a');
      continue;
    }
    out.push_back(c);
    if (!is_space(c)) note_sig(c);
    ++i;
  }
  return result;
}

std::string test_case_id(std::string_view source_text) {
  return sha256_hex(source_text).substr(0, 16);
}

TestCase make_test_case(const fs::path& path, std::string_view raw) {
  TestCase test;
  test.path = path;
  test.original_hash = sha256_hex(raw);
  PreprocessResult pre = preprocess_source_detailed(raw);
  test.source_text = std::move(pre.text);
  test.flagged_rand_calls = pre.flagged;
  test.id = test_case_id(test.source_text);
  try {
    TestName name = parse_test_name(path.filename().string());
    test.cwe_id = name.cwe_id;
    test.category = std::move(name.category);
    test.variant = std::move(name.variant);
  } catch (const MalformedName&) {
    test.cwe_id = 0;
    test.category = std::string(kUncategorized);
    test.variant = path.stem().string();
  }
  return test;
}

bool CorpusFilter::accepts(const TestCase& test) const {
  if (!cwes.empty() && std::find(cwes.begin(), cwes.end(), test.cwe_id) == cwes.end()) {
    return false;
  }
  if (!categories.empty() &&
      std::find(categories.begin(), categories.end(), test.category) == categories.end()) {
    return false;
  }
  return true;
}

IngestResult ingest(const fs::path& root, const CorpusFilter& filter) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("corpus root is not a readable directory: " + root.string());
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw IoError("cannot read corpus root " + root.string() + ": " + ec.message());

  std::vector<fs::path> files;
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    const fs::directory_entry& entry = *it;
    if (entry.path().extension() != ".c") continue;
    std::error_code type_ec;
    if (entry.is_directory(type_ec)) continue;
    files.push_back(entry.path());
  }
  if (ec) throw IoError("error while walking " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  IngestResult result;
  for (const auto& path : files) {
    std::string raw;
    try {
      raw = read_text_file(path);
    } catch (const IoError& e) {
      result.skipped.push_back({path, e.what()});
      continue;
    }
    TestCase test = make_test_case(path, raw);
    if (filter.accepts(test)) result.cases.push_back(std::move(test));
  }
  return result;
}

void reload_source(TestCase& test) {
  const std::string raw = read_text_file(test.path);
  TestCase fresh = make_test_case(test.path, raw);
  if (!test.id.empty() && fresh.id != test.id) {
    throw IoError("source changed since ingest: " + test.path.string());
  }
  test.id = fresh.id;
  test.source_text = std::move(fresh.source_text);
  test.original_hash = fresh.original_hash;
  test.flagged_rand_calls = fresh.flagged_rand_calls;
}

std::string encode_ingest_entry(const TestCase& test) {
  json j;
  j["id"] = test.id;
  j["path"] = test.path.string();
  j["cwe"] = test.cwe_id;
  j["category"] = test.category;
  j["variant"] = test.variant;
  j["original_hash"] = test.original_hash;
  j["flagged_rand_calls"] = test.flagged_rand_calls;
  return j.dump();
}

TestCase decode_ingest_entry(std::string_view line) {
  try {
    const json j = json::parse(line);
    TestCase test;
    test.id = j.at("id").get<std::string>();
    test.path = j.at("path").get<std::string>();
    test.cwe_id = j.at("cwe").get<int>();
    test.category = j.at("category").get<std::string>();
    test.variant = j.at("variant").get<std::string>();
    test.original_hash = j.at("original_hash").get<std::string>();
    test.flagged_rand_calls = j.value("flagged_rand_calls", std::size_t{0});
    return test;
  } catch (const json::exception& e) {
    throw ManifestError(std::string("bad ingest entry: ") + e.what());
  }
}

std::string encode_skipped_entry(const SkippedFile& skipped) {
  json j;
  j["path"] = skipped.path.string();
  j["skipped"] = true;
  j["reason"] = skipped.reason;
  return j.dump();
}

}  // namespace wdiv
