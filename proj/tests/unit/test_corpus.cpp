#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "generators.hpp"
#include "wdiv/corpus.hpp"
#include "wdiv/errors.hpp"

namespace fs = std::filesystem;
using namespace wdiv;

namespace {

std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string_view::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wdiv_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, std::string_view text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST(ParseTestName, JulietNames) {
  EXPECT_EQ(parse_test_name("CWE761_Free_Pointer_Not_at_Start_of_Buffer__char_fixed_string_01.c"),
            (TestName{761, "Free_Pointer_Not_at_Start_of_Buffer__char_fixed_string", "01"}));
  EXPECT_EQ(parse_test_name("CWE134_Uncontrolled_Format_String__char_console_vfprintf_44.c"),
            (TestName{134, "Uncontrolled_Format_String__char_console_vfprintf", "44"}));
  EXPECT_EQ(parse_test_name("some/dir/CWE121_Stack__x_01.c").cwe_id, 121);
}

TEST(ParseTestName, Malformed) {
  EXPECT_THROW(parse_test_name("notes.c"), MalformedName);
  EXPECT_THROW(parse_test_name("CWE_x_01.c"), MalformedName);
  EXPECT_THROW(parse_test_name("CWE12_.c"), MalformedName);
  EXPECT_THROW(parse_test_name("CWE12_abc.c"), MalformedName);
  EXPECT_THROW(parse_test_name("CWE12_abc_01.h"), MalformedName);
}

TEST(ParseTestName, RenderRoundTrip) {
  testgen::Rng rng(3);
  const std::string alphabet = "abcXYZ_019";
  for (int i = 0; i < 2000; ++i) {
    TestName name;
    name.cwe_id = 1 + static_cast<int>(rng() % 2000);
    name.category = "A";
    for (std::size_t k = testgen::pick(rng, 20); k > 0; --k) name.category += alphabet[testgen::pick(rng, alphabet.size())];
    name.variant = std::to_string(rng() % 100) + (testgen::coin(rng) ? "a" : "");
    EXPECT_EQ(parse_test_name(render_test_name(name)), name);
  }
}

TEST(Preprocess, Examples) {
  EXPECT_EQ(preprocess_source("x = rand() % 2;"), "x = 1 % 2;");
  EXPECT_EQ(preprocess_source("int grand(void);"), "int grand(void);");
  EXPECT_EQ(preprocess_source("if(rand()||rand()){}"), "if(1||1){}");
}

TEST(Preprocess, LeavesNonCallsAlone) {
  for (const char* text : {"srand(time(NULL));", "s.rand()", "p->rand()", "/* rand() */", "// rand()",
                           "\"rand()\"", "int rand(void);", "rand", "rand_r(&seed)", "0xrand()"}) {
    EXPECT_EQ(preprocess_source(text), text) << text;
  }
  EXPECT_EQ(preprocess_source("y = rand ( \t) ;"), "y = 1 ;");
}

TEST(Preprocess, FlagsCallsWithArguments) {
  const auto r = preprocess_source_detailed("rand(7); rand();");
  EXPECT_EQ(r.text, "rand(7); 1;");
  EXPECT_EQ(r.replaced, 1u);
  EXPECT_EQ(r.flagged, 1u);
}

TEST(Preprocess, PropertiesOnGeneratedSources) {
  testgen::Rng rng(20240611);
  for (int i = 0; i < 10000; ++i) {
    const std::string src = testgen::c_like_source(rng);
    const auto once = preprocess_source_detailed(src);
    ASSERT_EQ(preprocess_source(once.text), once.text) << src;
    if (once.replaced == 0) ASSERT_EQ(once.text, src);
    ASSERT_LE(once.text.size(), src.size());
    ASSERT_EQ(count(once.text, "srand"), count(src, "srand")) << src;
    ASSERT_EQ(count(once.text, "grand"), count(src, "grand")) << src;
  }
}

TEST(Ingest, EmptyDirectory) {
  const auto dir = fresh_dir("empty");
  const auto r = ingest(dir);
  EXPECT_TRUE(r.cases.empty());
  EXPECT_TRUE(r.skipped.empty());
}

TEST(Ingest, OneJulietFile) {
  const auto dir = fresh_dir("one");
  write(dir / "CWE761_Free_Pointer_Not_at_Start_of_Buffer__char_fixed_string_01.c", "int main(void){return rand();}\n");
  const auto r = ingest(dir);
  ASSERT_EQ(r.cases.size(), 1u);
  EXPECT_EQ(r.cases[0].cwe_id, 761);
  EXPECT_EQ(r.cases[0].category, "Free_Pointer_Not_at_Start_of_Buffer__char_fixed_string");
  EXPECT_EQ(r.cases[0].variant, "01");
  EXPECT_EQ(r.cases[0].source_text, "int main(void){return 1;}\n");
  EXPECT_EQ(r.cases[0].id, test_case_id(r.cases[0].source_text));
}

TEST(Ingest, UnreadableFileIsSkipped) {
  const auto dir = fresh_dir("skip");
  write(dir / "CWE1_A_01.c", "int main(void){return 0;}\n");
  fs::create_symlink(dir / "nowhere.c", dir / "CWE2_B_01.c");
  const auto r = ingest(dir);
  ASSERT_EQ(r.cases.size(), 1u);
  EXPECT_EQ(r.cases[0].cwe_id, 1);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].path.filename(), "CWE2_B_01.c");
}

TEST(Ingest, UncategorizedAndFilters) {
  const auto dir = fresh_dir("filter");
  fs::create_directories(dir / "sub");
  write(dir / "notes.c", "int a;\n");
  write(dir / "sub" / "CWE1_A_01.c", "int b;\n");
  write(dir / "CWE2_B_01.c", "int c;\n");
  const auto all = ingest(dir);
  ASSERT_EQ(all.cases.size(), 3u);
  EXPECT_TRUE(std::is_sorted(all.cases.begin(), all.cases.end(),
                             [](const TestCase& a, const TestCase& b) { return a.path < b.path; }));
  const auto notes = std::find_if(all.cases.begin(), all.cases.end(), [](const TestCase& t) { return t.cwe_id == 0; });
  ASSERT_NE(notes, all.cases.end());
  EXPECT_EQ(notes->category, kUncategorized);

  CorpusFilter filter;
  filter.cwes = {2};
  const auto only = ingest(dir, filter);
  ASSERT_EQ(only.cases.size(), 1u);
  EXPECT_EQ(only.cases[0].category, "B");

  const auto again = ingest(dir);
  for (std::size_t i = 0; i < all.cases.size(); ++i) EXPECT_EQ(all.cases[i].id, again.cases[i].id);
}

TEST(Ingest, MissingRootThrows) {
  EXPECT_THROW(ingest("/nonexistent/wdiv/corpus"), IoError);
}

TEST(IngestManifest, RoundTrip) {
  const auto dir = fresh_dir("manifest");
  write(dir / "CWE9_Cat_02.c", "x = rand();\n");
  const auto r = ingest(dir);
  ASSERT_EQ(r.cases.size(), 1u);
  TestCase back = decode_ingest_entry(encode_ingest_entry(r.cases[0]));
  EXPECT_EQ(back.id, r.cases[0].id);
  EXPECT_EQ(back.path, r.cases[0].path);
  EXPECT_EQ(back.cwe_id, 9);
  EXPECT_EQ(back.category, "Cat");
  EXPECT_EQ(back.variant, "02");
  EXPECT_EQ(back.original_hash, r.cases[0].original_hash);
  reload_source(back);
  EXPECT_EQ(back.source_text, "x = 1;\n");

  write(dir / "CWE9_Cat_02.c", "changed\n");
  EXPECT_THROW(reload_source(back), IoError);
}
