#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "dwbus/dsl.hpp"
#include "schema_gen.hpp"
#include "seed.hpp"

using namespace dwbus;

namespace {

std::string read(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kMinimal =
    "schema tiny {\n"
    "  dimension patient {\n"
    "    attribute code text\n"
    "    naturalkey code\n"
    "  }\n"
    "  fact weight {\n"
    "    grain patient\n"
    "    measure value decimal additive\n"
    "  }\n"
    "}\n";

}  // namespace

TEST(Dsl, MinimalProgram) {
  const auto r = dsl::parse_schema({kMinimal});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.schema->dimensions.size(), 1u);
  EXPECT_EQ(r.schema->fact_tables.size(), 1u);
  EXPECT_EQ(r.schema->version, 1u);
}

TEST(Dsl, FixtureHasFourBusDimensions) {
  const auto r = dsl::parse_schema_file(testsupport::fixture_path("medical/medical.dws"));
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(model::conformed_dimensions(*r.schema).size(), 4u);
}

TEST(Dsl, UnclosedBlockIsOneSyntaxError) {
  const std::string text =
      "schema s {\n"
      "  dimension d {\n"
      "    attribute a text\n"
      "    naturalkey a\n"
      "  }\n"
      "  fact f {\n"
      "    grain d\n"
      "    measure m decimal additive\n";
  const auto r = dsl::parse_schema({text});
  EXPECT_FALSE(r.ok());
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].message.rfind("syntax error:", 0), 0u);
  EXPECT_EQ(r.diagnostics[0].line, 6u);
}

TEST(Dsl, DistinctMessagePrefixes) {
  auto first = [](const std::string& text) {
    const auto r = dsl::parse_schema({text});
    EXPECT_FALSE(r.ok());
    return r.diagnostics.empty() ? std::string() : r.diagnostics[0].message;
  };
  std::string lexical = kMinimal;
  lexical.replace(lexical.find("patient {"), 7, "Patient");
  EXPECT_EQ(first(lexical).rfind("lexical error:", 0), 0u);

  std::string syntax = kMinimal;
  syntax.replace(syntax.find("naturalkey"), 10, "level");
  EXPECT_EQ(first(syntax).rfind("syntax error:", 0), 0u);

  std::string duplicate = kMinimal;
  duplicate.replace(duplicate.find("    naturalkey"), 0, "    attribute code integer\n");
  EXPECT_EQ(first(duplicate).rfind("duplicate declaration:", 0), 0u);

  std::string dangling = kMinimal;
  dangling.replace(dangling.find("grain patient"), 13, "grain patint");
  EXPECT_EQ(first(dangling).rfind("dangling reference:", 0), 0u);
}

TEST(Dsl, BrokenFixturePointsAtTheLine) {
  const auto path = testsupport::fixture_path("medical/broken.dws");
  const auto r = dsl::parse_schema_file(path);
  ASSERT_FALSE(r.ok());
  ASSERT_FALSE(r.diagnostics.empty());
  const auto lines = read(path);
  std::size_t line = 1;
  for (std::size_t i = 0; i < lines.find("grain analysis"); ++i) line += lines[i] == '\n';
  EXPECT_EQ(r.diagnostics[0].line, line);
}

TEST(Dsl, FixtureRoundTrip) {
  const auto r = dsl::parse_schema_file(testsupport::fixture_path("medical/medical.dws"));
  ASSERT_TRUE(r.ok());
  const auto text = dsl::serialize_schema(*r.schema);
  const auto back = dsl::parse_schema({text});
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back.schema, *r.schema);
}

TEST(Dsl, DeclarationOrderDoesNotChangeText) {
  auto s = *dsl::parse_schema_file(testsupport::fixture_path("medical/medical.dws")).schema;
  auto t = s;
  std::reverse(t.dimensions.begin(), t.dimensions.end());
  std::reverse(t.fact_tables.begin(), t.fact_tables.end());
  EXPECT_EQ(dsl::serialize_schema(s), dsl::serialize_schema(t));
}

TEST(Dsl, SerializeRefusesEmptyHierarchy) {
  auto s = *dsl::parse_schema({kMinimal}).schema;
  s.dimensions[0].hierarchies.push_back({"empty", {}});
  EXPECT_THROW(dsl::serialize_schema(s), model::SchemaInvalid);
}

TEST(Dsl, CommentsAndBlankLinesIgnored) {
  std::string text = "# leading comment\n\n";
  text += kMinimal;
  text.insert(text.find("  fact"), "  # between declarations\n\n");
  const auto r = dsl::parse_schema({text});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r.schema, *dsl::parse_schema({kMinimal}).schema);
}

TEST(DslProperty, RandomSchemasRoundTrip) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto s = testsupport::random_schema(rng);
    const auto text = dsl::serialize_schema(s);
    const auto back = dsl::parse_schema({text});
    ASSERT_TRUE(back.ok()) << text << back.diagnostics[0].message;
    EXPECT_EQ(*back.schema, s) << text;
  }
}

TEST(DslProperty, CorruptionsReportTheirLine) {
  const auto fixture = read(testsupport::fixture_path("medical/medical.dws"));
  const auto tokens = testsupport::tokens_of(fixture);
  std::mt19937_64 rng(22);
  for (const auto& tok : tokens) {
    const auto broken = testsupport::corrupt(fixture, tok, rng);
    const auto r = dsl::parse_schema({broken});
    EXPECT_FALSE(r.ok());
    bool hit = false;
    for (const auto& d : r.diagnostics) hit = hit || d.line == tok.line;
    EXPECT_TRUE(hit) << "line " << tok.line << ": " << (r.diagnostics.empty() ? "" : r.diagnostics[0].message);
  }
}

TEST(DslProperty, DiagnosticsPointInsideTheSource) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 2000; ++i) {
    std::string input(rng() % 200, ' ');
    static const char alphabet[] = "schemadimensionfactgrain{}\n #-0123456789XYZ$";
    for (auto& c : input) c = alphabet[rng() % (sizeof(alphabet) - 1)];
    const auto r = dsl::parse_schema({input});
    const std::size_t lines = 1 + static_cast<std::size_t>(std::count(input.begin(), input.end(), '\n'));
    for (const auto& d : r.diagnostics) {
      EXPECT_GE(d.line, 1u);
      EXPECT_LE(d.line, lines);
      EXPECT_GE(d.column, 1u);
    }
  }
}
