#include "dwbus/dsl.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dwbus::dsl {

namespace {

enum class Tok { word, integer, lbrace, rbrace, newline, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
};

const std::set<std::string, std::less<>> kKeywords = {
    "schema", "version",   "dimension", "attribute", "naturalkey", "hierarchy", "level",     "fact",
    "grain",  "measure",   "group",     "central",   "satellite",  "documents", "outrigger",
};

bool is_keyword(std::string_view word) { return kKeywords.find(word) != kKeywords.end(); }

struct Failure {
  Diagnostic diag;
};

[[noreturn]] void fail(std::size_t line, std::size_t column, std::string message) {
  throw Failure{Diagnostic{Severity::error, line, column, std::move(message)}};
}

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::word: return is_keyword(t.text) ? "keyword '" + t.text + "'" : "'" + t.text + "'";
    case Tok::integer: return "number '" + t.text + "'";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::newline: return "end of line";
    case Tok::end: return "end of input";
  }
  return "token";
}

bool word_byte(unsigned char ch) {
  return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
         ch == '-' || ch >= 0x80;
}

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t col = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto ch = static_cast<unsigned char>(text[i]);
    if (ch == '\n') {
      out.push_back({Tok::newline, "", line, col});
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\f' || ch == '\v') {
      ++i;
      ++col;
      continue;
    }
    if (ch == '#') {
      while (i < text.size() && text[i] != '\n') {
        ++i;
        ++col;
      }
      continue;
    }
    if (ch == '{' || ch == '}') {
      out.push_back({ch == '{' ? Tok::lbrace : Tok::rbrace, std::string(1, static_cast<char>(ch)), line, col});
      ++i;
      ++col;
      continue;
    }
    if (word_byte(ch)) {
      const std::size_t start = i;
      const std::size_t start_col = col;
      while (i < text.size() && word_byte(static_cast<unsigned char>(text[i]))) {
        ++i;
        ++col;
      }
      std::string word(text.substr(start, i - start));
      const bool numeric = std::all_of(word.begin(), word.end(), [](char c) { return c >= '0' && c <= '9'; });
      if (numeric) {
        out.push_back({Tok::integer, std::move(word), line, start_col});
      } else if (model::is_identifier(word)) {
        out.push_back({Tok::word, std::move(word), line, start_col});
      } else {
        if (word.size() > 40) word = word.substr(0, 40) + "...";
        fail(line, start_col,
             "lexical error: invalid identifier '" + word +
                 "' (identifiers are lower-case words joined by hyphens)");
      }
      continue;
    }
    char buf[8];
    if (ch >= 0x20 && ch < 0x7F) {
      buf[0] = static_cast<char>(ch);
      buf[1] = '\0';
    } else {
      std::snprintf(buf, sizeof(buf), "\\x%02X", ch);
    }
    fail(line, col, std::string("lexical error: unexpected character '") + buf + "'");
  }
  out.push_back({Tok::end, "", line, col});
  return out;
}

struct Pos {
  std::size_t line;
  std::size_t column;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  model::Schema run() {
    skip_newlines();
    const Token& kw = peek();
    if (!is(kw, "schema")) fail(kw.line, kw.column, "syntax error: expected 'schema', found " + describe(kw));
    positions_.emplace("schema", Pos{kw.line, kw.column});
    advance();
    schema_.name = expect_name("schema");
    const Token opener = expect_open("schema " + schema_.name);

    std::set<std::string> top_names;
    bool seen_version = false;
    for (;;) {
      skip_newlines();
      const Token& t = peek();
      if (t.kind == Tok::rbrace) {
        advance();
        expect_eol("'}'");
        break;
      }
      if (t.kind == Tok::end) unclosed(opener, "schema " + schema_.name);
      if (is(t, "version")) {
        if (seen_version) duplicate(t, "version declared more than once");
        seen_version = true;
        parse_version();
      } else if (is(t, "dimension")) {
        parse_dimension(top_names);
      } else if (is(t, "fact")) {
        parse_fact(top_names);
      } else if (is(t, "group")) {
        parse_group(top_names);
      } else {
        fail(t.line, t.column,
             "syntax error: expected 'dimension', 'fact', 'group', 'version' or '}', found " + describe(t));
      }
    }
    skip_newlines();
    const Token& rest = peek();
    if (rest.kind != Tok::end) {
      fail(rest.line, rest.column, "syntax error: unexpected " + describe(rest) + " after the end of the schema");
    }
    return std::move(schema_);
  }

  std::vector<Diagnostic>& diagnostics() { return diags_; }
  const std::map<std::string, Pos>& positions() const { return positions_; }

 private:
  const Token& peek() const { return toks_[pos_]; }
  void advance() {
    if (toks_[pos_].kind != Tok::end) ++pos_;
  }
  static bool is(const Token& t, std::string_view kw) { return t.kind == Tok::word && t.text == kw; }

  void skip_newlines() {
    while (peek().kind == Tok::newline) advance();
  }

  void expect_eol(const std::string& after) {
    const Token& t = peek();
    if (t.kind == Tok::newline) {
      advance();
      return;
    }
    if (t.kind == Tok::end) return;
    fail(t.line, t.column, "syntax error: expected end of line after " + after + ", found " + describe(t));
  }

  Token expect_open(const std::string& what) {
    const Token t = peek();
    if (t.kind != Tok::lbrace) {
      fail(t.line, t.column, "syntax error: expected '{' to open " + what + ", found " + describe(t));
    }
    advance();
    expect_eol("'{'");
    return t;
  }

  [[noreturn]] void unclosed(const Token& opener, const std::string& what) {
    fail(opener.line, opener.column,
         "syntax error: unclosed block '" + what + "' opened here reaches end of input");
  }

  std::string expect_name(const std::string& what) {
    const Token& t = peek();
    if (t.kind != Tok::word || is_keyword(t.text)) {
      fail(t.line, t.column, "syntax error: expected " + what + " name, found " + describe(t));
    }
    last_ = t;
    std::string out = t.text;
    advance();
    return out;
  }

  void duplicate(const Token& at, const std::string& message) {
    diags_.push_back({Severity::error, at.line, at.column, "duplicate declaration: " + message});
  }

  void remember(const std::string& location, const Token& at) {
    positions_.emplace(location, Pos{at.line, at.column});
  }

  void claim_top_name(std::set<std::string>& names, const std::string& name, const std::string& kind) {
    if (!names.insert(name).second) duplicate(last_, kind + " '" + name + "' reuses a name already declared");
  }

  void parse_version() {
    advance();
    const Token& t = peek();
    if (t.kind != Tok::integer) fail(t.line, t.column, "syntax error: expected version number, found " + describe(t));
    auto v = parse_integer(t.text);
    if (!v || *v < 1) fail(t.line, t.column, "syntax error: version must be a positive integer");
    schema_.version = static_cast<std::uint64_t>(*v);
    advance();
    expect_eol("version number");
  }

  void parse_dimension(std::set<std::string>& top) {
    advance();
    model::Dimension dim;
    dim.name = expect_name("dimension");
    const std::string loc = "dimension:" + dim.name;
    remember(loc, last_);
    claim_top_name(top, dim.name, "dimension");
    const Token opener = expect_open("dimension " + dim.name);

    std::set<std::string> attrs;
    std::set<std::string> hiers;
    bool seen_key = false;
    for (;;) {
      skip_newlines();
      const Token t = peek();
      if (t.kind == Tok::rbrace) {
        advance();
        expect_eol("'}'");
        break;
      }
      if (t.kind == Tok::end) unclosed(opener, "dimension " + dim.name);
      if (is(t, "attribute")) {
        advance();
        model::Attribute attr;
        attr.name = expect_name("attribute");
        const Token name_tok = last_;
        attr.kind = expect_value_kind();
        if (is(peek(), "outrigger")) {
          attr.outrigger = true;
          advance();
        }
        expect_eol("attribute declaration");
        remember(loc + "/attribute:" + attr.name, name_tok);
        if (!attrs.insert(attr.name).second) {
          duplicate(name_tok, "attribute '" + attr.name + "' already declared in dimension '" + dim.name + "'");
        }
        dim.attributes.push_back(std::move(attr));
      } else if (is(t, "naturalkey")) {
        advance();
        if (seen_key) duplicate(t, "natural key declared more than once in dimension '" + dim.name + "'");
        seen_key = true;
        std::vector<std::string> parts;
        do {
          parts.push_back(expect_name("natural key attribute"));
          remember(loc + "/naturalkey:" + parts.back(), last_);
        } while (peek().kind == Tok::word && !is_keyword(peek().text));
        expect_eol("natural key");
        dim.natural_key = std::move(parts);
      } else if (is(t, "hierarchy")) {
        advance();
        dim.hierarchies.push_back(parse_hierarchy(loc, hiers));
      } else {
        fail(t.line, t.column,
             "syntax error: expected 'attribute', 'naturalkey', 'hierarchy' or '}' in dimension '" + dim.name +
                 "', found " + describe(t));
      }
    }
    schema_.dimensions.push_back(std::move(dim));
  }

  ValueKind expect_value_kind() {
    const Token& t = peek();
    if (t.kind == Tok::word && !is_keyword(t.text)) {
      if (auto k = value_kind_from(t.text)) {
        advance();
        return *k;
      }
    }
    fail(t.line, t.column,
         "syntax error: expected value kind (text, integer, decimal, date, timestamp), found " + describe(t));
  }

  model::Hierarchy parse_hierarchy(const std::string& dim_loc, std::set<std::string>& hiers) {
    model::Hierarchy hier;
    hier.name = expect_name("hierarchy");
    const std::string loc = dim_loc + "/hierarchy:" + hier.name;
    remember(loc, last_);
    if (!hiers.insert(hier.name).second) duplicate(last_, "hierarchy '" + hier.name + "' already declared");
    const Token opener = expect_open("hierarchy " + hier.name);
    std::set<std::string> levels;
    for (;;) {
      skip_newlines();
      const Token t = peek();
      if (t.kind == Tok::rbrace) {
        advance();
        expect_eol("'}'");
        break;
      }
      if (t.kind == Tok::end) unclosed(opener, "hierarchy " + hier.name);
      if (!is(t, "level")) {
        fail(t.line, t.column,
             "syntax error: expected 'level' or '}' in hierarchy '" + hier.name + "', found " + describe(t));
      }
      advance();
      model::Level level;
      level.name = expect_name("level");
      const std::string lloc = loc + "/level:" + level.name;
      remember(lloc, last_);
      if (!levels.insert(level.name).second) {
        duplicate(last_, "level '" + level.name + "' already declared in hierarchy '" + hier.name + "'");
      }
      do {
        level.attributes.push_back(expect_name("level attribute"));
        remember(lloc + "/attribute:" + level.attributes.back(), last_);
      } while (peek().kind == Tok::word && !is_keyword(peek().text));
      expect_eol("level declaration");
      hier.levels.push_back(std::move(level));
    }
    return hier;
  }

  void parse_fact(std::set<std::string>& top) {
    advance();
    model::FactTable fact;
    fact.name = expect_name("fact table");
    const std::string loc = "fact:" + fact.name;
    remember(loc, last_);
    claim_top_name(top, fact.name, "fact table");
    const Token opener = expect_open("fact " + fact.name);
    std::set<std::string> grain_dims;
    std::set<std::string> measures;
    for (;;) {
      skip_newlines();
      const Token t = peek();
      if (t.kind == Tok::rbrace) {
        advance();
        expect_eol("'}'");
        break;
      }
      if (t.kind == Tok::end) unclosed(opener, "fact " + fact.name);
      if (is(t, "grain")) {
        advance();
        model::GrainEntry g;
        g.dimension = expect_name("grain dimension");
        const Token dim_tok = last_;
        g.level = g.dimension;
        if (peek().kind == Tok::word && !is_keyword(peek().text)) g.level = expect_name("grain level");
        expect_eol("grain declaration");
        remember(loc + "/grain:" + g.dimension, dim_tok);
        if (!grain_dims.insert(g.dimension).second) {
          duplicate(dim_tok, "dimension '" + g.dimension + "' already in the grain of '" + fact.name + "'");
        }
        fact.grain.push_back(std::move(g));
      } else if (is(t, "measure")) {
        advance();
        model::Measure m;
        m.name = expect_name("measure");
        const Token name_tok = last_;
        m.kind = expect_measure_kind();
        m.aggregability = model::default_aggregability(m.kind);
        if (peek().kind == Tok::word && !is_keyword(peek().text)) {
          const Token& a = peek();
          auto agg = model::aggregability_from(a.text);
          if (!agg) {
            fail(a.line, a.column,
                 "syntax error: expected aggregability (additive, semi-additive, non-additive), found " +
                     describe(a));
          }
          m.aggregability = *agg;
          advance();
        }
        expect_eol("measure declaration");
        remember(loc + "/measure:" + m.name, name_tok);
        if (!measures.insert(m.name).second) {
          duplicate(name_tok, "measure '" + m.name + "' already declared in '" + fact.name + "'");
        }
        fact.measures.push_back(std::move(m));
      } else {
        fail(t.line, t.column,
             "syntax error: expected 'grain', 'measure' or '}' in fact '" + fact.name + "', found " +
                 describe(t));
      }
    }
    schema_.fact_tables.push_back(std::move(fact));
  }

  model::MeasureKind expect_measure_kind() {
    const Token& t = peek();
    if (t.kind == Tok::word && !is_keyword(t.text)) {
      if (auto k = model::measure_kind_from(t.text)) {
        advance();
        return *k;
      }
    }
    fail(t.line, t.column,
         "syntax error: expected measure kind (decimal, integer, text, document-ref), found " + describe(t));
  }

  void parse_group(std::set<std::string>& top) {
    advance();
    model::ComplexFactGroup group;
    group.name = expect_name("group");
    const std::string loc = "group:" + group.name;
    remember(loc, last_);
    claim_top_name(top, group.name, "group");
    const Token opener = expect_open("group " + group.name);
    bool seen_central = false;
    std::set<std::string> sats;
    for (;;) {
      skip_newlines();
      const Token t = peek();
      if (t.kind == Tok::rbrace) {
        advance();
        expect_eol("'}'");
        break;
      }
      if (t.kind == Tok::end) unclosed(opener, "group " + group.name);
      if (is(t, "central")) {
        advance();
        group.central_fact = expect_name("central fact");
        if (seen_central) duplicate(last_, "central fact declared more than once in '" + group.name + "'");
        seen_central = true;
        remember(loc + "/central:" + group.central_fact, last_);
        remember(loc + "/member:" + group.central_fact, last_);
        expect_eol("central declaration");
      } else if (is(t, "satellite")) {
        advance();
        group.satellite_facts.push_back(expect_name("satellite fact"));
        const auto& s = group.satellite_facts.back();
        if (!sats.insert(s).second) duplicate(last_, "satellite '" + s + "' already listed");
        remember(loc + "/satellite:" + s, last_);
        remember(loc + "/member:" + s, last_);
        expect_eol("satellite declaration");
      } else if (is(t, "documents")) {
        advance();
        const Token& c = peek();
        if (!(c.kind == Tok::word && c.text == "many-to-many")) {
          fail(c.line, c.column, "syntax error: expected 'many-to-many' after 'documents', found " + describe(c));
        }
        if (group.document_bridge) duplicate(c, "document bridge declared more than once");
        group.document_bridge = true;
        advance();
        expect_eol("documents declaration");
      } else {
        fail(t.line, t.column,
             "syntax error: expected 'central', 'satellite', 'documents' or '}' in group '" + group.name +
                 "', found " + describe(t));
      }
    }
    if (!seen_central) {
      diags_.push_back({Severity::error, opener.line, opener.column,
                        "invalid schema: group '" + group.name + "' declares no central fact"});
    }
    schema_.complex_groups.push_back(std::move(group));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Token last_;
  model::Schema schema_;
  std::vector<Diagnostic> diags_;
  std::map<std::string, Pos> positions_;
};

Pos locate(const std::map<std::string, Pos>& positions, std::string location) {
  for (;;) {
    auto it = positions.find(location);
    if (it != positions.end()) return it->second;
    const auto slash = location.rfind('/');
    if (slash == std::string::npos) break;
    location.resize(slash);
  }
  auto it = positions.find("schema");
  return it != positions.end() ? it->second : Pos{1, 1};
}

bool is_dangling_rule(const std::string& rule) {
  return rule == "fact.dangling-dimension" || rule == "group.dangling-fact" || rule == "level.unknown-attribute" ||
         rule == "dimension.natural-key-unknown-attribute" || rule == "fact.unknown-level";
}

bool is_duplicate_rule(const std::string& rule) {
  return rule == "name.duplicate" || rule.find("duplicate") != std::string::npos ||
         rule == "dimension.natural-key-repeated";
}

template <typename T>
std::vector<const T*> by_name(const std::vector<T>& items) {
  std::vector<const T*> out;
  for (const auto& i : items) out.push_back(&i);
  std::stable_sort(out.begin(), out.end(), [](const T* a, const T* b) { return a->name < b->name; });
  return out;
}

}  // namespace

std::string Diagnostic::format(const std::string& origin) const {
  return origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message;
}

ParseResult parse_schema(const SourceText& src) {
  ParseResult result;
  try {
    Parser parser(lex(src.text));
    model::Schema schema = parser.run();
    auto diags = std::move(parser.diagnostics());
    if (!schema.name.empty()) {
      const auto report = model::validate_schema(schema);
      for (const auto& v : report.violations) {
        if (is_duplicate_rule(v.rule)) continue;
        if (v.rule == "group.dangling-fact" && v.location.find("/central:") != std::string::npos &&
            v.location.size() == v.location.find("/central:") + 9) {
          continue;  // missing central statement, already reported
        }
        const Pos p = locate(parser.positions(), v.location);
        const std::string prefix = is_dangling_rule(v.rule) ? "dangling reference: " : "invalid schema: ";
        diags.push_back({Severity::error, p.line, p.column, prefix + v.message});
      }
    }
    std::stable_sort(diags.begin(), diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
      return a.line != b.line ? a.line < b.line : a.column < b.column;
    });
    result.diagnostics = std::move(diags);
    const bool has_error = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                                       [](const Diagnostic& d) { return d.severity == Severity::error; });
    if (!has_error) result.schema = std::move(schema);
  } catch (Failure& f) {
    result.diagnostics.push_back(std::move(f.diag));
  }
  return result;
}

ParseResult parse_schema_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::io_error, "cannot read schema file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema(SourceText{buf.str(), path});
}

std::string serialize_schema(const model::Schema& schema) {
  auto report = model::validate_schema(schema);
  if (!report.ok()) throw model::SchemaInvalid(std::move(report));

  std::ostringstream out;
  out << "schema " << schema.name << " {\n";
  out << "  version " << schema.version << "\n";
  for (const auto* dim : by_name(schema.dimensions)) {
    out << "\n  dimension " << dim->name << " {\n";
    for (const auto& a : dim->attributes) {
      out << "    attribute " << a.name << ' ' << to_string(a.kind);
      if (a.outrigger) out << " outrigger";
      out << '\n';
    }
    out << "    naturalkey";
    for (const auto& k : dim->natural_key) out << ' ' << k;
    out << '\n';
    for (const auto& h : dim->hierarchies) {
      out << "    hierarchy " << h.name << " {\n";
      for (const auto& l : h.levels) {
        out << "      level " << l.name;
        for (const auto& a : l.attributes) out << ' ' << a;
        out << '\n';
      }
      out << "    }\n";
    }
    out << "  }\n";
  }
  for (const auto* fact : by_name(schema.fact_tables)) {
    out << "\n  fact " << fact->name << " {\n";
    for (const auto& g : fact->grain) {
      out << "    grain " << g.dimension;
      if (g.level != g.dimension) out << ' ' << g.level;
      out << '\n';
    }
    for (const auto& m : fact->measures) {
      out << "    measure " << m.name << ' ' << model::to_string(m.kind) << ' '
          << model::to_string(m.aggregability) << '\n';
    }
    out << "  }\n";
  }
  for (const auto* group : by_name(schema.complex_groups)) {
    out << "\n  group " << group->name << " {\n";
    out << "    central " << group->central_fact << '\n';
    for (const auto& s : group->satellite_facts) out << "    satellite " << s << '\n';
    if (group->document_bridge) out << "    documents many-to-many\n";
    out << "  }\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace dwbus::dsl
