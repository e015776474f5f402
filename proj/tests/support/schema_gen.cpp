#include "schema_gen.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace testsupport {

using namespace dwbus::model;
using dwbus::ValueKind;

namespace {

const char* const kWords[] = {"alpha", "blood", "cell", "delta", "echo",  "femur", "gland", "heart", "iris",
                              "joint", "knee",  "lung", "mass",  "nerve", "organ", "pulse", "renal", "spine",
                              "tonus", "ulna",  "vein", "wrist", "x2",    "zone",  "a",     "b9"};

class Names {
 public:
  explicit Names(std::mt19937_64& rng) : rng_(rng) {}

  std::string fresh() {
    for (;;) {
      std::string s = kWords[rng_() % (sizeof(kWords) / sizeof(kWords[0]))];
      const int parts = static_cast<int>(rng_() % 3);
      for (int i = 0; i < parts; ++i) {
        s += '-';
        if (rng_() % 3 == 0) {
          s += std::to_string(rng_() % 100);
        } else {
          s += kWords[rng_() % (sizeof(kWords) / sizeof(kWords[0]))];
        }
      }
      if (used_.insert(s).second) return s;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

Dimension random_dimension(std::mt19937_64& rng, const std::string& name) {
  Dimension d;
  d.name = name;
  Names local(rng);
  static const ValueKind kinds[] = {ValueKind::text, ValueKind::integer, ValueKind::decimal, ValueKind::date,
                                    ValueKind::timestamp};
  const int n_attr = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < n_attr; ++i) {
    d.attributes.push_back({local.fresh(), kinds[rng() % 5], rng() % 4 == 0});
  }
  std::vector<std::string> names;
  for (const auto& a : d.attributes) names.push_back(a.name);
  std::shuffle(names.begin(), names.end(), rng);
  const std::size_t n_key = 1 + rng() % std::min<std::size_t>(3, names.size());
  d.natural_key.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(n_key));

  const int n_hier = static_cast<int>(rng() % 3);
  Names hier_names(rng);
  for (int h = 0; h < n_hier; ++h) {
    Hierarchy hier;
    hier.name = hier_names.fresh();
    Names level_names(rng);
    const int n_levels = 2 + static_cast<int>(rng() % 3);
    for (int l = 0; l < n_levels; ++l) {
      Level level;
      do {
        level.name = level_names.fresh();
      } while (level.name == d.name);
      const std::size_t n_bound = 1 + rng() % std::min<std::size_t>(2, d.attributes.size());
      for (std::size_t b = 0; b < n_bound; ++b) {
        level.attributes.push_back(d.attributes[rng() % d.attributes.size()].name);
      }
      hier.levels.push_back(std::move(level));
    }
    d.hierarchies.push_back(std::move(hier));
  }
  return d;
}

std::string random_level(std::mt19937_64& rng, const Dimension& d) {
  std::vector<std::string> levels = {d.name};
  for (const auto& h : d.hierarchies) {
    for (const auto& l : h.levels) levels.push_back(l.name);
  }
  return levels[rng() % levels.size()];
}

}  // namespace

Schema random_schema(std::mt19937_64& rng) {
  Schema s;
  Names top(rng);
  s.name = top.fresh();
  s.version = 1 + rng() % 1000;

  const int n_dims = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < n_dims; ++i) s.dimensions.push_back(random_dimension(rng, top.fresh()));

  const int n_facts = 1 + static_cast<int>(rng() % 4);
  for (int i = 0; i < n_facts; ++i) {
    FactTable f;
    f.name = top.fresh();
    std::vector<std::size_t> order(s.dimensions.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_grain = 1 + rng() % order.size();
    for (std::size_t k = 0; k < n_grain; ++k) {
      const auto& d = s.dimensions[order[k]];
      f.grain.push_back({d.name, random_level(rng, d)});
    }
    Names measure_names(rng);
    const int n_measures = 1 + static_cast<int>(rng() % 3);
    for (int m = 0; m < n_measures; ++m) {
      Measure ms;
      ms.name = measure_names.fresh();
      ms.kind = static_cast<MeasureKind>(rng() % 4);
      const bool numeric = ms.kind == MeasureKind::decimal || ms.kind == MeasureKind::integer;
      ms.aggregability = numeric ? static_cast<Aggregability>(rng() % 3) : Aggregability::non_additive;
      f.measures.push_back(ms);
    }
    s.fact_tables.push_back(std::move(f));
  }

  // Groups: a central fact and satellites whose grains cover every bus
  // dimension of the central fact.
  std::map<std::string, int> usage;
  for (const auto& f : s.fact_tables) {
    for (const auto& g : f.grain) ++usage[g.dimension];
  }
  const int n_groups = static_cast<int>(rng() % 3);
  for (int gi = 0; gi < n_groups && s.fact_tables.size() >= 2; ++gi) {
    const auto& central = s.fact_tables[rng() % s.fact_tables.size()];
    std::vector<std::string> shared;
    for (const auto& g : central.grain) {
      if (usage[g.dimension] >= 2) shared.push_back(g.dimension);
    }
    ComplexFactGroup group;
    group.central_fact = central.name;
    for (const auto& f : s.fact_tables) {
      if (f.name == central.name) continue;
      const bool covers = std::all_of(shared.begin(), shared.end(),
                                      [&](const std::string& d) { return f.grain_of(d) != nullptr; });
      if (covers && rng() % 3 != 0) group.satellite_facts.push_back(f.name);
    }
    if (group.satellite_facts.empty()) continue;
    group.name = top.fresh();
    group.document_bridge = rng() % 2 == 0;
    s.complex_groups.push_back(std::move(group));
  }
  return s;
}

std::vector<TokenPos> tokens_of(const std::string& text) {
  std::vector<TokenPos> out;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else {
      const std::size_t b = i;
      while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\n' && text[i] != '\r' &&
             text[i] != '#') {
        ++i;
      }
      out.push_back({line, b, i - b});
    }
  }
  return out;
}

std::string corrupt(const std::string& text, const TokenPos& tok, std::mt19937_64& rng) {
  static const char* const kJunk[] = {"$", "Zed", "a_b", "%", "{", "@level", "9-", "x.y"};
  const std::string original = text.substr(tok.begin, tok.length);
  std::string junk;
  do {
    junk = kJunk[rng() % (sizeof(kJunk) / sizeof(kJunk[0]))];
  } while (junk == original);
  std::string out = text;
  out.replace(tok.begin, tok.length, junk);
  return out;
}

}  // namespace testsupport
