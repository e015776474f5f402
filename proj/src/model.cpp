#include "dwbus/model.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace dwbus::model {

namespace {

template <typename T>
const T* find_named(const std::vector<T>& items, std::string_view name) {
  for (const auto& item : items) {
    if (item.name == name) return &item;
  }
  return nullptr;
}

template <typename T>
std::vector<T> sorted_by_name(std::vector<T> items) {
  std::stable_sort(items.begin(), items.end(),
                   [](const T& a, const T& b) { return a.name < b.name; });
  return items;
}

class Checker {
 public:
  void add(std::string location, std::string rule, std::string message) {
    report_.violations.push_back({std::move(location), std::move(rule), std::move(message)});
  }

  void identifier(const std::string& location, std::string_view what, const std::string& name) {
    if (!is_identifier(name)) {
      add(location, "name.invalid-identifier",
          std::string(what) + " name '" + name + "' is not a lower-case hyphenated identifier");
    }
  }

  ValidationReport finish(Composition composition) {
    std::stable_sort(report_.violations.begin(), report_.violations.end(),
                     [](const Violation& a, const Violation& b) {
                       if (a.location != b.location) return a.location < b.location;
                       if (a.rule != b.rule) return a.rule < b.rule;
                       return a.message < b.message;
                     });
    report_.composition = composition;
    return std::move(report_);
  }

 private:
  ValidationReport report_;
};

void check_dimension(Checker& c, const Dimension& dim) {
  const std::string loc = "dimension:" + dim.name;
  c.identifier(loc, "dimension", dim.name);

  std::set<std::string> seen;
  for (const auto& attr : dim.attributes) {
    const std::string aloc = loc + "/attribute:" + attr.name;
    c.identifier(aloc, "attribute", attr.name);
    if (!seen.insert(attr.name).second) {
      c.add(aloc, "dimension.duplicate-attribute",
            "attribute '" + attr.name + "' declared more than once in dimension '" + dim.name + "'");
    }
  }

  if (dim.natural_key.empty()) {
    c.add(loc, "dimension.empty-natural-key", "dimension '" + dim.name + "' declares no natural key");
  }
  std::set<std::string> key_seen;
  for (const auto& key : dim.natural_key) {
    const std::string kloc = loc + "/naturalkey:" + key;
    if (dim.attribute(key) == nullptr) {
      c.add(kloc, "dimension.natural-key-unknown-attribute",
            "natural key part '" + key + "' is not an attribute of dimension '" + dim.name + "'");
    }
    if (!key_seen.insert(key).second) {
      c.add(kloc, "dimension.natural-key-repeated", "natural key part '" + key + "' is repeated");
    }
  }

  std::set<std::string> hier_seen;
  for (const auto& hier : dim.hierarchies) {
    const std::string hloc = loc + "/hierarchy:" + hier.name;
    c.identifier(hloc, "hierarchy", hier.name);
    if (!hier_seen.insert(hier.name).second) {
      c.add(hloc, "dimension.duplicate-hierarchy",
            "hierarchy '" + hier.name + "' declared more than once in dimension '" + dim.name + "'");
    }
    if (hier.levels.size() < 2) {
      c.add(hloc, "hierarchy.too-few-levels",
            "hierarchy '" + hier.name + "' needs at least two levels, has " +
                std::to_string(hier.levels.size()));
    }
    std::set<std::string> level_seen;
    for (const auto& level : hier.levels) {
      const std::string lloc = hloc + "/level:" + level.name;
      c.identifier(lloc, "level", level.name);
      if (!level_seen.insert(level.name).second) {
        c.add(lloc, "hierarchy.duplicate-level",
              "level '" + level.name + "' appears more than once in hierarchy '" + hier.name + "'");
      }
      if (level.name == dim.name) {
        c.add(lloc, "level.reserved-name",
              "level name '" + level.name + "' is reserved for the member level of its dimension");
      }
      if (level.attributes.empty()) {
        c.add(lloc, "level.no-attributes", "level '" + level.name + "' binds no attribute");
      }
      for (const auto& attr : level.attributes) {
        if (dim.attribute(attr) == nullptr) {
          c.add(lloc + "/attribute:" + attr, "level.unknown-attribute",
                "level '" + level.name + "' binds unknown attribute '" + attr + "'");
        }
      }
    }
  }
}

bool level_resolves(const Dimension& dim, std::string_view level) {
  if (level == dim.name) return true;
  for (const auto& hier : dim.hierarchies) {
    if (find_named(hier.levels, level) != nullptr) return true;
  }
  return false;
}

void check_fact(Checker& c, const Schema& schema, const FactTable& fact) {
  const std::string loc = "fact:" + fact.name;
  c.identifier(loc, "fact table", fact.name);

  if (fact.grain.empty()) {
    c.add(loc, "fact.no-grain", "fact table '" + fact.name + "' declares no grain");
  }
  std::set<std::string> dims_seen;
  for (const auto& g : fact.grain) {
    const std::string gloc = loc + "/grain:" + g.dimension;
    if (!dims_seen.insert(g.dimension).second) {
      c.add(gloc, "fact.duplicate-grain-dimension",
            "dimension '" + g.dimension + "' appears more than once in the grain of '" + fact.name + "'");
    }
    const Dimension* dim = schema.dimension(g.dimension);
    if (dim == nullptr) {
      c.add(gloc, "fact.dangling-dimension",
            "fact table '" + fact.name + "' references undeclared dimension '" + g.dimension + "'");
      continue;
    }
    if (!level_resolves(*dim, g.level)) {
      c.add(gloc, "fact.unknown-level",
            "level '" + g.level + "' is not a level of dimension '" + g.dimension + "'");
    }
  }

  if (fact.measures.empty()) {
    c.add(loc, "fact.no-measures", "fact table '" + fact.name + "' declares no measure");
  }
  std::set<std::string> measures_seen;
  for (const auto& m : fact.measures) {
    const std::string mloc = loc + "/measure:" + m.name;
    c.identifier(mloc, "measure", m.name);
    if (!measures_seen.insert(m.name).second) {
      c.add(mloc, "fact.duplicate-measure",
            "measure '" + m.name + "' declared more than once in '" + fact.name + "'");
    }
    const bool numeric = m.kind == MeasureKind::decimal || m.kind == MeasureKind::integer;
    if (!numeric && m.aggregability != Aggregability::non_additive) {
      c.add(mloc, "fact.non-summable-measure",
            "measure '" + m.name + "' of kind " + std::string(to_string(m.kind)) +
                " must be non-additive");
    }
  }
}

std::map<std::string, int> dimension_usage(const Schema& schema) {
  std::map<std::string, int> usage;
  for (const auto& fact : schema.fact_tables) {
    std::set<std::string> dims;
    for (const auto& g : fact.grain) dims.insert(g.dimension);
    for (const auto& d : dims) ++usage[d];
  }
  return usage;
}

void check_group(Checker& c, const Schema& schema, const ComplexFactGroup& group,
                 const std::map<std::string, int>& usage) {
  const std::string loc = "group:" + group.name;
  c.identifier(loc, "group", group.name);

  const FactTable* central = schema.fact_table(group.central_fact);
  if (central == nullptr) {
    c.add(loc + "/central:" + group.central_fact, "group.dangling-fact",
          "group '" + group.name + "' names undeclared central fact '" + group.central_fact + "'");
  }
  if (group.satellite_facts.empty()) {
    c.add(loc, "group.no-satellites", "group '" + group.name + "' declares no satellite fact");
  }
  std::set<std::string> seen;
  std::vector<const FactTable*> members;
  if (central != nullptr) members.push_back(central);
  for (const auto& sat : group.satellite_facts) {
    const std::string sloc = loc + "/satellite:" + sat;
    if (sat == group.central_fact) {
      c.add(sloc, "group.central-is-satellite",
            "fact '" + sat + "' cannot be both central and satellite in group '" + group.name + "'");
    }
    if (!seen.insert(sat).second) {
      c.add(sloc, "group.duplicate-satellite", "satellite '" + sat + "' listed more than once");
    }
    const FactTable* f = schema.fact_table(sat);
    if (f == nullptr) {
      c.add(sloc, "group.dangling-fact",
            "group '" + group.name + "' names undeclared satellite fact '" + sat + "'");
    } else if (sat != group.central_fact) {
      members.push_back(f);
    }
  }
  if (central == nullptr) return;

  // Each member must be linked to every bus dimension the report is linked to.
  std::vector<std::string> shared;
  for (const auto& g : central->grain) {
    auto it = usage.find(g.dimension);
    if (it != usage.end() && it->second >= 2) shared.push_back(g.dimension);
  }
  for (const FactTable* member : members) {
    for (const auto& dim : shared) {
      if (member->grain_of(dim) == nullptr) {
        c.add(loc + "/member:" + member->name + "/dimension:" + dim, "group.missing-shared-dimension",
              "member fact '" + member->name + "' is not linked to shared dimension '" + dim + "'");
      }
    }
  }
}

Composition composition_of(const Schema& schema, const std::map<std::string, int>& usage) {
  if (schema.fact_tables.empty()) return Composition::empty;
  if (schema.fact_tables.size() == 1) return Composition::single;
  for (const auto& [dim, count] : usage) {
    if (count >= 2) return Composition::constellation;
  }
  return Composition::disjoint;
}

}  // namespace

const Attribute* Dimension::attribute(std::string_view attr) const { return find_named(attributes, attr); }

std::optional<std::size_t> Dimension::attribute_index(std::string_view attr) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == attr) return i;
  }
  return std::nullopt;
}

const Hierarchy* Dimension::hierarchy(std::string_view hier) const { return find_named(hierarchies, hier); }

Level member_level(const Dimension& dim) { return Level{dim.name, dim.natural_key}; }

const GrainEntry* FactTable::grain_of(std::string_view dimension) const {
  for (const auto& g : grain) {
    if (g.dimension == dimension) return &g;
  }
  return nullptr;
}

std::optional<std::size_t> FactTable::grain_index(std::string_view dimension) const {
  for (std::size_t i = 0; i < grain.size(); ++i) {
    if (grain[i].dimension == dimension) return i;
  }
  return std::nullopt;
}

const Measure* FactTable::measure(std::string_view name) const { return find_named(measures, name); }

std::optional<std::size_t> FactTable::measure_index(std::string_view name) const {
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (measures[i].name == name) return i;
  }
  return std::nullopt;
}

const Dimension* Schema::dimension(std::string_view dim) const { return find_named(dimensions, dim); }
const FactTable* Schema::fact_table(std::string_view fact) const { return find_named(fact_tables, fact); }
const ComplexFactGroup* Schema::group(std::string_view g) const { return find_named(complex_groups, g); }

bool operator==(const Schema& a, const Schema& b) {
  return a.name == b.name && a.version == b.version &&
         sorted_by_name(a.dimensions) == sorted_by_name(b.dimensions) &&
         sorted_by_name(a.fact_tables) == sorted_by_name(b.fact_tables) &&
         sorted_by_name(a.complex_groups) == sorted_by_name(b.complex_groups);
}

std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::decimal: return "decimal";
    case MeasureKind::integer: return "integer";
    case MeasureKind::text: return "text";
    case MeasureKind::document_ref: return "document-ref";
  }
  return "decimal";
}

std::string_view to_string(Aggregability agg) {
  switch (agg) {
    case Aggregability::additive: return "additive";
    case Aggregability::semi_additive: return "semi-additive";
    case Aggregability::non_additive: return "non-additive";
  }
  return "additive";
}

std::optional<MeasureKind> measure_kind_from(std::string_view name) {
  if (name == "decimal") return MeasureKind::decimal;
  if (name == "integer") return MeasureKind::integer;
  if (name == "text") return MeasureKind::text;
  if (name == "document-ref") return MeasureKind::document_ref;
  return std::nullopt;
}

std::optional<Aggregability> aggregability_from(std::string_view name) {
  if (name == "additive") return Aggregability::additive;
  if (name == "semi-additive") return Aggregability::semi_additive;
  if (name == "non-additive") return Aggregability::non_additive;
  return std::nullopt;
}

Aggregability default_aggregability(MeasureKind kind) {
  return (kind == MeasureKind::decimal || kind == MeasureKind::integer) ? Aggregability::additive
                                                                        : Aggregability::non_additive;
}

bool is_identifier(std::string_view text) {
  if (text.empty() || text.front() < 'a' || text.front() > 'z') return false;
  bool after_hyphen = false;
  for (char ch : text) {
    if (ch == '-') {
      if (after_hyphen) return false;
      after_hyphen = true;
      continue;
    }
    if (!((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9'))) return false;
    after_hyphen = false;
  }
  return !after_hyphen;
}

std::string_view to_string(Composition c) {
  switch (c) {
    case Composition::empty: return "empty";
    case Composition::single: return "single";
    case Composition::disjoint: return "disjoint";
    case Composition::constellation: return "constellation";
  }
  return "empty";
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& v : violations) out << v.location << ": [" << v.rule << "] " << v.message << '\n';
  return out.str();
}

SchemaInvalid::SchemaInvalid(ValidationReport report)
    : Error(errc::invalid_schema, "schema is invalid:\n" + report.summary()), report_(std::move(report)) {}

ValidationReport validate_schema(const Schema& schema) {
  Checker c;
  c.identifier("schema", "schema", schema.name);
  if (schema.fact_tables.empty()) c.add("schema", "schema.no-fact-tables", "no fact tables");

  std::map<std::string, std::vector<std::string>> kinds_by_name;
  for (const auto& d : schema.dimensions) kinds_by_name[d.name].push_back("dimension");
  for (const auto& f : schema.fact_tables) kinds_by_name[f.name].push_back("fact");
  for (const auto& g : schema.complex_groups) kinds_by_name[g.name].push_back("group");
  for (const auto& [name, kinds] : kinds_by_name) {
    if (kinds.size() < 2) continue;
    // One violation per extra declaration, located at the later one.
    for (std::size_t i = 1; i < kinds.size(); ++i) {
      c.add(kinds[i] + ":" + name, "name.duplicate",
            "name '" + name + "' is declared more than once (also as " + kinds[0] + ")");
    }
  }

  for (const auto& d : schema.dimensions) check_dimension(c, d);
  for (const auto& f : schema.fact_tables) check_fact(c, schema, f);
  const auto usage = dimension_usage(schema);
  for (const auto& g : schema.complex_groups) check_group(c, schema, g, usage);
  return c.finish(composition_of(schema, usage));
}

std::set<std::string> conformed_dimensions(const Schema& schema) {
  auto report = validate_schema(schema);
  if (!report.ok()) throw SchemaInvalid(std::move(report));
  std::set<std::string> out;
  for (const auto& [dim, count] : dimension_usage(schema)) {
    if (count >= 2) out.insert(dim);
  }
  return out;
}

std::string_view to_string(Classification c) { return c == Classification::star ? "star" : "snowflake"; }

const std::vector<Level>& hierarchy_path(const Dimension& dim, std::string_view hierarchy) {
  const Hierarchy* h = dim.hierarchy(hierarchy);
  if (h == nullptr) {
    throw Error(errc::unknown_name,
                "dimension '" + dim.name + "' has no hierarchy '" + std::string(hierarchy) + "'");
  }
  return h->levels;
}

std::vector<Level> navigation_path(const Schema& schema, const FactTable& fact, std::string_view dimension) {
  const GrainEntry* g = fact.grain_of(dimension);
  if (g == nullptr) {
    throw Error(errc::unknown_name,
                "dimension '" + std::string(dimension) + "' is not in the grain of '" + fact.name + "'");
  }
  const Dimension* dim = schema.dimension(dimension);
  if (dim == nullptr) {
    throw Error(errc::unknown_name, "undeclared dimension '" + std::string(dimension) + "'");
  }
  if (g->level == dim->name) return {member_level(*dim)};
  for (const auto& hier : dim->hierarchies) {
    for (std::size_t i = 0; i < hier.levels.size(); ++i) {
      if (hier.levels[i].name == g->level) {
        return {hier.levels.begin() + static_cast<std::ptrdiff_t>(i), hier.levels.end()};
      }
    }
  }
  throw Error(errc::invalid_level,
              "level '" + g->level + "' is not a level of dimension '" + dim->name + "'");
}

Classification classify_fact_table(const Schema& schema, std::string_view fact) {
  const FactTable* f = schema.fact_table(fact);
  if (f == nullptr) throw Error(errc::unknown_name, "unknown fact table '" + std::string(fact) + "'");
  for (const auto& g : f->grain) {
    const Dimension* dim = schema.dimension(g.dimension);
    if (dim == nullptr) continue;
    const auto path = navigation_path(schema, *f, g.dimension);
    for (std::size_t i = 1; i < path.size(); ++i) {
      for (const auto& attr : path[i].attributes) {
        const Attribute* a = dim->attribute(attr);
        if (a != nullptr && a->outrigger) return Classification::snowflake;
      }
    }
  }
  return Classification::star;
}

Schema add_fact_table(const Schema& schema, FactTable fact, std::vector<Dimension> new_dimensions) {
  if (schema.fact_table(fact.name) != nullptr || schema.dimension(fact.name) != nullptr ||
      schema.group(fact.name) != nullptr) {
    throw Error(errc::invalid_schema, "name '" + fact.name + "' is already declared");
  }
  for (const auto& g : fact.grain) {
    const bool declared = schema.dimension(g.dimension) != nullptr ||
                          find_named(new_dimensions, g.dimension) != nullptr;
    if (!declared) {
      throw Error(errc::dangling_reference,
                  "fact table '" + fact.name + "' references undeclared dimension '" + g.dimension + "'");
    }
  }
  Schema next = schema;
  for (auto& d : new_dimensions) next.dimensions.push_back(std::move(d));
  next.fact_tables.push_back(std::move(fact));
  next.version = schema.version + 1;
  auto report = validate_schema(next);
  if (!report.ok()) throw SchemaInvalid(std::move(report));
  return next;
}

}  // namespace dwbus::model
