#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dwbus/error.hpp"
#include "dwbus/value.hpp"

// Dimensional model of the warehouse: conformed dimensions, their
// hierarchies, fact tables declared at a grain, and complex-fact groups.
namespace dwbus::model {

struct Attribute {
  std::string name;
  ValueKind kind = ValueKind::text;
  // Attribute lives in a normalised outrigger table (snowflaked).
  bool outrigger = false;

  bool operator==(const Attribute&) const = default;
};

struct Level {
  std::string name;
  std::vector<std::string> attributes;

  bool operator==(const Level&) const = default;
};

// Levels are ordered finest first.
struct Hierarchy {
  std::string name;
  std::vector<Level> levels;

  bool operator==(const Hierarchy&) const = default;
};

struct Dimension {
  std::string name;
  std::vector<std::string> natural_key;
  std::vector<Attribute> attributes;
  std::vector<Hierarchy> hierarchies;

  const Attribute* attribute(std::string_view attr) const;
  std::optional<std::size_t> attribute_index(std::string_view attr) const;
  const Hierarchy* hierarchy(std::string_view hier) const;

  bool operator==(const Dimension&) const = default;
};

// Every dimension has an implicit finest level, named after the dimension
// itself, which binds the natural key. A fact recorded at this level sees
// the dimension as flat.
Level member_level(const Dimension& dim);

enum class MeasureKind { decimal, integer, text, document_ref };
enum class Aggregability { additive, semi_additive, non_additive };

std::string_view to_string(MeasureKind kind);
std::string_view to_string(Aggregability agg);
std::optional<MeasureKind> measure_kind_from(std::string_view name);
std::optional<Aggregability> aggregability_from(std::string_view name);

// decimal/integer default to additive, text/document-ref to non-additive.
Aggregability default_aggregability(MeasureKind kind);

struct Measure {
  std::string name;
  MeasureKind kind = MeasureKind::decimal;
  Aggregability aggregability = Aggregability::additive;

  bool operator==(const Measure&) const = default;
};

struct GrainEntry {
  std::string dimension;
  std::string level;

  bool operator==(const GrainEntry&) const = default;
};

struct FactTable {
  std::string name;
  std::vector<GrainEntry> grain;
  std::vector<Measure> measures;

  const GrainEntry* grain_of(std::string_view dimension) const;
  std::optional<std::size_t> grain_index(std::string_view dimension) const;
  const Measure* measure(std::string_view name) const;
  std::optional<std::size_t> measure_index(std::string_view name) const;

  bool operator==(const FactTable&) const = default;
};

struct ComplexFactGroup {
  std::string name;
  std::string central_fact;
  std::vector<std::string> satellite_facts;
  // Many-to-many bridge from central fact rows to stored documents.
  bool document_bridge = false;

  bool operator==(const ComplexFactGroup&) const = default;
};

struct Schema {
  std::string name;
  std::vector<Dimension> dimensions;
  std::vector<FactTable> fact_tables;
  std::vector<ComplexFactGroup> complex_groups;
  std::uint64_t version = 1;

  const Dimension* dimension(std::string_view dim) const;
  const FactTable* fact_table(std::string_view fact) const;
  const ComplexFactGroup* group(std::string_view group) const;

  // Structural equality. Top-level declaration order is not significant;
  // order inside a declaration is.
  friend bool operator==(const Schema& a, const Schema& b);
};

// Lower-case words joined by hyphens: [a-z][a-z0-9]*(-[a-z0-9]+)*
bool is_identifier(std::string_view text);

struct Violation {
  std::string location;  // e.g. "fact:biological/grain:patint"
  std::string rule;      // e.g. "fact.dangling-dimension"
  std::string message;

  bool operator==(const Violation&) const = default;
};

// How the fact tables compose: none, one, several sharing nothing, or
// several sharing at least one dimension.
enum class Composition { empty, single, disjoint, constellation };
std::string_view to_string(Composition c);

struct ValidationReport {
  std::vector<Violation> violations;  // ordered by location, then rule
  Composition composition = Composition::empty;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_schema(const Schema& schema);

// Thrown by operations that require a valid schema.
class SchemaInvalid : public Error {
 public:
  explicit SchemaInvalid(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

// Dimensions referenced by at least two fact tables: the warehouse bus.
std::set<std::string> conformed_dimensions(const Schema& schema);

enum class Classification { star, snowflake };
std::string_view to_string(Classification c);

Classification classify_fact_table(const Schema& schema, std::string_view fact);

const std::vector<Level>& hierarchy_path(const Dimension& dim, std::string_view hierarchy);

// Levels a fact can be navigated through on one dimension, finest first,
// starting at the fact's grain level. A grain on the member level yields a
// single-level path; otherwise the path is the tail of the first hierarchy
// containing the grain level.
std::vector<Level> navigation_path(const Schema& schema, const FactTable& fact,
                                   std::string_view dimension);

// Returns a new schema version containing `fact` and any new private
// dimensions it needs. Existing declarations are untouched.
Schema add_fact_table(const Schema& schema, FactTable fact, std::vector<Dimension> new_dimensions = {});

}  // namespace dwbus::model
