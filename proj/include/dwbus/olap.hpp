#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dwbus/delimited.hpp"
#include "dwbus/mapping.hpp"
#include "dwbus/model.hpp"
#include "dwbus/store.hpp"

// Cube queries over one fact table, hierarchy navigation, attribute-value
// export and complex-fact assembly. Everything reads a single snapshot.
namespace dwbus::olap {

enum class Aggregate { sum, avg, min, max, count };
std::string_view to_string(Aggregate a);
std::optional<Aggregate> aggregate_from(std::string_view name);

enum class Comparison { eq, ne, lt, le, gt, ge, in };
std::string_view to_string(Comparison c);
std::optional<Comparison> comparison_from(std::string_view name);

// The values a member takes on a level's attributes, in level order.
using Tuple = std::vector<Value>;

struct LevelRef {
  std::string dimension;
  std::string level;

  bool operator==(const LevelRef&) const = default;
};

struct MeasureSpec {
  std::string measure;
  Aggregate aggregate = Aggregate::sum;

  bool operator==(const MeasureSpec&) const = default;
};

// For `in` the literal set may hold any number of tuples; every other
// comparison takes exactly one.
struct Filter {
  std::string dimension;
  std::string level;
  Comparison op = Comparison::eq;
  std::vector<Tuple> literals;

  bool operator==(const Filter&) const = default;
};

struct CubeQuery {
  std::string fact;
  std::vector<LevelRef> group_by;
  std::vector<MeasureSpec> measures;
  std::vector<Filter> filters;
  bool flag_normality = false;

  bool operator==(const CubeQuery&) const = default;
};

// Checks names, levels, aggregates and literal kinds. Text literals given
// for numeric or date attributes are parsed into the attribute's kind.
// Throws Error(unknown_name | invalid_level | invalid_literal |
// aggregate_mismatch | bad_request).
CubeQuery validate(const CubeQuery& query, const model::Schema& schema);

struct Axis {
  LevelRef level;
  std::vector<std::string> attributes;
  std::vector<Tuple> members;  // distinct values present in the cells, ascending
};

struct Cell {
  std::vector<Tuple> key;      // one tuple per group_by entry
  std::vector<Value> values;   // one aggregate per measure; null when no non-null input
  std::uint64_t count = 0;     // fact rows in the group
  std::vector<mapping::Flag> flags;  // per measure, when flagging was requested

  // Bookkeeping for flagging; not part of the wire form.
  std::optional<std::string> analysis;  // set when every row shares one analysis code
  bool mixed_analyses = false;
  std::optional<std::uint64_t> patient;  // set when every row shares one patient
};

struct CubeResult {
  CubeQuery query;
  std::uint64_t schema_version = 0;
  std::vector<Axis> axes;
  std::vector<Cell> cells;    // non-empty groups in ascending key order
  std::vector<Value> totals;  // per measure, over the matching rows
  std::uint64_t total_count = 0;
  bool flagged = false;
  std::vector<std::string> warnings;
};

CubeResult execute(const CubeQuery& query, const store::Snapshot& snap);

// Flags each cell against the reference intervals of its analysis code
// and, when the cell holds a single patient, that patient's context.
// Throws Error(mixed_analyses) when a cell spans several analysis codes and
// Error(aggregate_mismatch) unless every aggregate is avg, min or max.
void flag_cells(CubeResult& result, const store::Snapshot& snap);

// One step along the dimension's navigation path.
// Throws Error(not_in_group_by | already_coarsest | already_finest).
CubeQuery roll_up(const CubeQuery& query, const std::string& dimension, const model::Schema& schema);
CubeQuery drill_down(const CubeQuery& query, const std::string& dimension, const model::Schema& schema);

CubeQuery slice(const CubeQuery& query, const std::string& dimension, const std::string& level, Tuple value,
                const model::Schema& schema);
CubeQuery dice(const CubeQuery& query, const std::vector<Filter>& filters, const model::Schema& schema);

// Levels of `dimension` available to `fact`, finest first.
std::vector<model::Level> levels_of(const model::Schema& schema, const std::string& fact, const std::string& dimension);

// Distinct values of a level over all members of a dimension, ascending.
// `contains` keeps values whose rendering contains it (case-insensitive).
std::vector<Tuple> level_members(const store::Snapshot& snap, const std::string& dimension, const std::string& level,
                                 const std::string& contains = {});

// "patient.sex" selects a dimension attribute, a bare name a measure.
struct AttributeValueView {
  std::vector<std::string> header;
  std::vector<std::vector<Value>> rows;
};

// An empty selection exports every grain attribute and measure. Rows
// follow storage order.
AttributeValueView export_attribute_value(const store::Snapshot& snap, const std::string& fact,
                                          const std::vector<std::string>& select, const std::vector<Filter>& filters);

void write_view(std::ostream& out, const AttributeValueView& view, const delimited::Dialect& dialect = {});

struct SatelliteRow {
  std::string fact;
  store::FactRow row;
};

struct Assembly {
  std::string group;
  std::string central_fact;
  store::FactRow report;
  std::vector<std::string> shared_dimensions;
  std::vector<SatelliteRow> satellites;  // by fact name, then row id
  std::vector<store::Document> documents;  // by id
};

// Satellite rows match the report on every dimension shared by all the
// group's members. Throws Error(unknown_name) for an unknown group and
// Error(not_found) for an unknown report id.
Assembly assemble_complex_fact(const store::Snapshot& snap, const std::string& group, std::uint64_t report_id);

}  // namespace dwbus::olap
