#include "dwbus/olap.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace dwbus::olap {

namespace {

bool numeric(model::MeasureKind k) { return k == model::MeasureKind::decimal || k == model::MeasureKind::integer; }

int compare_tuples(const Tuple& a, const Tuple& b) {
  const auto n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = compare_values(a[i], b[i]); c != 0) return c;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

const model::FactTable& fact_of(const model::Schema& schema, const std::string& name) {
  const auto* f = schema.fact_table(name);
  if (f == nullptr) throw Error(errc::unknown_name, "unknown fact table '" + name + "'");
  return *f;
}

model::Level find_level(const model::Schema& schema, const model::FactTable& fact, const std::string& dimension,
                        const std::string& level) {
  if (schema.dimension(dimension) == nullptr) throw Error(errc::unknown_name, "unknown dimension '" + dimension + "'");
  if (fact.grain_of(dimension) == nullptr) {
    throw Error(errc::invalid_level, "dimension '" + dimension + "' is not in the grain of '" + fact.name + "'");
  }
  for (auto& l : model::navigation_path(schema, fact, dimension)) {
    if (l.name == level) return l;
  }
  throw Error(errc::invalid_level,
              "'" + level + "' is not a level of '" + dimension + "' reachable from '" + fact.name + "'");
}

Tuple coerce(const Tuple& literal, const model::Dimension& dim, const model::Level& level) {
  if (literal.size() != level.attributes.size()) {
    throw Error(errc::invalid_literal, "level '" + level.name + "' takes " + std::to_string(level.attributes.size()) +
                                           " value(s), got " + std::to_string(literal.size()));
  }
  Tuple out;
  for (std::size_t i = 0; i < literal.size(); ++i) {
    const auto kind = dim.attribute(level.attributes[i])->kind;
    const auto& v = literal[i];
    if (is_null(v)) throw Error(errc::invalid_literal, "null literal for '" + level.attributes[i] + "'");
    if (const auto* s = std::get_if<std::string>(&v); s && kind != ValueKind::text) {
      auto parsed = parse_value(*s, kind);
      if (!parsed || is_null(*parsed)) {
        throw Error(errc::invalid_literal, "'" + *s + "' is not a valid " + std::string(to_string(kind)) + " for '" +
                                               level.attributes[i] + "'");
      }
      out.push_back(*parsed);
      continue;
    }
    if (kind == ValueKind::integer) {
      if (const auto* d = std::get_if<double>(&v); d && std::nearbyint(*d) == *d) {
        out.push_back(static_cast<std::int64_t>(*d));
        continue;
      }
    }
    if (kind == ValueKind::decimal) {
      if (const auto* i = std::get_if<std::int64_t>(&v)) {
        out.push_back(static_cast<double>(*i));
        continue;
      }
    }
    if (!conforms(v, kind)) {
      throw Error(errc::invalid_literal, "literal '" + render(v) + "' does not fit " + std::string(to_string(kind)) +
                                             " attribute '" + level.attributes[i] + "'");
    }
    out.push_back(v);
  }
  return out;
}

Filter validate_filter(const Filter& f, const model::Schema& schema, const model::FactTable& fact) {
  const auto level = find_level(schema, fact, f.dimension, f.level);
  if (f.op != Comparison::in && f.literals.size() != 1) {
    throw Error(errc::invalid_literal, "comparison '" + std::string(to_string(f.op)) + "' takes exactly one literal");
  }
  Filter out = f;
  const auto& dim = *schema.dimension(f.dimension);
  for (auto& lit : out.literals) lit = coerce(lit, dim, level);
  return out;
}

// Resolves rows to level tuples through the member tables.
struct LevelAccess {
  std::size_t grain_index = 0;
  std::vector<std::size_t> attribute_indices;
  const store::DimensionTable* table = nullptr;

  LevelAccess(const store::Snapshot& snap, const model::FactTable& fact, const std::string& dimension,
              const model::Level& level) {
    const auto& schema = snap.schema();
    const auto& dim = *schema.dimension(dimension);
    grain_index = *fact.grain_index(dimension);
    for (const auto& a : level.attributes) attribute_indices.push_back(*dim.attribute_index(a));
    table = &snap.dimension(dimension);
  }

  Tuple of(const store::FactRow& row) const {
    const auto* m = table->member(row.keys[grain_index]);
    Tuple t;
    t.reserve(attribute_indices.size());
    for (auto i : attribute_indices) t.push_back(m->values[i]);
    return t;
  }
};

struct FilterEval {
  LevelAccess access;
  Filter filter;

  bool accepts(const store::FactRow& row) const {
    const auto t = access.of(row);
    if (filter.op == Comparison::in) {
      return std::any_of(filter.literals.begin(), filter.literals.end(),
                         [&](const Tuple& lit) { return compare_tuples(t, lit) == 0; });
    }
    const int c = compare_tuples(t, filter.literals.front());
    switch (filter.op) {
      case Comparison::eq: return c == 0;
      case Comparison::ne: return c != 0;
      case Comparison::lt: return c < 0;
      case Comparison::le: return c <= 0;
      case Comparison::gt: return c > 0;
      case Comparison::ge: return c >= 0;
      case Comparison::in: break;
    }
    return false;
  }
};

std::vector<FilterEval> compile_filters(const store::Snapshot& snap, const model::FactTable& fact,
                                        const std::vector<Filter>& filters) {
  std::vector<FilterEval> out;
  for (const auto& f : filters) {
    const auto valid = validate_filter(f, snap.schema(), fact);
    out.push_back({LevelAccess(snap, fact, f.dimension, find_level(snap.schema(), fact, f.dimension, f.level)), valid});
  }
  return out;
}

bool accepted(const std::vector<FilterEval>& filters, const store::FactRow& row) {
  return std::all_of(filters.begin(), filters.end(), [&](const FilterEval& f) { return f.accepts(row); });
}

struct Accumulator {
  std::uint64_t n = 0;  // non-null inputs
  double sum = 0.0;
  std::int64_t isum = 0;
  Value min;
  Value max;

  void add(const Value& v) {
    if (is_null(v)) return;
    ++n;
    if (const auto* i = std::get_if<std::int64_t>(&v)) {
      isum += *i;
      sum += static_cast<double>(*i);
    } else if (const auto* d = std::get_if<double>(&v)) {
      sum += *d;
    }
    if (is_null(min) || compare_values(v, min) < 0) min = v;
    if (is_null(max) || compare_values(v, max) > 0) max = v;
  }

  Value result(Aggregate agg, model::MeasureKind kind, std::uint64_t rows) const {
    switch (agg) {
      case Aggregate::count: return static_cast<std::int64_t>(rows);
      case Aggregate::sum:
        if (n == 0) return Value{};
        if (kind == model::MeasureKind::integer) return isum;
        return sum;
      case Aggregate::avg:
        if (n == 0) return Value{};
        return sum / static_cast<double>(n);
      case Aggregate::min: return min;
      case Aggregate::max: return max;
    }
    return Value{};
  }
};

struct Group {
  std::vector<Tuple> key;
  std::uint64_t rows = 0;
  std::vector<Accumulator> acc;
  std::optional<std::uint64_t> analysis_key;
  bool mixed_analyses = false;
  std::optional<std::uint64_t> patient_key;
  bool mixed_patients = false;
};

CubeQuery checked(const CubeQuery& query, const model::Schema& schema) { return validate(query, schema); }

void require_group_by(const CubeQuery& q, const std::string& dimension, std::size_t& index) {
  for (std::size_t i = 0; i < q.group_by.size(); ++i) {
    if (q.group_by[i].dimension == dimension) {
      index = i;
      return;
    }
  }
  throw Error(errc::not_in_group_by, "dimension '" + dimension + "' is not grouped");
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string_view to_string(Aggregate a) {
  switch (a) {
    case Aggregate::sum: return "sum";
    case Aggregate::avg: return "avg";
    case Aggregate::min: return "min";
    case Aggregate::max: return "max";
    case Aggregate::count: return "count";
  }
  return "sum";
}

std::optional<Aggregate> aggregate_from(std::string_view name) {
  for (auto a : {Aggregate::sum, Aggregate::avg, Aggregate::min, Aggregate::max, Aggregate::count}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

std::string_view to_string(Comparison c) {
  switch (c) {
    case Comparison::eq: return "=";
    case Comparison::ne: return "!=";
    case Comparison::lt: return "<";
    case Comparison::le: return "<=";
    case Comparison::gt: return ">";
    case Comparison::ge: return ">=";
    case Comparison::in: return "in";
  }
  return "=";
}

std::optional<Comparison> comparison_from(std::string_view name) {
  for (auto c : {Comparison::eq, Comparison::ne, Comparison::lt, Comparison::le, Comparison::gt, Comparison::ge,
                 Comparison::in}) {
    if (to_string(c) == name) return c;
  }
  if (name == "==") return Comparison::eq;
  if (name == "<>") return Comparison::ne;
  return std::nullopt;
}

CubeQuery validate(const CubeQuery& query, const model::Schema& schema) {
  const auto& fact = fact_of(schema, query.fact);
  CubeQuery out = query;
  for (std::size_t i = 0; i < query.group_by.size(); ++i) {
    const auto& g = query.group_by[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (query.group_by[j].dimension == g.dimension) {
        throw Error(errc::bad_request, "dimension '" + g.dimension + "' is grouped twice");
      }
    }
    find_level(schema, fact, g.dimension, g.level);
  }
  for (const auto& m : query.measures) {
    const auto* decl = fact.measure(m.measure);
    if (decl == nullptr) throw Error(errc::unknown_name, "fact '" + fact.name + "' has no measure '" + m.measure + "'");
    const bool summing = m.aggregate == Aggregate::sum || m.aggregate == Aggregate::avg;
    if (summing && (!numeric(decl->kind) || decl->aggregability == model::Aggregability::non_additive)) {
      throw Error(errc::aggregate_mismatch, "cannot " + std::string(to_string(m.aggregate)) + " " +
                                                std::string(model::to_string(decl->aggregability)) + " " +
                                                std::string(model::to_string(decl->kind)) + " measure '" +
                                                m.measure + "'");
    }
    if ((m.aggregate == Aggregate::min || m.aggregate == Aggregate::max) && !numeric(decl->kind)) {
      throw Error(errc::aggregate_mismatch, "cannot take " + std::string(to_string(m.aggregate)) + " of " +
                                                std::string(model::to_string(decl->kind)) + " measure '" +
                                                m.measure + "'");
    }
    if (query.flag_normality && m.aggregate != Aggregate::avg && m.aggregate != Aggregate::min &&
        m.aggregate != Aggregate::max) {
      throw Error(errc::aggregate_mismatch, "normality flags need avg, min or max, not " +
                                                std::string(to_string(m.aggregate)));
    }
  }
  for (auto& f : out.filters) f = validate_filter(f, schema, fact);
  return out;
}

CubeResult execute(const CubeQuery& query, const store::Snapshot& snap) {
  const auto& schema = snap.schema();
  const CubeQuery q = checked(query, schema);
  const auto& fact = *schema.fact_table(q.fact);

  std::vector<LevelAccess> groupers;
  for (const auto& g : q.group_by) {
    groupers.emplace_back(snap, fact, g.dimension, find_level(schema, fact, g.dimension, g.level));
  }
  const auto filters = compile_filters(snap, fact, q.filters);
  std::vector<std::size_t> measure_idx;
  std::vector<model::MeasureKind> measure_kind;
  for (const auto& m : q.measures) {
    measure_idx.push_back(*fact.measure_index(m.measure));
    measure_kind.push_back(fact.measures[measure_idx.back()].kind);
  }
  const auto& meta = snap.metadata();
  const auto analysis_grain = fact.grain_index(meta.analysis_dimension);
  const auto patient_grain = fact.grain_index(meta.patient_dimension);

  std::unordered_map<std::string, std::size_t> index;
  std::vector<Group> groups;
  Group total;
  total.acc.resize(q.measures.size());
  for (const auto& row : snap.facts(q.fact).rows) {
    if (!accepted(filters, row)) continue;
    std::vector<Tuple> key;
    key.reserve(groupers.size());
    std::vector<Value> flat;
    for (const auto& g : groupers) {
      key.push_back(g.of(row));
      flat.insert(flat.end(), key.back().begin(), key.back().end());
      flat.emplace_back(std::string("\x1e"));
    }
    auto [it, fresh] = index.try_emplace(store::encode_key(flat), groups.size());
    if (fresh) {
      groups.push_back(Group{std::move(key), 0, std::vector<Accumulator>(q.measures.size()), {}, false, {}, false});
    }
    for (Group* g : {&groups[it->second], &total}) {
      ++g->rows;
      for (std::size_t m = 0; m < measure_idx.size(); ++m) g->acc[m].add(row.measures[measure_idx[m]]);
      if (analysis_grain) {
        const auto k = row.keys[*analysis_grain];
        if (g->analysis_key && *g->analysis_key != k) g->mixed_analyses = true;
        g->analysis_key = k;
      }
      if (patient_grain) {
        const auto k = row.keys[*patient_grain];
        if (g->patient_key && *g->patient_key != k) g->mixed_patients = true;
        g->patient_key = k;
      }
    }
  }

  std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    for (std::size_t i = 0; i < a.key.size(); ++i) {
      if (int c = compare_tuples(a.key[i], b.key[i]); c != 0) return c < 0;
    }
    return false;
  });

  CubeResult out;
  out.query = q;
  out.schema_version = schema.version;
  for (const auto& g : q.group_by) {
    Axis axis;
    axis.level = g;
    axis.attributes = find_level(schema, fact, g.dimension, g.level).attributes;
    out.axes.push_back(std::move(axis));
  }
  const model::Dimension* analysis_dim = schema.dimension(meta.analysis_dimension);
  auto analysis_code = [&](std::uint64_t key) -> std::optional<std::string> {
    if (analysis_dim == nullptr) return std::nullopt;
    const auto* m = snap.dimension(meta.analysis_dimension).member(key);
    return render(m->values[*analysis_dim->attribute_index(analysis_dim->natural_key.front())]);
  };
  for (auto& g : groups) {
    Cell cell;
    cell.count = g.rows;
    for (std::size_t m = 0; m < q.measures.size(); ++m) {
      cell.values.push_back(g.acc[m].result(q.measures[m].aggregate, measure_kind[m], g.rows));
    }
    cell.mixed_analyses = g.mixed_analyses;
    if (g.analysis_key && !g.mixed_analyses) cell.analysis = analysis_code(*g.analysis_key);
    if (g.patient_key && !g.mixed_patients) cell.patient = g.patient_key;
    cell.key = std::move(g.key);
    out.cells.push_back(std::move(cell));
  }
  for (std::size_t a = 0; a < out.axes.size(); ++a) {
    auto& members = out.axes[a].members;
    for (const auto& c : out.cells) members.push_back(c.key[a]);
    std::sort(members.begin(), members.end(), [](const Tuple& x, const Tuple& y) { return compare_tuples(x, y) < 0; });
    members.erase(std::unique(members.begin(), members.end(),
                              [](const Tuple& x, const Tuple& y) { return compare_tuples(x, y) == 0; }),
                  members.end());
  }
  out.total_count = total.rows;
  for (std::size_t m = 0; m < q.measures.size(); ++m) {
    out.totals.push_back(total.acc[m].result(q.measures[m].aggregate, measure_kind[m], total.rows));
  }
  if (q.flag_normality) flag_cells(out, snap);
  return out;
}

void flag_cells(CubeResult& result, const store::Snapshot& snap) {
  for (const auto& m : result.query.measures) {
    if (m.aggregate != Aggregate::avg && m.aggregate != Aggregate::min && m.aggregate != Aggregate::max) {
      throw Error(errc::aggregate_mismatch, "normality flags need avg, min or max, not " +
                                                std::string(to_string(m.aggregate)));
    }
  }
  const auto& schema = snap.schema();
  const auto& meta = snap.metadata();
  const auto* fact = schema.fact_table(result.query.fact);
  if (fact == nullptr || !fact->grain_index(meta.analysis_dimension)) {
    throw Error(errc::mixed_analyses, "fact '" + result.query.fact + "' has no analysis dimension to flag against");
  }
  const auto* patient_dim = schema.dimension(meta.patient_dimension);
  for (auto& cell : result.cells) {
    if (cell.mixed_analyses || !cell.analysis) {
      std::string where;
      for (const auto& t : cell.key) {
        for (const auto& v : t) where += (where.empty() ? "" : ", ") + render(v);
      }
      throw Error(errc::mixed_analyses, "cell [" + where + "] spans several analysis codes");
    }
    mapping::AttributeMap context;
    if (cell.patient && patient_dim != nullptr) {
      const auto* member = snap.dimension(meta.patient_dimension).member(*cell.patient);
      for (std::size_t i = 0; i < patient_dim->attributes.size(); ++i) {
        if (!is_null(member->values[i])) context[patient_dim->attributes[i].name] = render(member->values[i]);
      }
    }
    cell.flags.clear();
    for (const auto& v : cell.values) {
      if (is_null(v)) {
        cell.flags.push_back(mapping::Flag::no_interval);
        continue;
      }
      const double x = std::holds_alternative<double>(v) ? std::get<double>(v)
                                                          : static_cast<double>(std::get<std::int64_t>(v));
      auto r = mapping::flag_normality(x, *cell.analysis, context, meta.intervals);
      cell.flags.push_back(r.flag);
      if (r.warning && std::find(result.warnings.begin(), result.warnings.end(), *r.warning) == result.warnings.end()) {
        result.warnings.push_back(*r.warning);
      }
    }
  }
  result.flagged = true;
}

std::vector<model::Level> levels_of(const model::Schema& schema, const std::string& fact, const std::string& dimension) {
  const auto& f = fact_of(schema, fact);
  if (f.grain_of(dimension) == nullptr) {
    throw Error(errc::invalid_level, "dimension '" + dimension + "' is not in the grain of '" + fact + "'");
  }
  return model::navigation_path(schema, f, dimension);
}

CubeQuery roll_up(const CubeQuery& query, const std::string& dimension, const model::Schema& schema) {
  CubeQuery q = checked(query, schema);
  std::size_t i = 0;
  require_group_by(q, dimension, i);
  const auto path = levels_of(schema, q.fact, dimension);
  for (std::size_t l = 0; l < path.size(); ++l) {
    if (path[l].name != q.group_by[i].level) continue;
    if (l + 1 == path.size()) {
      throw Error(errc::already_coarsest, "'" + dimension + "' is already at its coarsest level '" + path[l].name + "'");
    }
    q.group_by[i].level = path[l + 1].name;
    return q;
  }
  throw Error(errc::invalid_level, "level '" + q.group_by[i].level + "' is not on the path of '" + dimension + "'");
}

CubeQuery drill_down(const CubeQuery& query, const std::string& dimension, const model::Schema& schema) {
  CubeQuery q = checked(query, schema);
  std::size_t i = 0;
  require_group_by(q, dimension, i);
  const auto path = levels_of(schema, q.fact, dimension);
  for (std::size_t l = 0; l < path.size(); ++l) {
    if (path[l].name != q.group_by[i].level) continue;
    if (l == 0) {
      throw Error(errc::already_finest, "'" + dimension + "' is already at its finest level '" + path[l].name + "'");
    }
    q.group_by[i].level = path[l - 1].name;
    return q;
  }
  throw Error(errc::invalid_level, "level '" + q.group_by[i].level + "' is not on the path of '" + dimension + "'");
}

CubeQuery slice(const CubeQuery& query, const std::string& dimension, const std::string& level, Tuple value,
                const model::Schema& schema) {
  return dice(query, {Filter{dimension, level, Comparison::eq, {std::move(value)}}}, schema);
}

CubeQuery dice(const CubeQuery& query, const std::vector<Filter>& filters, const model::Schema& schema) {
  CubeQuery q = checked(query, schema);
  const auto& fact = *schema.fact_table(q.fact);
  for (const auto& f : filters) q.filters.push_back(validate_filter(f, schema, fact));
  return q;
}

std::vector<Tuple> level_members(const store::Snapshot& snap, const std::string& dimension, const std::string& level,
                                 const std::string& contains) {
  const auto& schema = snap.schema();
  const auto* dim = schema.dimension(dimension);
  if (dim == nullptr) throw Error(errc::unknown_name, "unknown dimension '" + dimension + "'");
  std::optional<model::Level> lvl;
  if (level.empty() || level == dim->name) {
    lvl = model::member_level(*dim);
  } else {
    for (const auto& h : dim->hierarchies) {
      for (const auto& l : h.levels) {
        if (l.name == level && !lvl) lvl = l;
      }
    }
  }
  if (!lvl) throw Error(errc::invalid_level, "'" + level + "' is not a level of '" + dimension + "'");
  std::vector<std::size_t> idx;
  for (const auto& a : lvl->attributes) idx.push_back(*dim->attribute_index(a));
  const auto needle = lower(contains);
  std::vector<Tuple> out;
  for (const auto& m : snap.dimension(dimension).members()) {
    Tuple t;
    std::string text;
    for (auto i : idx) {
      t.push_back(m.values[i]);
      text += render(m.values[i]) + " ";
    }
    if (!needle.empty() && lower(text).find(needle) == std::string::npos) continue;
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const Tuple& a, const Tuple& b) { return compare_tuples(a, b) < 0; });
  out.erase(std::unique(out.begin(), out.end(), [](const Tuple& a, const Tuple& b) { return compare_tuples(a, b) == 0; }),
            out.end());
  return out;
}

AttributeValueView export_attribute_value(const store::Snapshot& snap, const std::string& fact_name,
                                          const std::vector<std::string>& select, const std::vector<Filter>& filters) {
  const auto& schema = snap.schema();
  const auto& fact = fact_of(schema, fact_name);

  // Each column reads either a member attribute (grain index, attribute
  // index) or a measure (measure index).
  struct Column {
    std::optional<std::size_t> grain;
    std::size_t index = 0;
    const store::DimensionTable* table = nullptr;
  };
  std::vector<Column> columns;
  AttributeValueView view;
  auto add_attr = [&](const std::string& dim_name, const std::string& attr) {
    const auto gi = fact.grain_index(dim_name);
    const auto* dim = schema.dimension(dim_name);
    if (!gi || dim == nullptr) {
      throw Error(errc::unknown_name, "dimension '" + dim_name + "' is not in the grain of '" + fact_name + "'");
    }
    const auto ai = dim->attribute_index(attr);
    if (!ai) throw Error(errc::unknown_name, "dimension '" + dim_name + "' has no attribute '" + attr + "'");
    columns.push_back({gi, *ai, &snap.dimension(dim_name)});
    view.header.push_back(dim_name + "." + attr);
  };
  auto add_measure = [&](const std::string& name) {
    const auto mi = fact.measure_index(name);
    if (!mi) throw Error(errc::unknown_name, "fact '" + fact_name + "' has no measure '" + name + "'");
    columns.push_back({std::nullopt, *mi, nullptr});
    view.header.push_back(name);
  };
  if (select.empty()) {
    for (const auto& g : fact.grain) {
      for (const auto& a : schema.dimension(g.dimension)->attributes) add_attr(g.dimension, a.name);
    }
    for (const auto& m : fact.measures) add_measure(m.name);
  } else {
    for (const auto& s : select) {
      const auto dot = s.find('.');
      if (dot == std::string::npos) {
        add_measure(s);
      } else {
        add_attr(s.substr(0, dot), s.substr(dot + 1));
      }
    }
  }

  const auto compiled = compile_filters(snap, fact, filters);
  for (const auto& row : snap.facts(fact_name).rows) {
    if (!accepted(compiled, row)) continue;
    std::vector<Value> out;
    out.reserve(columns.size());
    for (const auto& c : columns) {
      if (c.grain) {
        out.push_back(c.table->member(row.keys[*c.grain])->values[c.index]);
      } else {
        out.push_back(row.measures[c.index]);
      }
    }
    view.rows.push_back(std::move(out));
  }
  return view;
}

void write_view(std::ostream& out, const AttributeValueView& view, const delimited::Dialect& dialect) {
  delimited::write_row(out, view.header, dialect);
  std::vector<std::string> fields;
  for (const auto& row : view.rows) {
    fields.clear();
    for (const auto& v : row) fields.push_back(render(v));
    delimited::write_row(out, fields, dialect);
  }
}

Assembly assemble_complex_fact(const store::Snapshot& snap, const std::string& group, std::uint64_t report_id) {
  const auto& schema = snap.schema();
  const auto* g = schema.group(group);
  if (g == nullptr) throw Error(errc::unknown_name, "unknown complex-fact group '" + group + "'");
  const auto& central = fact_of(schema, g->central_fact);
  const auto& rows = snap.facts(central.name).rows;
  if (report_id == 0 || report_id > rows.size()) {
    throw Error(errc::not_found, "'" + central.name + "' has no row " + std::to_string(report_id));
  }

  Assembly out;
  out.group = group;
  out.central_fact = central.name;
  out.report = rows[report_id - 1];

  for (const auto& ge : central.grain) {
    bool everywhere = true;
    for (const auto& s : g->satellite_facts) everywhere = everywhere && fact_of(schema, s).grain_of(ge.dimension);
    if (everywhere) out.shared_dimensions.push_back(ge.dimension);
  }
  std::vector<std::string> satellites = g->satellite_facts;
  std::sort(satellites.begin(), satellites.end());
  for (const auto& s : satellites) {
    const auto& sat = fact_of(schema, s);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (central grain index, satellite grain index)
    for (const auto& d : out.shared_dimensions) pairs.emplace_back(*central.grain_index(d), *sat.grain_index(d));
    for (const auto& row : snap.facts(s).rows) {
      const bool match = std::all_of(pairs.begin(), pairs.end(),
                                     [&](const auto& p) { return row.keys[p.second] == out.report.keys[p.first]; });
      if (match) out.satellites.push_back({s, row});
    }
  }
  auto ids = snap.documents_of(central.name, report_id);
  std::sort(ids.begin(), ids.end());
  for (auto id : ids) out.documents.push_back(*snap.document(id));
  return out;
}

}  // namespace dwbus::olap
