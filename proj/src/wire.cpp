#include "dwbus/wire.hpp"

#include <cmath>
#include <set>

#include "dwbus/dsl.hpp"

namespace dwbus::wire {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(errc::bad_request, what); }

const json& field(const json& obj, const char* name, const std::string& where) {
  auto it = obj.find(name);
  if (it == obj.end()) bad(where + ": missing field '" + name + "'");
  return *it;
}

std::string text_field(const json& obj, const char* name, const std::string& where) {
  const auto& v = field(obj, name, where);
  if (!v.is_string()) bad(where + ": field '" + std::string(name) + "' must be a string");
  return v.get<std::string>();
}

void only_fields(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) bad(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) bad(where + ": unknown field '" + key + "'");
  }
}

json row_to_json(const model::FactTable& fact, const store::FactRow& row, const store::Snapshot& snap) {
  const auto& schema = snap.schema();
  json members = json::object();
  for (std::size_t i = 0; i < fact.grain.size(); ++i) {
    const auto& dim = *schema.dimension(fact.grain[i].dimension);
    const auto* m = snap.dimension(dim.name).member(row.keys[i]);
    json attrs = json::object();
    for (std::size_t a = 0; a < dim.attributes.size(); ++a) attrs[dim.attributes[a].name] = value_to_json(m->values[a]);
    members[dim.name] = {{"key", row.keys[i]}, {"attributes", attrs}};
  }
  json measures = json::object();
  for (std::size_t i = 0; i < fact.measures.size(); ++i) measures[fact.measures[i].name] = value_to_json(row.measures[i]);
  return {{"id", row.id}, {"members", members}, {"measures", measures}, {"batch_id", row.batch_id}};
}

}  // namespace

json value_to_json(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) {
    if (!std::isfinite(*d)) return nullptr;
    return *d;
  }
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return nullptr;
}

Value value_from_json(const json& j) {
  if (j.is_null()) return Value{};
  if (j.is_number_integer()) {
    if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      bad("integer literal out of range");
    }
    return j.get<std::int64_t>();
  }
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  bad("unsupported literal " + j.dump());
}

json tuple_to_json(const olap::Tuple& t) {
  if (t.size() == 1) return value_to_json(t.front());
  json out = json::array();
  for (const auto& v : t) out.push_back(value_to_json(v));
  return out;
}

olap::Tuple tuple_from_json(const json& j) {
  olap::Tuple t;
  if (j.is_array()) {
    for (const auto& v : j) t.push_back(value_from_json(v));
  } else {
    t.push_back(value_from_json(j));
  }
  return t;
}

olap::Filter filter_from_json(const json& j) {
  only_fields(j, {"dimension", "level", "op", "value"}, "filter");
  olap::Filter f;
  f.dimension = text_field(j, "dimension", "filter");
  f.level = text_field(j, "level", "filter");
  const auto op = text_field(j, "op", "filter");
  auto c = olap::comparison_from(op);
  if (!c) bad("filter: unknown comparison '" + op + "'");
  f.op = *c;
  const auto& value = field(j, "value", "filter");
  if (f.op == olap::Comparison::in) {
    if (!value.is_array()) bad("filter: 'in' takes an array of literals");
    for (const auto& lit : value) f.literals.push_back(tuple_from_json(lit));
  } else {
    f.literals.push_back(tuple_from_json(value));
  }
  return f;
}

json to_json(const olap::Filter& f) {
  json value;
  if (f.op == olap::Comparison::in) {
    value = json::array();
    for (const auto& lit : f.literals) value.push_back(tuple_to_json(lit));
  } else {
    value = f.literals.empty() ? json(nullptr) : tuple_to_json(f.literals.front());
  }
  return {{"dimension", f.dimension}, {"level", f.level}, {"op", std::string(olap::to_string(f.op))}, {"value", value}};
}

olap::CubeQuery query_from_json(const json& j) {
  only_fields(j, {"fact", "group_by", "measures", "filters", "flag_normality"}, "query");
  olap::CubeQuery q;
  q.fact = text_field(j, "fact", "query");
  if (auto it = j.find("group_by"); it != j.end()) {
    if (!it->is_array()) bad("query: 'group_by' must be an array");
    for (const auto& g : *it) {
      only_fields(g, {"dimension", "level"}, "group_by entry");
      q.group_by.push_back({text_field(g, "dimension", "group_by entry"), text_field(g, "level", "group_by entry")});
    }
  }
  if (auto it = j.find("measures"); it != j.end()) {
    if (!it->is_array()) bad("query: 'measures' must be an array");
    for (const auto& m : *it) {
      only_fields(m, {"measure", "aggregate"}, "measure entry");
      const auto name = text_field(m, "aggregate", "measure entry");
      auto agg = olap::aggregate_from(name);
      if (!agg) bad("measure entry: unknown aggregate '" + name + "'");
      q.measures.push_back({text_field(m, "measure", "measure entry"), *agg});
    }
  }
  if (auto it = j.find("filters"); it != j.end()) {
    if (!it->is_array()) bad("query: 'filters' must be an array");
    for (const auto& f : *it) q.filters.push_back(filter_from_json(f));
  }
  if (auto it = j.find("flag_normality"); it != j.end()) {
    if (!it->is_boolean()) bad("query: 'flag_normality' must be a boolean");
    q.flag_normality = it->get<bool>();
  }
  return q;
}

json to_json(const olap::CubeQuery& q) {
  json group_by = json::array();
  for (const auto& g : q.group_by) group_by.push_back({{"dimension", g.dimension}, {"level", g.level}});
  json measures = json::array();
  for (const auto& m : q.measures) {
    measures.push_back({{"measure", m.measure}, {"aggregate", std::string(olap::to_string(m.aggregate))}});
  }
  json filters = json::array();
  for (const auto& f : q.filters) filters.push_back(to_json(f));
  return {{"fact", q.fact},
          {"group_by", group_by},
          {"measures", measures},
          {"filters", filters},
          {"flag_normality", q.flag_normality}};
}

json to_json(const olap::CubeResult& r) {
  json axes = json::array();
  for (const auto& a : r.axes) {
    json members = json::array();
    for (const auto& m : a.members) members.push_back(tuple_to_json(m));
    axes.push_back({{"dimension", a.level.dimension},
                    {"level", a.level.level},
                    {"attributes", a.attributes},
                    {"members", members}});
  }
  json cells = json::array();
  for (const auto& c : r.cells) {
    json key = json::array();
    for (const auto& t : c.key) key.push_back(tuple_to_json(t));
    json values = json::array();
    for (const auto& v : c.values) values.push_back(value_to_json(v));
    json cell = {{"key", key}, {"values", values}, {"count", c.count}};
    if (r.flagged) {
      json flags = json::array();
      for (auto f : c.flags) flags.push_back(std::string(mapping::to_string(f)));
      cell["flags"] = flags;
    }
    cells.push_back(std::move(cell));
  }
  json totals = json::array();
  for (const auto& v : r.totals) totals.push_back(value_to_json(v));
  return {{"schema_version", r.schema_version},
          {"query", to_json(r.query)},
          {"axes", axes},
          {"cells", cells},
          {"totals", totals},
          {"total_count", r.total_count},
          {"flagged", r.flagged},
          {"warnings", r.warnings}};
}

olap::CubeQuery navigate(const json& request, const model::Schema& schema) {
  only_fields(request, {"query", "op", "dimension", "level", "value", "filters"}, "navigate request");
  const auto q = query_from_json(field(request, "query", "navigate request"));
  const auto op = text_field(request, "op", "navigate request");
  if (op == "roll_up") return olap::roll_up(q, text_field(request, "dimension", "roll_up"), schema);
  if (op == "drill_down") return olap::drill_down(q, text_field(request, "dimension", "drill_down"), schema);
  if (op == "slice") {
    return olap::slice(q, text_field(request, "dimension", "slice"), text_field(request, "level", "slice"),
                       tuple_from_json(field(request, "value", "slice")), schema);
  }
  if (op == "dice") {
    std::vector<olap::Filter> filters;
    if (auto it = request.find("filters"); it != request.end()) {
      if (!it->is_array()) bad("dice: 'filters' must be an array");
      for (const auto& f : *it) filters.push_back(filter_from_json(f));
    }
    return olap::dice(q, filters, schema);
  }
  bad("unknown navigation op '" + op + "'");
}

json to_json(const store::Document& d) {
  return {{"id", d.id},
          {"media_type", d.media_type},
          {"checksum", d.checksum},
          {"size", d.size},
          {"attributes", d.attributes}};
}

json to_json(const olap::Assembly& a, const store::Snapshot& snap) {
  const auto& schema = snap.schema();
  json satellites = json::array();
  for (const auto& s : a.satellites) {
    satellites.push_back({{"fact", s.fact}, {"row", row_to_json(*schema.fact_table(s.fact), s.row, snap)}});
  }
  json documents = json::array();
  for (const auto& d : a.documents) documents.push_back(to_json(d));
  return {{"schema_version", schema.version},
          {"group", a.group},
          {"central_fact", a.central_fact},
          {"report", row_to_json(*schema.fact_table(a.central_fact), a.report, snap)},
          {"shared_dimensions", a.shared_dimensions},
          {"satellites", satellites},
          {"documents", documents}};
}

json to_json(const etl::LoadReport& r) {
  json rejected = json::array();
  for (const auto& x : r.rejected) {
    rejected.push_back({{"uri", x.provenance.uri}, {"line", x.provenance.line}, {"code", x.code}, {"reason", x.reason}});
  }
  return {{"source", r.source},
          {"target_fact", r.target_fact},
          {"batch_id", r.batch_id},
          {"records_read", r.records_read},
          {"accepted", r.accepted},
          {"rejected", rejected},
          {"members_created", r.members_created},
          {"members_updated", r.members_updated},
          {"documents_stored", r.documents_stored},
          {"links_created", r.links_created},
          {"duplicate", r.duplicate}};
}

json to_json(const model::ValidationReport& r) {
  json violations = json::array();
  for (const auto& v : r.violations) {
    violations.push_back({{"location", v.location}, {"rule", v.rule}, {"message", v.message}});
  }
  return {{"ok", r.ok()}, {"composition", std::string(model::to_string(r.composition))}, {"violations", violations}};
}

json schema_to_json(const model::Schema& s) {
  json dims = json::array();
  for (const auto& d : s.dimensions) {
    json attrs = json::array();
    for (const auto& a : d.attributes) {
      attrs.push_back({{"name", a.name}, {"kind", std::string(to_string(a.kind))}, {"outrigger", a.outrigger}});
    }
    json hierarchies = json::array();
    for (const auto& h : d.hierarchies) {
      json levels = json::array();
      for (const auto& l : h.levels) levels.push_back({{"name", l.name}, {"attributes", l.attributes}});
      hierarchies.push_back({{"name", h.name}, {"levels", levels}});
    }
    dims.push_back({{"name", d.name}, {"natural_key", d.natural_key}, {"attributes", attrs}, {"hierarchies", hierarchies}});
  }
  const auto conformed = model::conformed_dimensions(s);
  json facts = json::array();
  for (const auto& f : s.fact_tables) {
    json grain = json::array();
    for (const auto& g : f.grain) {
      json levels = json::array();
      for (const auto& l : model::navigation_path(s, f, g.dimension)) levels.push_back(l.name);
      grain.push_back({{"dimension", g.dimension}, {"level", g.level}, {"levels", levels}});
    }
    json measures = json::array();
    for (const auto& m : f.measures) {
      measures.push_back({{"name", m.name},
                          {"kind", std::string(model::to_string(m.kind))},
                          {"aggregability", std::string(model::to_string(m.aggregability))}});
    }
    facts.push_back({{"name", f.name},
                     {"grain", grain},
                     {"measures", measures},
                     {"classification", std::string(model::to_string(model::classify_fact_table(s, f.name)))}});
  }
  json groups = json::array();
  for (const auto& g : s.complex_groups) {
    groups.push_back({{"name", g.name},
                      {"central", g.central_fact},
                      {"satellites", g.satellite_facts},
                      {"documents", g.document_bridge}});
  }
  return {{"schema_version", s.version},
          {"name", s.name},
          {"dimensions", dims},
          {"facts", facts},
          {"groups", groups},
          {"conformed_dimensions", conformed},
          {"text", dsl::serialize_schema(s)}};
}

json error_json(const std::string& code, const std::string& message, const std::optional<std::string>& location) {
  json e = {{"code", code}, {"message", message}};
  if (location) e["location"] = *location;
  return {{"error", e}};
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace dwbus::wire
