#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "dwbus/etl.hpp"
#include "dwbus/model.hpp"
#include "dwbus/olap.hpp"
#include "dwbus/store.hpp"

// JSON forms shared by the HTTP API, the C API and the CLI. Objects are
// emitted with sorted keys, so dump() of equal values is byte-identical.
namespace dwbus::wire {

using json = nlohmann::json;

json value_to_json(const Value& v);
// Throws Error(bad_request) for booleans, objects and arrays.
Value value_from_json(const json& j);

// Single-attribute tuples travel as scalars, wider ones as arrays.
json tuple_to_json(const olap::Tuple& t);
olap::Tuple tuple_from_json(const json& j);

// Throws Error(bad_request) on missing or unknown fields and wrong types.
olap::CubeQuery query_from_json(const json& j);
json to_json(const olap::CubeQuery& q);

olap::Filter filter_from_json(const json& j);
json to_json(const olap::Filter& f);

json to_json(const olap::CubeResult& r);

// {"query": ..., "op": "roll_up" | "drill_down" | "slice" | "dice", plus
// "dimension" (roll_up, drill_down, slice), "level" and "value" (slice) or
// "filters" (dice)} -> the transformed query.
olap::CubeQuery navigate(const json& request, const model::Schema& schema);

json to_json(const olap::Assembly& a, const store::Snapshot& snap);
json to_json(const store::Document& d);
json to_json(const etl::LoadReport& r);
json to_json(const model::ValidationReport& r);

// Structured schema plus its canonical DSL text.
json schema_to_json(const model::Schema& s);

json error_json(const std::string& code, const std::string& message,
                const std::optional<std::string>& location = std::nullopt);

// Parses `text`, mapping syntax errors to Error(bad_request).
json parse(const std::string& text);

inline std::string canonical(const json& j) { return j.dump(); }

}  // namespace dwbus::wire
