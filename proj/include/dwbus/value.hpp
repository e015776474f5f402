#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace dwbus {

enum class ValueKind { text, integer, decimal, date, timestamp };

// A typed cell. Dates and timestamps are held as ISO-8601 text.
using Value = std::variant<std::monostate, std::int64_t, double, std::string>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

// Total order: null < numbers < text. Integers and decimals compare
// numerically with each other.
int compare_values(const Value& a, const Value& b);

// Text rendering used for headers, exports and natural-key encoding.
// Null renders as the empty string; decimals use the shortest round-trip form.
std::string render(const Value& v);

// Parses source text into a value of the given kind. Empty text is null.
// Returns nullopt when the text is not a valid literal of that kind.
std::optional<Value> parse_value(std::string_view text, ValueKind kind);

// Accepts "12.5", "-3", "1e3" and a single decimal comma ("12,5").
std::optional<double> parse_decimal(std::string_view text);
std::optional<std::int64_t> parse_integer(std::string_view text);

bool is_valid_date(std::string_view text);       // YYYY-MM-DD
bool is_valid_timestamp(std::string_view text);  // YYYY-MM-DDTHH:MM[:SS]

std::string_view to_string(ValueKind kind);
std::optional<ValueKind> value_kind_from(std::string_view name);

// Whether a stored value conforms to an attribute kind (null always does).
bool conforms(const Value& v, ValueKind kind);

}  // namespace dwbus
