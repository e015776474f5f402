#include "dwbus/value.hpp"

#include <charconv>
#include <cmath>
#include <string>

namespace dwbus {

namespace {

int rank(const Value& v) {
  if (std::holds_alternative<std::monostate>(v)) return 0;
  if (std::holds_alternative<std::string>(v)) return 2;
  return 1;
}

double as_double(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) return false;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

int number_at(std::string_view s, std::size_t pos, std::size_t n) {
  int out = 0;
  for (std::size_t i = pos; i < pos + n; ++i) out = out * 10 + (s[i] - '0');
  return out;
}

}  // namespace

int compare_values(const Value& a, const Value& b) {
  const int ra = rank(a);
  const int rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (ra == 0) return 0;
  if (ra == 2) {
    const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
    const auto x = std::get<std::int64_t>(a);
    const auto y = std::get<std::int64_t>(b);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  const double x = as_double(a);
  const double y = as_double(b);
  if (x < y) return -1;
  if (x > y) return 1;
  return 0;
}

std::string render(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), *d);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, end);
  }
  return {};
}

std::optional<std::int64_t> parse_integer(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return out;
}

std::optional<double> parse_decimal(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  std::string buf(text);
  const auto comma = buf.find(',');
  if (comma != std::string::npos) {
    if (buf.find('.') != std::string::npos || buf.find(',', comma + 1) != std::string::npos) {
      return std::nullopt;
    }
    buf[comma] = '.';
  }
  double out = 0;
  auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), out);
  if (ec != std::errc{} || ptr != buf.data() + buf.size() || !std::isfinite(out)) return std::nullopt;
  return out;
}

bool is_valid_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  if (!digits(s, 0, 4) || !digits(s, 5, 2) || !digits(s, 8, 2)) return false;
  const int y = number_at(s, 0, 4);
  const int m = number_at(s, 5, 2);
  const int d = number_at(s, 8, 2);
  if (m < 1 || m > 12 || d < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int limit = kDays[m - 1];
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m == 2 && leap) limit = 29;
  return d <= limit;
}

bool is_valid_timestamp(std::string_view s) {
  if (s.size() != 16 && s.size() != 19) return false;
  if (!is_valid_date(s.substr(0, 10)) || s[10] != 'T') return false;
  if (!digits(s, 11, 2) || s[13] != ':' || !digits(s, 14, 2)) return false;
  if (number_at(s, 11, 2) > 23 || number_at(s, 14, 2) > 59) return false;
  if (s.size() == 19) {
    if (s[16] != ':' || !digits(s, 17, 2) || number_at(s, 17, 2) > 59) return false;
  }
  return true;
}

std::optional<Value> parse_value(std::string_view text, ValueKind kind) {
  const auto t = trim(text);
  if (t.empty()) return Value{};
  switch (kind) {
    case ValueKind::text:
      return Value{std::string(t)};
    case ValueKind::integer:
      if (auto i = parse_integer(t)) return Value{*i};
      return std::nullopt;
    case ValueKind::decimal:
      if (auto d = parse_decimal(t)) return Value{*d};
      return std::nullopt;
    case ValueKind::date:
      if (is_valid_date(t)) return Value{std::string(t)};
      return std::nullopt;
    case ValueKind::timestamp:
      if (is_valid_timestamp(t)) return Value{std::string(t)};
      return std::nullopt;
  }
  return std::nullopt;
}

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::text: return "text";
    case ValueKind::integer: return "integer";
    case ValueKind::decimal: return "decimal";
    case ValueKind::date: return "date";
    case ValueKind::timestamp: return "timestamp";
  }
  return "text";
}

std::optional<ValueKind> value_kind_from(std::string_view name) {
  if (name == "text") return ValueKind::text;
  if (name == "integer") return ValueKind::integer;
  if (name == "decimal") return ValueKind::decimal;
  if (name == "date") return ValueKind::date;
  if (name == "timestamp") return ValueKind::timestamp;
  return std::nullopt;
}

bool conforms(const Value& v, ValueKind kind) {
  if (is_null(v)) return true;
  switch (kind) {
    case ValueKind::integer: return std::holds_alternative<std::int64_t>(v);
    case ValueKind::decimal: return std::holds_alternative<double>(v);
    case ValueKind::text: return std::holds_alternative<std::string>(v);
    case ValueKind::date:
      return std::holds_alternative<std::string>(v) && is_valid_date(std::get<std::string>(v));
    case ValueKind::timestamp:
      return std::holds_alternative<std::string>(v) && is_valid_timestamp(std::get<std::string>(v));
  }
  return false;
}

}  // namespace dwbus
