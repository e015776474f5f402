#include "dwbus/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dwbus/delimited.hpp"

namespace dwbus::mapping {

namespace {

bool close_rel(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
  return std::fabs(a - b) <= 1e-9 * scale;
}

std::string trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

// Calls `row` for every data record of a headed CSV file with at least
// `min_fields` columns.
template <typename Fn>
void for_each_row(const std::filesystem::path& path, std::size_t min_fields, Fn row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::io_error, "cannot read mapping file '" + path.string() + "'");
  delimited::Reader reader(in, delimited::Dialect{}, path.string());
  delimited::Extracted ex;
  while (reader.next(ex)) {
    const auto where = path.string() + ":" + std::to_string(ex.record.provenance.line);
    if (ex.rejection) throw Error(errc::invalid_mapping, where + ": " + *ex.rejection);
    if (ex.record.fields.size() < min_fields) {
      throw Error(errc::invalid_mapping, where + ": expected " + std::to_string(min_fields) + " fields");
    }
    for (auto& f : ex.record.fields) f = trimmed(f);
    row(ex.record.fields, where);
  }
}

double number(const std::string& text, const std::string& where) {
  auto v = parse_decimal(text);
  if (!v) throw Error(errc::invalid_mapping, where + ": '" + text + "' is not a number");
  return *v;
}

}  // namespace

std::string fold_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto ch = static_cast<unsigned char>(raw[i]);
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (ch >= 'A' && ch <= 'Z') {
      out.push_back(static_cast<char>(ch + ('a' - 'A')));
    } else if (ch == 0xC3 && i + 1 < raw.size()) {
      // Latin-1 supplement capitals U+00C0..U+00DE (except U+00D7) fold by +0x20.
      auto next = static_cast<unsigned char>(raw[i + 1]);
      if (next >= 0x80 && next <= 0x9E && next != 0x97) next = static_cast<unsigned char>(next + 0x20);
      out.push_back(static_cast<char>(ch));
      out.push_back(static_cast<char>(next));
      ++i;
    } else {
      out.push_back(static_cast<char>(ch));
    }
  }
  return out;
}

void MappingRules::add_synonym(std::string_view raw_label, std::string code) {
  synonyms[fold_label(raw_label)] = std::move(code);
}

std::vector<std::string> MappingRules::check() const {
  std::vector<std::string> out;
  for (const auto& [label, code] : synonyms) {
    if (canonical_units.find(code) == canonical_units.end()) {
      out.push_back("synonym '" + label + "' targets code '" + code + "' which has no canonical unit");
    }
  }
  for (const auto& [pair, conv] : unit_conversions) {
    const auto& [from, to] = pair;
    if (from == to) {
      if (conv.factor != 1.0 || conv.offset != 0.0) {
        out.push_back("identity conversion " + from + " -> " + to + " must have factor 1 and offset 0");
      }
      continue;
    }
    if (conv.factor == 0.0) {
      out.push_back("conversion " + from + " -> " + to + " has factor 0");
      continue;
    }
    auto inv = unit_conversions.find({to, from});
    if (inv == unit_conversions.end()) continue;
    if (!close_rel(inv->second.factor, 1.0 / conv.factor) ||
        !close_rel(inv->second.offset, -conv.offset / conv.factor)) {
      out.push_back("conversions " + from + " -> " + to + " and " + to + " -> " + from +
                    " are not inverse of each other");
    }
  }
  return out;
}

MappingRules load_rules(const MappingFiles& files) {
  MappingRules rules;
  if (!files.canonical_units.empty()) {
    for_each_row(files.canonical_units, 2, [&](const std::vector<std::string>& f, const std::string& where) {
      if (f[0].empty() || f[1].empty()) throw Error(errc::invalid_mapping, where + ": empty code or unit");
      rules.canonical_units[f[0]] = f[1];
      if (f.size() > 2 && !f[2].empty()) rules.nomenclature[f[0]] = f[2];
    });
  }
  if (!files.synonyms.empty()) {
    for_each_row(files.synonyms, 2, [&](const std::vector<std::string>& f, const std::string& where) {
      if (f[1].empty()) throw Error(errc::invalid_mapping, where + ": empty code");
      rules.add_synonym(f[0], f[1]);
    });
  }
  if (!files.units.empty()) {
    for_each_row(files.units, 3, [&](const std::vector<std::string>& f, const std::string& where) {
      Conversion c;
      c.factor = number(f[2], where);
      c.offset = f.size() > 3 && !f[3].empty() ? number(f[3], where) : 0.0;
      rules.unit_conversions[{f[0], f[1]}] = c;
    });
  }
  auto problems = rules.check();
  if (!problems.empty()) throw Error(errc::invalid_mapping, "inconsistent mapping rules: " + problems.front());
  return rules;
}

std::string normalize_label(std::string_view raw, const MappingRules& rules) {
  auto it = rules.synonyms.find(fold_label(raw));
  if (it == rules.synonyms.end() || rules.canonical_units.find(it->second) == rules.canonical_units.end()) {
    throw UnmappedLabel(std::string(raw));
  }
  return it->second;
}

double convert_unit(double value, std::string_view from, std::string_view code, const MappingRules& rules) {
  auto canon = rules.canonical_units.find(std::string(code));
  if (canon == rules.canonical_units.end()) {
    throw Error(errc::unconvertible_unit, "analysis '" + std::string(code) + "' has no canonical unit");
  }
  const std::string unit = trimmed(from);
  if (unit.empty() || unit == canon->second) return value;
  auto conv = rules.unit_conversions.find({unit, canon->second});
  if (conv == rules.unit_conversions.end()) {
    throw Error(errc::unconvertible_unit,
                "no conversion from '" + unit + "' to '" + canon->second + "' for '" + std::string(code) + "'");
  }
  return value * conv->second.factor + conv->second.offset;
}

std::vector<ContextTerm> parse_context(std::string_view text) {
  std::vector<ContextTerm> out;
  std::string_view rest = text;
  while (!trimmed(rest).empty()) {
    const auto amp = rest.find('&');
    const std::string_view term = rest.substr(0, amp);
    const auto eq = term.find('=');
    if (eq == std::string_view::npos) {
      throw Error(errc::invalid_mapping, "context term '" + trimmed(term) + "' lacks '='");
    }
    ContextTerm t{trimmed(term.substr(0, eq)), trimmed(term.substr(eq + 1))};
    if (t.attribute.empty() || t.value.empty()) {
      throw Error(errc::invalid_mapping, "context term '" + trimmed(term) + "' is incomplete");
    }
    out.push_back(std::move(t));
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 1);
    if (trimmed(rest).empty()) throw Error(errc::invalid_mapping, "context ends with '&'");
  }
  return out;
}

std::string format_context(const std::vector<ContextTerm>& terms) {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i > 0) out += " & ";
    out += terms[i].attribute + "=" + terms[i].value;
  }
  return out;
}

std::vector<ReferenceInterval> load_intervals(const std::filesystem::path& path) {
  std::vector<ReferenceInterval> out;
  for_each_row(path, 3, [&](const std::vector<std::string>& f, const std::string& where) {
    ReferenceInterval ri;
    ri.code = f[0];
    ri.lower = number(f[1], where);
    ri.upper = number(f[2], where);
    if (f.size() > 3) ri.context = parse_context(f[3]);
    if (ri.lower > ri.upper) throw Error(errc::invalid_mapping, where + ": lower bound exceeds upper bound");
    out.push_back(std::move(ri));
  });
  return out;
}

std::vector<std::string> check_intervals(std::span<const ReferenceInterval> intervals,
                                         const model::Dimension* patient) {
  std::vector<std::string> out;
  for (const auto& ri : intervals) {
    if (!(ri.lower <= ri.upper)) out.push_back("interval for '" + ri.code + "' has lower > upper");
    if (patient == nullptr) continue;
    for (const auto& t : ri.context) {
      if (patient->attribute(t.attribute) == nullptr) {
        out.push_back("interval for '" + ri.code + "' uses undeclared patient attribute '" + t.attribute + "'");
      }
    }
  }
  return out;
}

std::string_view to_string(Flag f) {
  switch (f) {
    case Flag::below: return "below";
    case Flag::normal: return "normal";
    case Flag::above: return "above";
    case Flag::no_interval: return "no-interval";
  }
  return "no-interval";
}

std::optional<Flag> flag_from(std::string_view name) {
  if (name == "below") return Flag::below;
  if (name == "normal") return Flag::normal;
  if (name == "above") return Flag::above;
  if (name == "no-interval") return Flag::no_interval;
  return std::nullopt;
}

FlagResult flag_normality(double value, std::string_view code, const AttributeMap& patient_attrs,
                          std::span<const ReferenceInterval> intervals) {
  const ReferenceInterval* best = nullptr;
  std::size_t best_terms = 0;
  std::size_t ties = 0;
  for (const auto& ri : intervals) {
    if (ri.code != code) continue;
    bool matches = true;
    for (const auto& t : ri.context) {
      auto it = patient_attrs.find(t.attribute);
      if (it == patient_attrs.end() || it->second != t.value) {
        matches = false;
        break;
      }
    }
    if (!matches) continue;
    if (best == nullptr || ri.context.size() > best_terms) {
      best = &ri;
      best_terms = ri.context.size();
      ties = 1;
    } else if (ri.context.size() == best_terms) {
      ++ties;
    }
  }
  if (best == nullptr) return {Flag::no_interval, std::nullopt};
  if (ties > 1) {
    return {Flag::no_interval, std::to_string(ties) + " equally specific reference intervals match '" +
                                   std::string(code) + "'"};
  }
  if (value < best->lower) return {Flag::below, std::nullopt};
  if (value > best->upper) return {Flag::above, std::nullopt};
  return {Flag::normal, std::nullopt};
}

}  // namespace dwbus::mapping
