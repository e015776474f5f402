#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dwbus/error.hpp"
#include "dwbus/model.hpp"

// Harmonisation metadata: label synonyms, unit conversions, nomenclature
// codes, and reference intervals used to flag results as normal.
namespace dwbus::mapping {

// value_in_target = value * factor + offset
struct Conversion {
  double factor = 1.0;
  double offset = 0.0;

  bool operator==(const Conversion&) const = default;
};

struct MappingRules {
  // Folded raw label -> canonical analysis code.
  std::map<std::string, std::string> synonyms;
  std::map<std::pair<std::string, std::string>, Conversion> unit_conversions;
  // Analysis code -> canonical unit.
  std::map<std::string, std::string> canonical_units;
  // Analysis code -> external nomenclature code.
  std::map<std::string, std::string> nomenclature;

  void add_synonym(std::string_view raw_label, std::string code);

  // Invariant violations; empty when the rules are consistent.
  std::vector<std::string> check() const;
};

// Files: synonyms.csv (raw_label,code), units.csv
// (from_unit,to_unit,factor,offset), canonical_units.csv
// (code,unit,nomenclature_code). Any path may be empty to skip it.
struct MappingFiles {
  std::filesystem::path synonyms;
  std::filesystem::path units;
  std::filesystem::path canonical_units;
  std::filesystem::path intervals;
};

// Throws Error(io_error) when a file cannot be read and
// Error(invalid_mapping) when a row is malformed or the rules fail check().
MappingRules load_rules(const MappingFiles& files);

// Case-folds (ASCII and Latin-1 letters) and collapses runs of whitespace to
// one space, trimming both ends.
std::string fold_label(std::string_view raw);

class UnmappedLabel : public Error {
 public:
  explicit UnmappedLabel(std::string raw)
      : Error(errc::unmapped_label, "unmapped label '" + raw + "'"), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// Canonical analysis code for a raw label; throws UnmappedLabel.
std::string normalize_label(std::string_view raw, const MappingRules& rules);

// Converts `value` expressed in `from` into the canonical unit of `code`.
// Throws Error(unconvertible_unit) when no conversion pair exists.
double convert_unit(double value, std::string_view from, std::string_view code, const MappingRules& rules);

// attribute = value
struct ContextTerm {
  std::string attribute;
  std::string value;

  bool operator==(const ContextTerm&) const = default;
};

struct ReferenceInterval {
  std::string code;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<ContextTerm> context;  // conjunction; empty = context-free

  bool operator==(const ReferenceInterval&) const = default;
};

// "sex=F & sport=rugby" -> two terms. Empty text -> no terms.
// Throws Error(invalid_mapping) on malformed text.
std::vector<ContextTerm> parse_context(std::string_view text);
std::string format_context(const std::vector<ContextTerm>& terms);

// Rows of intervals.csv (code,lower,upper,context_expr).
std::vector<ReferenceInterval> load_intervals(const std::filesystem::path& path);

// Violations of lower <= upper and of context terms naming attributes the
// patient dimension does not declare (skipped when `patient` is null).
std::vector<std::string> check_intervals(std::span<const ReferenceInterval> intervals,
                                         const model::Dimension* patient);

enum class Flag { below, normal, above, no_interval };
std::string_view to_string(Flag f);
std::optional<Flag> flag_from(std::string_view name);

struct FlagResult {
  Flag flag = Flag::no_interval;
  std::optional<std::string> warning;  // set when the choice was ambiguous

  bool operator==(const FlagResult&) const = default;
};

using AttributeMap = std::map<std::string, std::string>;

// Picks the matching interval with the most context terms; bounds are
// inclusive. Equally specific matches are ambiguous and yield no_interval
// with a warning.
FlagResult flag_normality(double value, std::string_view code, const AttributeMap& patient_attrs,
                          std::span<const ReferenceInterval> intervals);

}  // namespace dwbus::mapping
