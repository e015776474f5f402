#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dwbus {

// Stable machine codes. The HTTP API, the C API and the CLI all report
// failures with one of these strings.
namespace errc {
inline constexpr std::string_view bad_request = "bad_request";
inline constexpr std::string_view invalid_schema = "invalid_schema";
inline constexpr std::string_view unknown_name = "unknown_name";
inline constexpr std::string_view invalid_level = "invalid_level";
inline constexpr std::string_view invalid_literal = "invalid_literal";
inline constexpr std::string_view aggregate_mismatch = "aggregate_mismatch";
inline constexpr std::string_view mixed_analyses = "mixed_analyses";
inline constexpr std::string_view already_coarsest = "already_coarsest";
inline constexpr std::string_view already_finest = "already_finest";
inline constexpr std::string_view not_in_group_by = "not_in_group_by";
inline constexpr std::string_view unmapped_label = "unmapped_label";
inline constexpr std::string_view unconvertible_unit = "unconvertible_unit";
inline constexpr std::string_view invalid_mapping = "invalid_mapping";
inline constexpr std::string_view invalid_source = "invalid_source";
inline constexpr std::string_view duplicate_batch = "duplicate_batch";
inline constexpr std::string_view dangling_reference = "dangling_reference";
inline constexpr std::string_view incomplete_key = "incomplete_key";
inline constexpr std::string_view empty_payload = "empty_payload";
inline constexpr std::string_view read_only = "read_only";
inline constexpr std::string_view schema_conflict = "schema_conflict";
inline constexpr std::string_view not_found = "not_found";
inline constexpr std::string_view io_error = "io_error";
inline constexpr std::string_view corrupt_catalog = "corrupt_catalog";
inline constexpr std::string_view unsupported_format = "unsupported_format";
inline constexpr std::string_view internal = "internal";
}  // namespace errc

// True for codes that describe an environment failure (disk, corruption)
// rather than a problem with the caller's input.
bool is_io_code(std::string_view code);

class Error : public std::runtime_error {
 public:
  Error(std::string_view code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace dwbus
