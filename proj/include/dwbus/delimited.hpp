#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Delimited text (CSV-like) reading and writing. A quoted field may contain
// the delimiter, line breaks and doubled quote characters.
namespace dwbus::delimited {

struct Dialect {
  char delimiter = ',';
  char quote = '"';
  bool header = true;
};

struct Provenance {
  std::string uri;
  std::size_t line = 0;  // 1-based physical line where the record starts

  bool operator==(const Provenance&) const = default;
};

struct RawRecord {
  std::vector<std::string> fields;
  Provenance provenance;
};

// One extracted data record, or the reason it could not be extracted.
struct Extracted {
  RawRecord record;
  std::optional<std::string> rejection;
};

// Streams records from `in`; memory use is bounded by the longest record.
class Reader {
 public:
  Reader(std::istream& in, Dialect dialect, std::string uri);

  // The header row when the dialect declares one (read on construction).
  const std::vector<std::string>& header() const { return header_; }

  // Next data record. Records whose field count differs from the header (or
  // from the first record when there is no header) are returned with a
  // rejection. Returns false at end of input.
  bool next(Extracted& out);

 private:
  bool read_record(RawRecord& rec, std::optional<std::string>& error);

  std::istream& in_;
  Dialect dialect_;
  std::string uri_;
  std::size_t line_ = 1;
  std::vector<std::string> header_;
  std::optional<std::size_t> width_;
};

// Quotes a field when it contains the delimiter, the quote, or a line break.
std::string quote_field(std::string_view field, const Dialect& dialect);

void write_row(std::ostream& out, std::span<const std::string> fields, const Dialect& dialect);

}  // namespace dwbus::delimited
