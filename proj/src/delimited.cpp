#include "dwbus/delimited.hpp"

namespace dwbus::delimited {

Reader::Reader(std::istream& in, Dialect dialect, std::string uri)
    : in_(in), dialect_(dialect), uri_(std::move(uri)) {
  // UTF-8 byte-order mark.
  if (in_.peek() == 0xEF) {
    char bom[3];
    in_.read(bom, 3);
    if (!(in_.gcount() == 3 && static_cast<unsigned char>(bom[1]) == 0xBB &&
          static_cast<unsigned char>(bom[2]) == 0xBF)) {
      in_.clear();
      in_.seekg(0);
    }
  }
  if (dialect_.header) {
    RawRecord rec;
    std::optional<std::string> error;
    if (read_record(rec, error)) {
      header_ = std::move(rec.fields);
      for (auto& h : header_) {
        while (!h.empty() && (h.back() == ' ' || h.back() == '\t')) h.pop_back();
        while (!h.empty() && (h.front() == ' ' || h.front() == '\t')) h.erase(h.begin());
      }
      width_ = header_.size();
    }
  }
}

bool Reader::read_record(RawRecord& rec, std::optional<std::string>& error) {
  rec.fields.clear();
  rec.provenance = Provenance{uri_, line_};
  error.reset();

  int c = in_.get();
  if (c == std::char_traits<char>::eof()) return false;

  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  for (;;) {
    if (c == std::char_traits<char>::eof()) {
      if (in_quotes) error = "unterminated quoted field";
      rec.fields.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == dialect_.quote) {
        if (in_.peek() == static_cast<unsigned char>(dialect_.quote)) {
          field.push_back(ch);
          in_.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
    } else if (ch == dialect_.delimiter) {
      rec.fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && in_.peek() == '\n') in_.get();
      ++line_;
      rec.fields.push_back(std::move(field));
      return true;
    } else if (ch == dialect_.quote && field.empty() && !was_quoted) {
      in_quotes = true;
      was_quoted = true;
    } else {
      field.push_back(ch);
    }
    c = in_.get();
  }
}

bool Reader::next(Extracted& out) {
  for (;;) {
    if (!read_record(out.record, out.rejection)) return false;
    // A blank line carries no data.
    if (out.record.fields.size() == 1 && out.record.fields[0].empty() && !out.rejection) continue;
    if (!out.rejection) {
      if (!width_) width_ = out.record.fields.size();
      if (out.record.fields.size() != *width_) {
        out.rejection = "ragged row: expected " + std::to_string(*width_) + " fields, found " +
                        std::to_string(out.record.fields.size());
      }
    }
    return true;
  }
}

std::string quote_field(std::string_view field, const Dialect& dialect) {
  const bool needs = field.find(dialect.delimiter) != std::string_view::npos ||
                     field.find(dialect.quote) != std::string_view::npos ||
                     field.find('\n') != std::string_view::npos || field.find('\r') != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back(dialect.quote);
  for (char ch : field) {
    if (ch == dialect.quote) out.push_back(ch);
    out.push_back(ch);
  }
  out.push_back(dialect.quote);
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields, const Dialect& dialect) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.put(dialect.delimiter);
    out << quote_field(fields[i], dialect);
  }
  out.put('\n');
}

}  // namespace dwbus::delimited
