#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dwbus/model.hpp"

// Text form of a schema (`.dws` files).
//
//   schema medical {
//     version 1
//     dimension time {
//       attribute date date
//       attribute session text
//       naturalkey date session
//       hierarchy calendar {
//         level session date session
//         level day date
//       }
//     }
//     fact biometrical {
//       grain time session
//       measure value decimal additive
//     }
//     group cardio-vascular {
//       central cardio-report
//       satellite cardio-result
//       documents many-to-many
//     }
//   }
//
// Statements are line-oriented: one statement per line, `{` ends the line
// that opens a block and `}` stands alone on the line that closes it.
// `#` starts a comment.
namespace dwbus::dsl {

struct SourceText {
  std::string text;
  std::string origin = "<inline>";
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
  std::string message;     // starts with "lexical error:", "syntax error:",
                           // "duplicate declaration:", "dangling reference:"
                           // or "invalid schema:"

  // "origin:line:column: message"
  std::string format(const std::string& origin) const;
};

struct ParseResult {
  std::optional<model::Schema> schema;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return schema.has_value(); }
};

// Never throws on malformed input; every failure is a diagnostic.
ParseResult parse_schema(const SourceText& src);

// Canonical text: dimensions, then facts, then groups, each sorted by name;
// two-space indentation; one attribute per line. Throws model::SchemaInvalid
// for schemas that do not validate.
std::string serialize_schema(const model::Schema& schema);

// Reads a file and parses it; I/O failures throw Error(io_error).
ParseResult parse_schema_file(const std::string& path);

}  // namespace dwbus::dsl
