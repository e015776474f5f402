#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dwbus/delimited.hpp"
#include "dwbus/mapping.hpp"
#include "dwbus/model.hpp"
#include "dwbus/store.hpp"

// Extraction of delimited sources, harmonisation through the mapping rules,
// surrogate-key resolution and atomic batch loading.
namespace dwbus::etl {

enum class DateFormat { iso, dmy };

// Columns are referenced by header name or by 1-based position ("#3").
struct SourceDescriptor {
  std::string name;
  std::filesystem::path uri;
  delimited::Dialect dialect;
  std::string target_fact;
  DateFormat date_format = DateFormat::iso;

  // Natural key of the data-provider member this source comes from, and
  // any further constant attributes of that member.
  std::string provider;
  std::map<std::string, std::string> provider_attributes;

  std::string label_column;
  std::string value_column;
  std::string unit_column;
  std::string timestamp_column;
  std::string session_column;
  std::string documents_column;  // '|'-separated paths relative to the source file
  std::string document_media_type = "application/octet-stream";

  std::string value_measure = "value";
  std::map<std::string, std::string> measure_columns;                            // measure -> column
  std::map<std::string, std::map<std::string, std::string>> dimension_columns;  // dimension -> attribute -> column

  std::string analysis_dimension = "medical-analysis";
  std::string provider_dimension = "data-provider";
  std::string time_dimension = "time";
};

// Problems that make the descriptor unusable against `schema`: unknown target,
// unknown dimensions or attributes, natural-key parts with no column.
std::vector<std::string> check_source(const SourceDescriptor& src, const model::Schema& schema);

// Streams the data records of a source file.
class RowStream {
 public:
  // Throws Error(io_error) when the file cannot be opened.
  explicit RowStream(const SourceDescriptor& src);
  RowStream(const RowStream&) = delete;
  RowStream& operator=(const RowStream&) = delete;
  const std::vector<std::string>& header() const { return reader_->header(); }
  bool next(delimited::Extracted& out) { return reader_->next(out); }

 private:
  std::ifstream in_;
  std::unique_ptr<delimited::Reader> reader_;
};

RowStream extract_rows(const SourceDescriptor& src);

// sha256(uri '\0' content '\0' target_fact), hashing the file in chunks.
std::string batch_id(const SourceDescriptor& src);

using Attributes = std::map<std::string, Value>;

// Accumulates one batch against a base snapshot: new and updated members,
// fact rows, documents and links. Nothing is visible until installed.
class Stager {
 public:
  Stager(const store::Snapshot& base, std::string batch_id);

  // Surrogate key of the member with this natural key, inserting it when
  // new. Non-null values in `attrs` that differ from the stored ones
  // overwrite them (type 1) and count as one update.
  std::uint64_t resolve_dimension_member(const std::string& dimension, const Attributes& natural_key,
                                         const Attributes& attrs = {});

  // Content-addressed: the same (checksum, media type) yields the same id.
  std::uint64_t load_document(std::string payload, const std::string& media_type,
                              std::map<std::string, std::string> attrs = {});

  std::uint64_t append_fact(const std::string& fact, std::vector<std::uint64_t> keys, std::vector<Value> measures);

  // Duplicate links are no-ops.
  store::DocumentLink link_document(const std::string& fact, std::uint64_t row, std::uint64_t document);

  const std::map<std::string, std::size_t>& members_created() const { return created_; }
  const std::map<std::string, std::size_t>& members_updated() const { return updated_; }
  std::size_t documents_stored() const { return batch_.documents.size(); }
  std::size_t links_created() const { return batch_.links.size(); }

  store::StagedBatch& batch() { return batch_; }
  store::StagedBatch take() { return std::move(batch_); }

 private:
  struct Pending {
    bool staged_insert = false;
    std::size_t write_index = 0;
  };

  const store::Snapshot& base_;
  store::StagedBatch batch_;
  std::map<std::string, std::map<std::string, std::uint64_t>> new_keys_;  // dimension -> encoded key -> key
  std::map<std::string, std::map<std::uint64_t, Pending>> pending_;        // dimension -> key -> write
  std::map<std::string, std::size_t> created_;
  std::map<std::string, std::size_t> updated_;
  std::set<store::DocumentLink> staged_links_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> staged_docs_;
};

struct Rejection {
  delimited::Provenance provenance;
  std::string code;
  std::string reason;
};

struct LoadReport {
  std::string source;
  std::string target_fact;
  std::string batch_id;
  std::size_t records_read = 0;
  std::size_t accepted = 0;
  std::vector<Rejection> rejected;
  std::map<std::string, std::size_t> members_created;
  std::map<std::string, std::size_t> members_updated;
  std::size_t documents_stored = 0;
  std::size_t links_created = 0;
  bool duplicate = false;  // set by load_manifest instead of throwing
};

// Harmonisation inputs shared by all sources of a load.
struct LoadContext {
  mapping::MappingRules rules;
  // Analysis code -> further attributes of its member (e.g. examination).
  std::map<std::string, std::map<std::string, std::string>> analysis_attributes;
  // Installed along with the batch when it differs from the catalog's.
  std::optional<store::Metadata> metadata;
};

// Loads one source as one atomic batch. Throws Error(duplicate_batch) when
// the batch is already installed, Error(invalid_source) for an unusable
// descriptor; record-level problems become rejections.
LoadReport load_facts(const SourceDescriptor& src, const LoadContext& ctx, store::Catalog& catalog,
                      store::InstallOptions options = {});

// Installs `schema` when the catalog has none or holds its predecessor.
// Returns false when the catalog already holds an equal schema; throws
// Error(schema_conflict) otherwise.
bool install_schema(const model::Schema& schema, store::Catalog& catalog);

// sources.manifest: INI-style sections. [mapping] names the rule files;
// each [source NAME] section describes one source.
struct LoadManifest {
  mapping::MappingFiles mapping_files;
  std::filesystem::path analysis_attributes;
  std::string analysis_dimension = "medical-analysis";
  std::string patient_dimension = "patient";
  std::vector<SourceDescriptor> sources;
};

// Relative paths are resolved against the manifest's directory. Throws
// Error(invalid_source) with a line number on malformed input.
LoadManifest parse_manifest(const std::filesystem::path& path);

LoadContext load_context(const LoadManifest& manifest);

// Loads every source in order. A source whose batch is already installed
// is reported with duplicate = true.
std::vector<LoadReport> load_manifest(const LoadManifest& manifest, store::Catalog& catalog);

// Helpers exposed for tests.
std::optional<std::string> parse_date(std::string_view text, DateFormat format);
std::optional<std::string> normalize_session(std::string_view text);

}  // namespace dwbus::etl
