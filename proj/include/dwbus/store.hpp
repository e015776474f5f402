#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dwbus/error.hpp"
#include "dwbus/mapping.hpp"
#include "dwbus/model.hpp"
#include "dwbus/value.hpp"

// Persistent catalog. On-disk layout under the root directory:
//
//   manifest, manifest.prev    committed state and its predecessor
//   schema/v<N>.dws            installed schema versions
//   dims/<dimension>.seg       append-only member records
//   facts/<fact>.seg           append-only fact rows
//   documents.seg, links.seg   document records and report/document bridge
//   blobs/<sha256>             document payloads, content addressed
//
// The manifest records the committed byte length of every segment; bytes
// past that length belong to an uncommitted install and are ignored. See
// docs/storage-format.md for the bit-level layout.
namespace dwbus::store {

inline constexpr std::uint8_t kFormatVersion = 1;

enum class OpenMode { read, read_write };

struct DimensionMember {
  std::uint64_t key = 0;
  std::vector<Value> values;  // aligned with the dimension's attributes

  bool operator==(const DimensionMember&) const = default;
};

// Natural-key lookup encoding shared by the store and the ETL stager.
std::string encode_key(std::span<const Value> parts);

class DimensionTable {
 public:
  std::size_t size() const { return members_.size(); }
  const std::vector<DimensionMember>& members() const { return members_; }
  // Keys are dense: member(k) is members()[k - 1].
  const DimensionMember* member(std::uint64_t key) const;
  std::optional<std::uint64_t> find(const std::string& encoded_natural_key) const;

  void insert(DimensionMember member, std::string encoded_natural_key);
  void update(std::uint64_t key, std::vector<Value> values);

 private:
  std::vector<DimensionMember> members_;
  std::unordered_map<std::string, std::uint64_t> index_;
};

struct FactRow {
  std::uint64_t id = 0;              // dense per fact table, from 1
  std::vector<std::uint64_t> keys;   // surrogate key per grain entry
  std::vector<Value> measures;       // aligned with the fact's measures
  std::string batch_id;

  bool operator==(const FactRow&) const = default;
};

struct FactTableData {
  std::vector<FactRow> rows;
};

struct Document {
  std::uint64_t id = 0;
  std::string media_type;
  std::string checksum;  // SHA-256, hex
  std::uint64_t size = 0;
  std::map<std::string, std::string> attributes;

  bool operator==(const Document&) const = default;
};

struct DocumentLink {
  std::string fact;
  std::uint64_t row = 0;
  std::uint64_t document = 0;

  auto operator<=>(const DocumentLink&) const = default;
};

struct DocumentStore {
  std::vector<Document> documents;
  std::map<std::pair<std::string, std::string>, std::uint64_t> by_content;  // (checksum, media type)
  std::vector<DocumentLink> links;
  std::set<DocumentLink> link_set;
};

// Analysis-time metadata kept with the catalog.
struct Metadata {
  std::vector<mapping::ReferenceInterval> intervals;
  std::string analysis_dimension = "medical-analysis";
  std::string patient_dimension = "patient";

  bool operator==(const Metadata&) const = default;
};

// Immutable view of one committed catalog state.
class Snapshot {
 public:
  std::uint64_t generation() const { return generation_; }
  bool has_schema() const { return schema_.has_value(); }
  // Throws Error(not_found) when no schema has been installed.
  const model::Schema& schema() const;
  std::uint64_t schema_version() const { return schema_ ? schema_->version : 0; }

  // Tables declared by the schema but never written are empty. Undeclared
  // names throw Error(unknown_name).
  const DimensionTable& dimension(std::string_view name) const;
  const FactTableData& facts(std::string_view name) const;

  const std::vector<Document>& documents() const { return docs_->documents; }
  const Document* document(std::uint64_t id) const;
  std::optional<std::uint64_t> find_document(const std::string& checksum, const std::string& media_type) const;
  const std::vector<DocumentLink>& links() const { return docs_->links; }
  bool has_link(const DocumentLink& link) const { return docs_->link_set.count(link) > 0; }
  std::vector<std::uint64_t> documents_of(std::string_view fact, std::uint64_t row) const;

  bool has_batch(const std::string& batch_id) const { return batches_->count(batch_id) > 0; }
  std::size_t batch_count() const { return batches_->size(); }
  const Metadata& metadata() const { return *metadata_; }

  std::size_t member_count() const;
  std::size_t fact_count() const;

 private:
  friend class Catalog;
  friend struct CatalogAccess;

  std::uint64_t generation_ = 0;
  std::optional<model::Schema> schema_;
  std::map<std::string, std::shared_ptr<const DimensionTable>, std::less<>> dims_;
  std::map<std::string, std::shared_ptr<const FactTableData>, std::less<>> facts_;
  std::shared_ptr<const DocumentStore> docs_ = std::make_shared<DocumentStore>();
  std::shared_ptr<const std::set<std::string>> batches_ = std::make_shared<std::set<std::string>>();
  std::shared_ptr<const Metadata> metadata_ = std::make_shared<Metadata>();
  std::map<std::string, std::uint64_t> segment_lengths_;
};

// Rows of `fact` satisfying `pred`, in storage order.
template <typename Pred, typename Sink>
void scan_facts(const Snapshot& snap, std::string_view fact, Pred&& pred, Sink&& sink) {
  for (const auto& row : snap.facts(fact).rows) {
    if (pred(row)) sink(row);
  }
}

std::vector<const FactRow*> scan_facts(const Snapshot& snap, std::string_view fact);

struct MemberWrite {
  bool insert = true;  // false: type-1 overwrite of an existing member
  DimensionMember member;
};

struct StagedDocument {
  Document record;
  std::string payload;
};

// Everything one install makes visible at once.
struct StagedBatch {
  std::string batch_id;
  std::optional<model::Schema> schema;
  std::optional<Metadata> metadata;
  std::map<std::string, std::vector<MemberWrite>> members;
  std::map<std::string, std::vector<FactRow>> facts;
  std::vector<StagedDocument> documents;
  std::vector<DocumentLink> links;
};

// Test hook: stop an install at a given point as if the process died.
enum class FaultPoint { none, after_segment_write, before_manifest_rename };

struct InstallOptions {
  FaultPoint fault = FaultPoint::none;
};

class SimulatedCrash : public std::runtime_error {
 public:
  SimulatedCrash() : std::runtime_error("simulated crash during install") {}
};

class Catalog {
 public:
  // Read mode requires an existing catalog. Read-write mode initialises an
  // empty catalog when the root holds none. A torn manifest falls back to
  // its intact predecessor.
  static Catalog open(const std::filesystem::path& root, OpenMode mode);

  Catalog(Catalog&&) noexcept;
  Catalog& operator=(Catalog&&) noexcept;
  ~Catalog();

  const std::filesystem::path& root() const;
  OpenMode mode() const;

  std::shared_ptr<const Snapshot> snapshot() const;

  // Re-reads the committed state from disk (picks up other processes' writes).
  std::shared_ptr<const Snapshot> refresh();

  // Document payload; verifies the checksum (Error(corrupt_catalog)).
  std::string read_blob(const Document& doc) const;

  // Exclusive write session. Holds the in-process writer mutex and an
  // advisory lock on the catalog directory until destroyed.
  class Writer {
   public:
    Writer(Writer&&) noexcept;
    ~Writer();

    const Snapshot& base() const { return *base_; }

    // All-or-nothing: on any failure the catalog stays at the prior
    // snapshot. Throws Error(duplicate_batch) for a registered batch id.
    std::shared_ptr<const Snapshot> install(StagedBatch batch, InstallOptions options = {});

   private:
    friend class Catalog;
    struct Lock;
    Writer(Catalog& catalog, std::unique_ptr<Lock> lock);

    Catalog* catalog_;
    std::unique_ptr<Lock> lock_;
    std::shared_ptr<const Snapshot> base_;
  };

  // Throws Error(read_only) in read mode.
  Writer begin_write();

 private:
  struct Impl;
  explicit Catalog(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace dwbus::store
