#include "dwbus/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "dwbus/dsl.hpp"
#include "dwbus/hash.hpp"

namespace dwbus::store {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::size_t kChecksumHexSize = 64;
const char* const kManifest = "manifest";
const char* const kManifestPrev = "manifest.prev";
const char* const kManifestTmp = "manifest.tmp";
const char* const kDocumentsSegment = "documents.seg";
const char* const kLinksSegment = "links.seg";

enum ValueTag : std::uint8_t { tag_null = 0, tag_integer = 1, tag_decimal = 2, tag_text = 3 };
enum MemberOp : std::uint8_t { op_insert = 1, op_update = 2 };

[[noreturn]] void io_fail(const std::string& what) {
  throw Error(errc::io_error, what + ": " + std::strerror(errno));
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(errc::corrupt_catalog, what); }

// --- little-endian record encoding -------------------------------------

class Encoder {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void value(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) {
      u8(tag_integer);
      u64(static_cast<std::uint64_t>(*i));
    } else if (const auto* d = std::get_if<double>(&v)) {
      u8(tag_decimal);
      std::uint64_t bits = 0;
      std::memcpy(&bits, d, sizeof(bits));
      u64(bits);
    } else if (const auto* s = std::get_if<std::string>(&v)) {
      u8(tag_text);
      str(*s);
    } else {
      u8(tag_null);
    }
  }
  void values(std::span<const Value> vs) {
    u32(static_cast<std::uint32_t>(vs.size()));
    for (const auto& v : vs) value(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Decoder {
 public:
  Decoder(std::string_view data, std::string where) : data_(data), where_(std::move(where)) {}

  bool done() const { return pos_ == data_.size(); }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Value value() {
    switch (u8()) {
      case tag_null: return Value{};
      case tag_integer: return Value{static_cast<std::int64_t>(u64())};
      case tag_decimal: {
        const auto bits = u64();
        double d = 0;
        std::memcpy(&d, &bits, sizeof(d));
        return Value{d};
      }
      case tag_text: return Value{str()};
      default: corrupt(where_ + ": unknown value tag");
    }
  }
  std::vector<Value> values() {
    const auto n = u32();
    if (n > data_.size()) corrupt(where_ + ": value count exceeds record size");
    std::vector<Value> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(value());
    return out;
  }
  // Splits the next length-prefixed record off the stream.
  std::string_view record() {
    const auto n = u32();
    need(n);
    auto r = data_.substr(pos_, n);
    pos_ += n;
    return r;
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) corrupt(where_ + ": truncated record");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string where_;
};

void frame(std::string& seg, const std::string& payload) {
  Encoder e;
  e.u32(static_cast<std::uint32_t>(payload.size()));
  seg += e.take();
  seg += payload;
}

std::string encode_member(std::uint8_t op, const DimensionMember& m) {
  Encoder e;
  e.u8(op);
  e.u64(m.key);
  e.values(m.values);
  return e.take();
}

std::string encode_fact(const FactRow& r) {
  Encoder e;
  e.u64(r.id);
  e.u32(static_cast<std::uint32_t>(r.keys.size()));
  for (auto k : r.keys) e.u64(k);
  e.values(r.measures);
  e.str(r.batch_id);
  return e.take();
}

std::string encode_document(const Document& d) {
  Encoder e;
  e.u64(d.id);
  e.str(d.media_type);
  e.str(d.checksum);
  e.u64(d.size);
  e.u32(static_cast<std::uint32_t>(d.attributes.size()));
  for (const auto& [k, v] : d.attributes) {
    e.str(k);
    e.str(v);
  }
  return e.take();
}

std::string encode_link(const DocumentLink& l) {
  Encoder e;
  e.str(l.fact);
  e.u64(l.row);
  e.u64(l.document);
  return e.take();
}

// --- files ---------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) io_fail("cannot read '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_all(int fd, std::string_view bytes, const fs::path& p) {
  while (!bytes.empty()) {
    const auto n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("cannot write '" + p.string() + "'");
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

// Writes `bytes` to `p` durably without publishing it under another name.
void write_durable(const fs::path& p, std::string_view bytes) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) io_fail("cannot create '" + p.string() + "'");
  try {
    write_all(fd, bytes, p);
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_fail("cannot sync '" + p.string() + "'");
  }
  ::close(fd);
}

void rename_durable(const fs::path& from, const fs::path& to) {
  if (::rename(from.c_str(), to.c_str()) != 0) io_fail("cannot rename '" + from.string() + "'");
  fsync_dir(to.parent_path());
}

void replace_file(const fs::path& p, std::string_view bytes) {
  const fs::path tmp = p.string() + ".tmp";
  write_durable(tmp, bytes);
  rename_durable(tmp, p);
}

// Truncates the segment to its committed length and appends `bytes`.
std::uint64_t append_segment(const fs::path& p, std::uint64_t committed, const std::string& bytes) {
  const int fd = ::open(p.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd < 0) io_fail("cannot open segment '" + p.string() + "'");
  std::string data;
  if (committed == 0) data.push_back(static_cast<char>(kFormatVersion));
  data += bytes;
  std::uint64_t len = 0;
  try {
    if (::ftruncate(fd, static_cast<off_t>(committed)) != 0) io_fail("cannot truncate '" + p.string() + "'");
    if (::lseek(fd, static_cast<off_t>(committed), SEEK_SET) < 0) io_fail("cannot seek '" + p.string() + "'");
    write_all(fd, data, p);
    if (::fsync(fd) != 0) io_fail("cannot sync '" + p.string() + "'");
    len = committed + data.size();
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  return len;
}

void truncate_to(const fs::path& p, std::uint64_t len) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return;
  if (len == 0) {
    fs::remove(p, ec);
    return;
  }
  if (fs::file_size(p, ec) > len) fs::resize_file(p, len, ec);
}

// --- manifest --------------------------------------------------------------

std::string frame_manifest(const json& body) {
  const std::string payload = body.dump();
  Encoder e;
  e.u8(kFormatVersion);
  e.u64(payload.size());
  std::string out = e.take();
  out += payload;
  out += sha256_hex(payload);
  return out;
}

// nullopt when the bytes are torn or fail their checksum.
std::optional<json> unframe_manifest(std::string_view bytes, const std::string& where) {
  if (bytes.empty()) return std::nullopt;
  const auto version = static_cast<std::uint8_t>(bytes[0]);
  if (version > kFormatVersion) {
    throw Error(errc::unsupported_format, where + ": format version " + std::to_string(version) +
                                              " is newer than supported version " +
                                              std::to_string(kFormatVersion));
  }
  if (version == 0 || bytes.size() < 1 + 8 + kChecksumHexSize) return std::nullopt;
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes[1 + i])) << (8 * i);
  if (bytes.size() != 1 + 8 + len + kChecksumHexSize) return std::nullopt;
  const auto payload = bytes.substr(9, len);
  if (sha256_hex(payload) != bytes.substr(9 + len)) return std::nullopt;
  try {
    return json::parse(payload);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

json metadata_to_json(const Metadata& m) {
  json intervals = json::array();
  for (const auto& ri : m.intervals) {
    intervals.push_back({{"code", ri.code},
                         {"lower", ri.lower},
                         {"upper", ri.upper},
                         {"context", mapping::format_context(ri.context)}});
  }
  return {{"analysis_dimension", m.analysis_dimension},
          {"patient_dimension", m.patient_dimension},
          {"intervals", intervals}};
}

Metadata metadata_from_json(const json& j) {
  Metadata m;
  m.analysis_dimension = j.value("analysis_dimension", m.analysis_dimension);
  m.patient_dimension = j.value("patient_dimension", m.patient_dimension);
  for (const auto& ri : j.value("intervals", json::array())) {
    m.intervals.push_back({ri.at("code").get<std::string>(), ri.at("lower").get<double>(),
                           ri.at("upper").get<double>(),
                           mapping::parse_context(ri.value("context", std::string{}))});
  }
  return m;
}

std::string schema_file_name(std::uint64_t version) { return "schema/v" + std::to_string(version) + ".dws"; }
std::string dim_segment(const std::string& name) { return "dims/" + name + ".seg"; }
std::string fact_segment(const std::string& name) { return "facts/" + name + ".seg"; }

bool measure_conforms(const Value& v, model::MeasureKind kind) {
  if (is_null(v)) return true;
  switch (kind) {
    case model::MeasureKind::decimal: return std::holds_alternative<double>(v);
    case model::MeasureKind::integer:
    case model::MeasureKind::document_ref: return std::holds_alternative<std::int64_t>(v);
    case model::MeasureKind::text: return std::holds_alternative<std::string>(v);
  }
  return false;
}

std::string natural_key_of(const model::Dimension& dim, const std::vector<Value>& values) {
  std::vector<Value> parts;
  for (const auto& k : dim.natural_key) parts.push_back(values[*dim.attribute_index(k)]);
  return encode_key(parts);
}

}  // namespace

std::string encode_key(std::span<const Value> parts) {
  std::string out;
  for (const auto& p : parts) {
    // Kind-tagged so "1" (text) and 1 (integer) stay distinct.
    out.push_back(static_cast<char>('0' + p.index()));
    out += render(p);
    out.push_back('\x1f');
  }
  return out;
}

const DimensionMember* DimensionTable::member(std::uint64_t key) const {
  if (key == 0 || key > members_.size()) return nullptr;
  return &members_[key - 1];
}

std::optional<std::uint64_t> DimensionTable::find(const std::string& encoded) const {
  auto it = index_.find(encoded);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void DimensionTable::insert(DimensionMember member, std::string encoded) {
  index_.emplace(std::move(encoded), member.key);
  members_.push_back(std::move(member));
}

void DimensionTable::update(std::uint64_t key, std::vector<Value> values) { members_[key - 1].values = std::move(values); }

const model::Schema& Snapshot::schema() const {
  if (!schema_) throw Error(errc::not_found, "catalog has no schema installed");
  return *schema_;
}

const DimensionTable& Snapshot::dimension(std::string_view name) const {
  auto it = dims_.find(name);
  if (it != dims_.end()) return *it->second;
  if (schema_ && schema_->dimension(name) != nullptr) {
    static const DimensionTable empty;
    return empty;
  }
  throw Error(errc::unknown_name, "unknown dimension '" + std::string(name) + "'");
}

const FactTableData& Snapshot::facts(std::string_view name) const {
  auto it = facts_.find(name);
  if (it != facts_.end()) return *it->second;
  if (schema_ && schema_->fact_table(name) != nullptr) {
    static const FactTableData empty;
    return empty;
  }
  throw Error(errc::unknown_name, "unknown fact table '" + std::string(name) + "'");
}

const Document* Snapshot::document(std::uint64_t id) const {
  if (id == 0 || id > docs_->documents.size()) return nullptr;
  return &docs_->documents[id - 1];
}

std::optional<std::uint64_t> Snapshot::find_document(const std::string& checksum,
                                                     const std::string& media_type) const {
  auto it = docs_->by_content.find({checksum, media_type});
  if (it == docs_->by_content.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint64_t> Snapshot::documents_of(std::string_view fact, std::uint64_t row) const {
  std::vector<std::uint64_t> out;
  for (const auto& l : docs_->links) {
    if (l.fact == fact && l.row == row) out.push_back(l.document);
  }
  return out;
}

std::size_t Snapshot::member_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : dims_) n += t->size();
  return n;
}

std::size_t Snapshot::fact_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : facts_) n += t->rows.size();
  return n;
}

std::vector<const FactRow*> scan_facts(const Snapshot& snap, std::string_view fact) {
  std::vector<const FactRow*> out;
  for (const auto& row : snap.facts(fact).rows) out.push_back(&row);
  return out;
}

// ---------------------------------------------------------------------------

struct Catalog::Impl {
  fs::path root;
  OpenMode mode = OpenMode::read;
  mutable std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap;
  std::mutex write_mu;
  std::string manifest_bytes;  // bytes of the committed manifest in use

  std::shared_ptr<const Snapshot> current() const {
    std::lock_guard<std::mutex> g(snap_mu);
    return snap;
  }
  void publish(std::shared_ptr<const Snapshot> s) {
    std::lock_guard<std::mutex> g(snap_mu);
    snap = std::move(s);
  }
};

// Reading the committed state.
struct CatalogAccess {
  static json manifest_json(const Snapshot& s) {
    json segments = json::object();
    for (const auto& [path, len] : s.segment_lengths_) segments[path] = len;
    return {{"format", kFormatVersion},
            {"generation", s.generation_},
            {"schema_file", s.schema_ ? json(schema_file_name(s.schema_->version)) : json(nullptr)},
            {"segments", segments},
            {"batches", *s.batches_},
            {"metadata", metadata_to_json(*s.metadata_)}};
  }

  static std::shared_ptr<Snapshot> load(const fs::path& root, const json& m) {
    auto snap = std::make_shared<Snapshot>();
    try {
      snap->generation_ = m.at("generation").get<std::uint64_t>();
      if (!m.at("schema_file").is_null()) {
        const auto file = root / m.at("schema_file").get<std::string>();
        auto parsed = dsl::parse_schema(dsl::SourceText{read_file(file), file.string()});
        if (!parsed.ok()) corrupt("stored schema '" + file.string() + "' does not parse");
        snap->schema_ = std::move(*parsed.schema);
      }
      snap->batches_ = std::make_shared<std::set<std::string>>(m.at("batches").get<std::set<std::string>>());
      snap->metadata_ = std::make_shared<Metadata>(metadata_from_json(m.at("metadata")));
      for (const auto& [path, len] : m.at("segments").items()) snap->segment_lengths_[path] = len.get<std::uint64_t>();
    } catch (const json::exception& e) {
      corrupt("manifest is malformed: " + std::string(e.what()));
    }

    auto docs = std::make_shared<DocumentStore>();
    for (const auto& [rel, len] : snap->segment_lengths_) {
      const auto path = root / rel;
      std::string bytes = read_file(path);
      if (bytes.size() < len) corrupt("segment '" + rel + "' is shorter than its committed length");
      if (len == 0) continue;
      if (static_cast<std::uint8_t>(bytes[0]) > kFormatVersion) {
        throw Error(errc::unsupported_format, "segment '" + rel + "' uses a newer format version");
      }
      Decoder stream(std::string_view(bytes).substr(1, len - 1), rel);
      if (rel.rfind("dims/", 0) == 0) {
        load_dimension(*snap, rel.substr(5, rel.size() - 9), stream, rel);
      } else if (rel.rfind("facts/", 0) == 0) {
        load_facts(*snap, rel.substr(6, rel.size() - 10), stream, rel);
      } else if (rel == kDocumentsSegment) {
        while (!stream.done()) {
          Decoder d(stream.record(), rel);
          Document doc;
          doc.id = d.u64();
          doc.media_type = d.str();
          doc.checksum = d.str();
          doc.size = d.u64();
          const auto n = d.u32();
          for (std::uint32_t i = 0; i < n; ++i) {
            auto k = d.str();
            doc.attributes[k] = d.str();
          }
          if (doc.id != docs->documents.size() + 1) corrupt(rel + ": document ids are not dense");
          docs->by_content[{doc.checksum, doc.media_type}] = doc.id;
          docs->documents.push_back(std::move(doc));
        }
      } else if (rel == kLinksSegment) {
        while (!stream.done()) {
          Decoder d(stream.record(), rel);
          DocumentLink l;
          l.fact = d.str();
          l.row = d.u64();
          l.document = d.u64();
          if (docs->link_set.insert(l).second) docs->links.push_back(std::move(l));
        }
      } else {
        corrupt("manifest names unknown segment '" + rel + "'");
      }
    }
    snap->docs_ = std::move(docs);
    return snap;
  }

  static void load_dimension(Snapshot& snap, const std::string& name, Decoder& stream, const std::string& rel) {
    if (!snap.schema_) corrupt(rel + ": data without a schema");
    const auto* dim = snap.schema_->dimension(name);
    if (dim == nullptr) corrupt(rel + ": dimension not in schema");
    auto table = std::make_shared<DimensionTable>();
    while (!stream.done()) {
      Decoder d(stream.record(), rel);
      const auto op = d.u8();
      DimensionMember m;
      m.key = d.u64();
      m.values = d.values();
      if (m.values.size() != dim->attributes.size()) corrupt(rel + ": member arity mismatch");
      if (op == op_insert) {
        if (m.key != table->size() + 1) corrupt(rel + ": member keys are not dense");
        auto nk = natural_key_of(*dim, m.values);
        table->insert(std::move(m), std::move(nk));
      } else if (op == op_update) {
        if (table->member(m.key) == nullptr) corrupt(rel + ": update of unknown member");
        table->update(m.key, std::move(m.values));
      } else {
        corrupt(rel + ": unknown member operation");
      }
    }
    snap.dims_[name] = std::move(table);
  }

  static void load_facts(Snapshot& snap, const std::string& name, Decoder& stream, const std::string& rel) {
    if (!snap.schema_ || snap.schema_->fact_table(name) == nullptr) corrupt(rel + ": fact table not in schema");
    auto table = std::make_shared<FactTableData>();
    while (!stream.done()) {
      Decoder d(stream.record(), rel);
      FactRow r;
      r.id = d.u64();
      const auto k = d.u32();
      for (std::uint32_t i = 0; i < k; ++i) r.keys.push_back(d.u64());
      r.measures = d.values();
      r.batch_id = d.str();
      if (r.id != table->rows.size() + 1) corrupt(rel + ": row ids are not dense");
      table->rows.push_back(std::move(r));
    }
    snap.facts_[name] = std::move(table);
  }
};

namespace {

struct LoadedState {
  std::shared_ptr<Snapshot> snap;
  std::string manifest_bytes;
};

// nullopt when neither manifest nor its predecessor exists.
std::optional<LoadedState> read_committed(const fs::path& root) {
  bool any = false;
  for (const char* name : {kManifest, kManifestPrev}) {
    const auto p = root / name;
    std::error_code ec;
    if (!fs::exists(p, ec)) continue;
    any = true;
    std::string bytes = read_file(p);
    auto body = unframe_manifest(bytes, p.string());
    if (!body) continue;
    return LoadedState{CatalogAccess::load(root, *body), std::move(bytes)};
  }
  if (any) corrupt("catalog '" + root.string() + "': manifest is corrupt and has no intact predecessor");
  return std::nullopt;
}

}  // namespace

Catalog::Catalog(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Catalog::Catalog(Catalog&&) noexcept = default;
Catalog& Catalog::operator=(Catalog&&) noexcept = default;
Catalog::~Catalog() = default;

const fs::path& Catalog::root() const { return impl_->root; }
OpenMode Catalog::mode() const { return impl_->mode; }
std::shared_ptr<const Snapshot> Catalog::snapshot() const { return impl_->current(); }

Catalog Catalog::open(const fs::path& root, OpenMode mode) {
  auto impl = std::make_unique<Impl>();
  impl->root = root;
  impl->mode = mode;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    if (mode == OpenMode::read) throw Error(errc::io_error, "no catalog at '" + root.string() + "'");
    fs::create_directories(root, ec);
    if (ec) throw Error(errc::io_error, "cannot create catalog '" + root.string() + "': " + ec.message());
  }
  auto state = read_committed(root);
  if (!state) {
    if (mode == OpenMode::read) throw Error(errc::io_error, "no catalog at '" + root.string() + "'");
    auto snap = std::make_shared<Snapshot>();
    const auto bytes = frame_manifest(CatalogAccess::manifest_json(*snap));
    replace_file(root / kManifest, bytes);
    state = LoadedState{std::move(snap), bytes};
  }
  impl->manifest_bytes = std::move(state->manifest_bytes);
  impl->snap = std::move(state->snap);
  return Catalog(std::move(impl));
}

std::shared_ptr<const Snapshot> Catalog::refresh() {
  auto state = read_committed(impl_->root);
  if (!state) throw Error(errc::io_error, "catalog '" + impl_->root.string() + "' disappeared");
  std::lock_guard<std::mutex> g(impl_->write_mu);
  impl_->manifest_bytes = std::move(state->manifest_bytes);
  impl_->publish(state->snap);
  return state->snap;
}

std::string Catalog::read_blob(const Document& doc) const {
  const auto p = impl_->root / "blobs" / doc.checksum;
  std::string bytes = read_file(p);
  if (sha256_hex(bytes) != doc.checksum) corrupt("blob '" + doc.checksum + "' fails its checksum");
  return bytes;
}

struct Catalog::Writer::Lock {
  std::unique_lock<std::mutex> guard;
  int fd = -1;
  ~Lock() {
    if (fd >= 0) {
      ::flock(fd, LOCK_UN);
      ::close(fd);
    }
  }
};

Catalog::Writer::Writer(Catalog& catalog, std::unique_ptr<Lock> lock)
    : catalog_(&catalog), lock_(std::move(lock)), base_(catalog.snapshot()) {}
Catalog::Writer::Writer(Writer&&) noexcept = default;
Catalog::Writer::~Writer() = default;

Catalog::Writer Catalog::begin_write() {
  if (impl_->mode != OpenMode::read_write) {
    throw Error(errc::read_only, "catalog '" + impl_->root.string() + "' is open read-only");
  }
  auto lock = std::make_unique<Writer::Lock>();
  lock->guard = std::unique_lock<std::mutex>(impl_->write_mu);
  const auto lock_path = impl_->root / "LOCK";
  lock->fd = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
  if (lock->fd < 0) io_fail("cannot open '" + lock_path.string() + "'");
  while (::flock(lock->fd, LOCK_EX) != 0) {
    if (errno != EINTR) io_fail("cannot lock '" + lock_path.string() + "'");
  }

  // Another process may have committed since we last looked.
  std::string on_disk;
  std::error_code ec;
  if (fs::exists(impl_->root / kManifest, ec)) on_disk = read_file(impl_->root / kManifest);
  if (on_disk != impl_->manifest_bytes) {
    if (auto state = read_committed(impl_->root)) {
      impl_->manifest_bytes = std::move(state->manifest_bytes);
      impl_->publish(state->snap);
    }
  }

  // Drop whatever an interrupted install left past the committed lengths.
  const auto snap = impl_->current();
  for (const char* dir : {"dims", "facts"}) {
    if (!fs::is_directory(impl_->root / dir, ec)) continue;
    for (const auto& entry : fs::directory_iterator(impl_->root / dir)) {
      const auto rel = std::string(dir) + "/" + entry.path().filename().string();
      auto it = snap->segment_lengths_.find(rel);
      truncate_to(entry.path(), it == snap->segment_lengths_.end() ? 0 : it->second);
    }
  }
  for (const char* rel : {kDocumentsSegment, kLinksSegment}) {
    auto it = snap->segment_lengths_.find(rel);
    truncate_to(impl_->root / rel, it == snap->segment_lengths_.end() ? 0 : it->second);
  }
  return Writer(*this, std::move(lock));
}

std::shared_ptr<const Snapshot> Catalog::Writer::install(StagedBatch batch, InstallOptions options) {
  Impl& impl = *catalog_->impl_;
  const Snapshot& base = *base_;

  if (batch.batch_id.empty()) throw Error(errc::bad_request, "batch id must not be empty");
  if (base.has_batch(batch.batch_id)) {
    throw Error(errc::duplicate_batch, "batch " + batch.batch_id + " is already installed");
  }

  auto next = std::make_shared<Snapshot>(base);
  next->generation_ = base.generation_ + 1;
  std::map<std::string, std::string> appends;  // segment path -> framed records
  bool schema_changed = false;

  if (batch.schema) {
    auto report = model::validate_schema(*batch.schema);
    if (!report.ok()) throw model::SchemaInvalid(std::move(report));
    if (base.schema_) {
      const auto& old = *base.schema_;
      if (batch.schema->version != old.version + 1) {
        throw Error(errc::schema_conflict, "schema version must advance from " + std::to_string(old.version) +
                                               " to " + std::to_string(old.version + 1));
      }
      for (const auto& d : old.dimensions) {
        const auto* nd = batch.schema->dimension(d.name);
        if (nd == nullptr || !(*nd == d)) {
          throw Error(errc::schema_conflict, "schema change alters existing dimension '" + d.name + "'");
        }
      }
      for (const auto& f : old.fact_tables) {
        const auto* nf = batch.schema->fact_table(f.name);
        if (nf == nullptr || !(*nf == f)) {
          throw Error(errc::schema_conflict, "schema change alters existing fact table '" + f.name + "'");
        }
      }
    }
    next->schema_ = *batch.schema;
    schema_changed = true;
  }
  if (batch.metadata) next->metadata_ = std::make_shared<Metadata>(std::move(*batch.metadata));

  const bool has_data = !batch.members.empty() || !batch.facts.empty() || !batch.documents.empty() ||
                        !batch.links.empty();
  if (has_data && !next->schema_) throw Error(errc::bad_request, "catalog has no schema installed");

  for (auto& [name, writes] : batch.members) {
    const auto* dim = next->schema_->dimension(name);
    if (dim == nullptr) throw Error(errc::unknown_name, "unknown dimension '" + name + "'");
    auto table = std::make_shared<DimensionTable>(next->dimension(name));
    std::string& seg = appends[dim_segment(name)];
    for (auto& w : writes) {
      auto& m = w.member;
      if (m.values.size() != dim->attributes.size()) {
        throw Error(errc::bad_request, "member of '" + name + "' has the wrong number of attributes");
      }
      for (std::size_t i = 0; i < m.values.size(); ++i) {
        if (!conforms(m.values[i], dim->attributes[i].kind)) {
          throw Error(errc::bad_request,
                      "attribute '" + dim->attributes[i].name + "' of '" + name + "' has the wrong kind");
        }
      }
      for (const auto& k : dim->natural_key) {
        if (is_null(m.values[*dim->attribute_index(k)])) {
          throw Error(errc::incomplete_key, "member of '" + name + "' lacks natural key part '" + k + "'");
        }
      }
      auto nk = natural_key_of(*dim, m.values);
      if (w.insert) {
        if (m.key != table->size() + 1) throw Error(errc::bad_request, "member keys of '" + name + "' must be dense");
        if (table->find(nk)) throw Error(errc::bad_request, "duplicate natural key in '" + name + "'");
        frame(seg, encode_member(op_insert, m));
        table->insert(m, std::move(nk));
      } else {
        const auto* existing = table->member(m.key);
        if (existing == nullptr) throw Error(errc::dangling_reference, "update of unknown member of '" + name + "'");
        if (natural_key_of(*dim, existing->values) != nk) {
          throw Error(errc::bad_request, "an update may not change the natural key of '" + name + "'");
        }
        frame(seg, encode_member(op_update, m));
        table->update(m.key, m.values);
      }
    }
    next->dims_[name] = std::move(table);
  }

  std::shared_ptr<DocumentStore> docs;
  if (!batch.documents.empty() || !batch.links.empty()) docs = std::make_shared<DocumentStore>(*base.docs_);
  for (auto& sd : batch.documents) {
    auto& d = sd.record;
    if (sd.payload.empty()) throw Error(errc::empty_payload, "document payload is empty");
    const auto sum = sha256_hex(sd.payload);
    if (d.checksum.empty()) d.checksum = sum;
    if (d.checksum != sum) throw Error(errc::bad_request, "document checksum does not match its payload");
    d.size = sd.payload.size();
    if (d.id != docs->documents.size() + 1) throw Error(errc::bad_request, "document ids must be dense");
    if (!docs->by_content.emplace(std::make_pair(d.checksum, d.media_type), d.id).second) {
      throw Error(errc::bad_request, "document " + d.checksum + " is already stored");
    }
    frame(appends[kDocumentsSegment], encode_document(d));
    docs->documents.push_back(d);
  }

  for (auto& [name, rows] : batch.facts) {
    const auto* fact = next->schema_->fact_table(name);
    if (fact == nullptr) throw Error(errc::unknown_name, "unknown fact table '" + name + "'");
    auto table = std::make_shared<FactTableData>(next->facts(name));
    std::string& seg = appends[fact_segment(name)];
    for (auto& r : rows) {
      if (r.id != table->rows.size() + 1) throw Error(errc::bad_request, "row ids of '" + name + "' must be dense");
      if (r.keys.size() != fact->grain.size()) {
        throw Error(errc::bad_request, "row of '" + name + "' has the wrong number of keys");
      }
      for (std::size_t i = 0; i < r.keys.size(); ++i) {
        if (next->dimension(fact->grain[i].dimension).member(r.keys[i]) == nullptr) {
          throw Error(errc::dangling_reference, "row of '" + name + "' references unknown member " +
                                                    std::to_string(r.keys[i]) + " of '" +
                                                    fact->grain[i].dimension + "'");
        }
      }
      if (r.measures.size() != fact->measures.size()) {
        throw Error(errc::bad_request, "row of '" + name + "' has the wrong number of measures");
      }
      for (std::size_t i = 0; i < r.measures.size(); ++i) {
        if (!measure_conforms(r.measures[i], fact->measures[i].kind)) {
          throw Error(errc::bad_request, "measure '" + fact->measures[i].name + "' has the wrong kind");
        }
        if (fact->measures[i].kind == model::MeasureKind::document_ref && !is_null(r.measures[i])) {
          const auto id = static_cast<std::uint64_t>(std::get<std::int64_t>(r.measures[i]));
          const auto& known = docs ? docs->documents : base.docs_->documents;
          if (id == 0 || id > known.size()) throw Error(errc::dangling_reference, "unknown document reference");
        }
      }
      r.batch_id = batch.batch_id;
      frame(seg, encode_fact(r));
      table->rows.push_back(std::move(r));
    }
    next->facts_[name] = std::move(table);
  }

  for (auto& l : batch.links) {
    const auto* fact = next->schema_->fact_table(l.fact);
    if (fact == nullptr) throw Error(errc::unknown_name, "unknown fact table '" + l.fact + "'");
    if (l.row == 0 || l.row > next->facts(l.fact).rows.size()) {
      throw Error(errc::dangling_reference, "link names unknown row " + std::to_string(l.row) + " of '" + l.fact + "'");
    }
    if (l.document == 0 || l.document > docs->documents.size()) {
      throw Error(errc::dangling_reference, "link names unknown document " + std::to_string(l.document));
    }
    if (!docs->link_set.insert(l).second) continue;
    frame(appends[kLinksSegment], encode_link(l));
    docs->links.push_back(l);
  }
  if (docs) next->docs_ = std::move(docs);

  auto batches = std::make_shared<std::set<std::string>>(*base.batches_);
  batches->insert(batch.batch_id);
  next->batches_ = std::move(batches);

  // Durable part. Data first, manifest last.
  const fs::path& root = impl.root;
  std::vector<std::pair<fs::path, std::uint64_t>> touched;
  try {
    std::error_code ec;
    for (const char* dir : {"dims", "facts", "blobs", "schema"}) fs::create_directories(root / dir, ec);
    if (schema_changed) replace_file(root / schema_file_name(next->schema_->version), dsl::serialize_schema(*next->schema_));
    for (const auto& sd : batch.documents) {
      const auto blob = root / "blobs" / sd.record.checksum;
      if (!fs::exists(blob, ec)) replace_file(blob, sd.payload);
    }
    for (const auto& [rel, bytes] : appends) {
      if (bytes.empty()) continue;
      auto it = base.segment_lengths_.find(rel);
      const std::uint64_t committed = it == base.segment_lengths_.end() ? 0 : it->second;
      touched.emplace_back(root / rel, committed);
      next->segment_lengths_[rel] = append_segment(root / rel, committed, bytes);
    }
    if (options.fault == FaultPoint::after_segment_write) throw SimulatedCrash();

    const auto manifest = frame_manifest(CatalogAccess::manifest_json(*next));
    write_durable(root / kManifestTmp, manifest);
    replace_file(root / kManifestPrev, impl.manifest_bytes);
    if (options.fault == FaultPoint::before_manifest_rename) throw SimulatedCrash();
    rename_durable(root / kManifestTmp, root / kManifest);
    impl.manifest_bytes = manifest;
  } catch (const SimulatedCrash&) {
    throw;
  } catch (...) {
    for (const auto& [p, len] : touched) truncate_to(p, len);
    throw;
  }

  std::shared_ptr<const Snapshot> published = next;
  impl.publish(published);
  base_ = published;
  return published;
}

}  // namespace dwbus::store
