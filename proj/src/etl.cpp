#include "dwbus/etl.hpp"

#include <cmath>
#include <sstream>

#include "dwbus/dsl.hpp"
#include "dwbus/hash.hpp"

namespace dwbus::etl {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(errc::io_error, "cannot read '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string media_type_for(const fs::path& p, const std::string& fallback) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".pdf") return "application/pdf";
  if (ext == ".txt") return "text/plain";
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".dcm") return "application/dicom";
  if (ext == ".mp4") return "video/mp4";
  return fallback;
}

Value typed(const std::string& text, ValueKind kind, const std::string& what) {
  auto v = parse_value(text, kind);
  if (!v) {
    throw Error(errc::invalid_literal, "'" + text + "' is not a valid " + std::string(to_string(kind)) + " for " + what);
  }
  return *v;
}

// Column references resolved against one file's header.
class Columns {
 public:
  explicit Columns(const std::vector<std::string>& header) : header_(header) {}

  std::optional<std::size_t> resolve(const std::string& ref) const {
    if (ref.empty()) return std::nullopt;
    if (ref[0] == '#') {
      auto n = parse_integer(std::string_view(ref).substr(1));
      if (!n || *n < 1) throw Error(errc::invalid_source, "bad column position '" + ref + "'");
      return static_cast<std::size_t>(*n - 1);
    }
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == ref) return i;
    }
    throw Error(errc::invalid_source, "source has no column '" + ref + "'");
  }

 private:
  const std::vector<std::string>& header_;
};

std::string cell(const std::vector<std::string>& fields, std::optional<std::size_t> col) {
  if (!col) return {};
  if (*col >= fields.size()) throw Error(errc::invalid_source, "record has no column #" + std::to_string(*col + 1));
  return trim(fields[*col]);
}

struct MemberRequest {
  std::string dimension;
  Attributes attrs;
};

struct StagedRecord {
  std::vector<MemberRequest> members;  // aligned with the fact's grain
  std::vector<Value> measures;
  std::vector<std::pair<std::string, std::string>> documents;  // payload, media type
};

struct Resolved {
  std::optional<std::size_t> label, value, unit, timestamp, session, documents;
  std::map<std::string, std::optional<std::size_t>> measures;
  std::map<std::string, std::map<std::string, std::optional<std::size_t>>> dims;
};

// Builds everything a record contributes without touching the stager, so
// a record that fails leaves no partial members behind.
StagedRecord transform(const SourceDescriptor& src, const LoadContext& ctx, const model::Schema& schema,
                       const model::FactTable& fact, const Resolved& cols, const std::vector<std::string>& fields) {
  StagedRecord out;
  std::optional<std::string> code;
  if (cols.label) code = mapping::normalize_label(cell(fields, cols.label), ctx.rules);

  for (const auto& g : fact.grain) {
    const auto& dim = *schema.dimension(g.dimension);
    MemberRequest req{g.dimension, {}};
    auto set = [&](const std::string& attr, const std::string& text) {
      const auto* a = dim.attribute(attr);
      if (a == nullptr) return;
      req.attrs[attr] = typed(text, a->kind, g.dimension + "." + attr);
    };

    if (g.dimension == src.provider_dimension) {
      if (!src.provider.empty()) set(dim.natural_key.front(), src.provider);
      for (const auto& [attr, text] : src.provider_attributes) set(attr, text);
    }
    if (g.dimension == src.time_dimension && cols.timestamp) {
      const auto raw = cell(fields, cols.timestamp);
      auto date = parse_date(raw, src.date_format);
      if (!date) throw Error(errc::invalid_literal, "unparseable timestamp '" + raw + "'");
      std::string session = "unspecified";
      if (cols.session) {
        const auto raw_session = cell(fields, cols.session);
        auto s = normalize_session(raw_session);
        if (!s) throw Error(errc::invalid_literal, "unknown session '" + raw_session + "'");
        session = *s;
      }
      set("date", *date);
      set("session", session);
      set("month", date->substr(0, 7));
      set("year", date->substr(0, 4));
    }
    if (g.dimension == src.analysis_dimension && code) {
      set(dim.natural_key.front(), *code);
      set("unit", ctx.rules.canonical_units.at(*code));
      if (auto it = ctx.rules.nomenclature.find(*code); it != ctx.rules.nomenclature.end()) set("nomenclature", it->second);
      if (auto it = ctx.analysis_attributes.find(*code); it != ctx.analysis_attributes.end()) {
        for (const auto& [attr, text] : it->second) set(attr, text);
      }
    }
    if (auto it = cols.dims.find(g.dimension); it != cols.dims.end()) {
      for (const auto& [attr, col] : it->second) set(attr, cell(fields, col));
    }
    for (const auto& k : dim.natural_key) {
      auto it = req.attrs.find(k);
      if (it == req.attrs.end() || is_null(it->second)) {
        throw Error(errc::incomplete_key, "missing natural key part '" + k + "' of " + g.dimension);
      }
    }
    if (g.dimension == src.analysis_dimension && !code) {
      code = render(req.attrs.at(dim.natural_key.front()));
    }
    out.members.push_back(std::move(req));
  }

  for (const auto& m : fact.measures) {
    Value v;
    if (m.name == src.value_measure && cols.value) {
      const auto raw = cell(fields, cols.value);
      auto number = parse_decimal(raw);
      if (!number) throw Error(errc::invalid_literal, "unparseable value '" + raw + "'");
      double x = *number;
      if (code) x = mapping::convert_unit(x, cell(fields, cols.unit), *code, ctx.rules);
      if (m.kind == model::MeasureKind::integer) {
        if (std::nearbyint(x) != x) throw Error(errc::invalid_literal, "value '" + raw + "' is not an integer");
        v = static_cast<std::int64_t>(x);
      } else {
        v = x;
      }
    } else if (auto it = cols.measures.find(m.name); it != cols.measures.end()) {
      const auto raw = cell(fields, it->second);
      if (!raw.empty()) {
        switch (m.kind) {
          case model::MeasureKind::decimal: {
            auto d = parse_decimal(raw);
            if (!d) throw Error(errc::invalid_literal, "unparseable " + m.name + " '" + raw + "'");
            v = *d;
            break;
          }
          case model::MeasureKind::integer:
          case model::MeasureKind::document_ref: {
            auto i = parse_integer(raw);
            if (!i) throw Error(errc::invalid_literal, "unparseable " + m.name + " '" + raw + "'");
            v = *i;
            break;
          }
          case model::MeasureKind::text: v = raw; break;
        }
      }
    }
    out.measures.push_back(std::move(v));
  }

  if (cols.documents) {
    std::string_view rest = fields.at(*cols.documents);
    while (!rest.empty()) {
      const auto bar = rest.find('|');
      const auto rel = trim(rest.substr(0, bar));
      rest = bar == std::string_view::npos ? std::string_view{} : rest.substr(bar + 1);
      if (rel.empty()) continue;
      const auto path = src.uri.parent_path() / rel;
      std::error_code ec;
      if (!fs::is_regular_file(path, ec)) throw Error(errc::not_found, "document '" + rel + "' not found");
      auto payload = read_all(path);
      if (payload.empty()) throw Error(errc::empty_payload, "document '" + rel + "' is empty");
      out.documents.emplace_back(std::move(payload), media_type_for(path, src.document_media_type));
    }
  }
  return out;
}

}  // namespace

std::optional<std::string> parse_date(std::string_view text, DateFormat format) {
  std::string t = trim(text);
  std::string date;
  if (format == DateFormat::iso) {
    if (t.size() < 10) return std::nullopt;
    date = t.substr(0, 10);
    t = t.substr(10);
  } else {
    // D/M/YYYY with '/', '.' or '-' separators.
    std::size_t pos = 0;
    int parts[3] = {0, 0, 0};
    std::size_t digits[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i) {
      while (pos < t.size() && std::isdigit(static_cast<unsigned char>(t[pos])) && digits[i] < 4) {
        parts[i] = parts[i] * 10 + (t[pos] - '0');
        ++digits[i];
        ++pos;
      }
      if (digits[i] == 0) return std::nullopt;
      if (i < 2) {
        if (pos >= t.size() || (t[pos] != '/' && t[pos] != '.' && t[pos] != '-')) return std::nullopt;
        ++pos;
      }
    }
    if (digits[0] > 2 || digits[1] > 2 || digits[2] != 4) return std::nullopt;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", parts[2], parts[1], parts[0]);
    date = buf;
    t = t.substr(pos);
  }
  if (!is_valid_date(date)) return std::nullopt;
  if (t.empty()) return date;
  // Optional time of day: ignored beyond validation.
  if (t[0] != 'T' && t[0] != ' ') return std::nullopt;
  if (!is_valid_timestamp(date + "T" + trim(t.substr(1)))) return std::nullopt;
  return date;
}

std::optional<std::string> normalize_session(std::string_view text) {
  const auto f = mapping::fold_label(text);
  if (f.empty() || f == "unspecified") return "unspecified";
  for (const char* s : {"before", "before-training", "before training", "pre", "pre-training", "avant",
                        "avant entrainement", "avant entraînement"}) {
    if (f == s) return "before-training";
  }
  for (const char* s : {"after", "after-training", "after training", "post", "post-training", "apres", "après",
                        "apres entrainement", "après entraînement"}) {
    if (f == s) return "after-training";
  }
  return std::nullopt;
}

std::vector<std::string> check_source(const SourceDescriptor& src, const model::Schema& schema) {
  std::vector<std::string> out;
  const auto* fact = schema.fact_table(src.target_fact);
  if (fact == nullptr) {
    out.push_back("unknown target fact table '" + src.target_fact + "'");
    return out;
  }
  for (const auto& [dim_name, attrs] : src.dimension_columns) {
    const auto* dim = schema.dimension(dim_name);
    if (dim == nullptr || fact->grain_of(dim_name) == nullptr) {
      out.push_back("dimension '" + dim_name + "' is not in the grain of '" + src.target_fact + "'");
      continue;
    }
    for (const auto& [attr, col] : attrs) {
      if (dim->attribute(attr) == nullptr) out.push_back("dimension '" + dim_name + "' has no attribute '" + attr + "'");
    }
  }
  for (const auto& [measure, col] : src.measure_columns) {
    if (fact->measure(measure) == nullptr) out.push_back("fact '" + src.target_fact + "' has no measure '" + measure + "'");
  }
  if (!src.value_column.empty() && fact->measure(src.value_measure) == nullptr) {
    out.push_back("fact '" + src.target_fact + "' has no measure '" + src.value_measure + "'");
  }
  if (!src.unit_column.empty() && src.label_column.empty()) out.push_back("a unit column needs a label column");
  for (const auto& g : fact->grain) {
    const auto* dim = schema.dimension(g.dimension);
    if (dim == nullptr) continue;
    auto mapped = [&](const std::string& attr) {
      auto it = src.dimension_columns.find(g.dimension);
      return it != src.dimension_columns.end() && it->second.count(attr) > 0;
    };
    for (std::size_t i = 0; i < dim->natural_key.size(); ++i) {
      const auto& k = dim->natural_key[i];
      bool covered = mapped(k);
      if (g.dimension == src.provider_dimension) {
        covered = covered || (i == 0 && !src.provider.empty()) || src.provider_attributes.count(k) > 0;
      }
      if (g.dimension == src.time_dimension && !src.timestamp_column.empty()) {
        covered = covered || k == "date" || k == "session" || k == "month" || k == "year";
      }
      if (g.dimension == src.analysis_dimension && !src.label_column.empty()) {
        covered = covered || i == 0 || k == "unit" || k == "nomenclature";
      }
      if (!covered) out.push_back("no column for natural key part '" + k + "' of dimension '" + g.dimension + "'");
    }
  }
  return out;
}

RowStream::RowStream(const SourceDescriptor& src) : in_(src.uri, std::ios::binary) {
  if (!in_) throw Error(errc::io_error, "cannot read source '" + src.uri.string() + "'");
  reader_ = std::make_unique<delimited::Reader>(in_, src.dialect, src.uri.string());
}

RowStream extract_rows(const SourceDescriptor& src) { return RowStream(src); }

std::string batch_id(const SourceDescriptor& src) {
  std::error_code ec;
  auto uri = fs::weakly_canonical(src.uri, ec);
  if (ec) uri = src.uri;
  std::ifstream in(src.uri, std::ios::binary);
  if (!in) throw Error(errc::io_error, "cannot read source '" + src.uri.string() + "'");
  Sha256 h;
  h.update(uri.string());
  h.update(std::string_view("\0", 1));
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
  }
  h.update(std::string_view("\0", 1));
  h.update(src.target_fact);
  return h.digest();
}

Stager::Stager(const store::Snapshot& base, std::string batch_id) : base_(base) {
  batch_.batch_id = std::move(batch_id);
}

std::uint64_t Stager::resolve_dimension_member(const std::string& dimension, const Attributes& natural_key,
                                               const Attributes& attrs) {
  const auto* dim = base_.schema().dimension(dimension);
  if (dim == nullptr) throw Error(errc::unknown_name, "unknown dimension '" + dimension + "'");

  std::vector<Value> values(dim->attributes.size());
  auto assign = [&](const Attributes& from, std::vector<Value>& into, bool skip_null) {
    bool changed = false;
    for (const auto& [attr, v] : from) {
      const auto idx = dim->attribute_index(attr);
      if (!idx) throw Error(errc::unknown_name, "dimension '" + dimension + "' has no attribute '" + attr + "'");
      if (!conforms(v, dim->attributes[*idx].kind)) {
        throw Error(errc::invalid_literal, "value for " + dimension + "." + attr + " has the wrong kind");
      }
      if (skip_null && is_null(v)) continue;
      if (!(into[*idx] == v)) {
        into[*idx] = v;
        changed = true;
      }
    }
    return changed;
  };

  std::vector<Value> parts;
  for (const auto& k : dim->natural_key) {
    const Value* part = nullptr;
    if (auto it = natural_key.find(k); it != natural_key.end()) part = &it->second;
    else if (auto jt = attrs.find(k); jt != attrs.end()) part = &jt->second;
    if (part == nullptr || is_null(*part)) {
      throw Error(errc::incomplete_key, "missing natural key part '" + k + "' of " + dimension);
    }
    parts.push_back(*part);
  }
  const auto encoded = store::encode_key(parts);

  std::optional<std::uint64_t> key;
  if (auto it = new_keys_[dimension].find(encoded); it != new_keys_[dimension].end()) key = it->second;
  if (!key) key = base_.dimension(dimension).find(encoded);

  if (key) {
    auto& writes = batch_.members[dimension];
    auto pending = pending_[dimension].find(*key);
    std::vector<Value> current =
        pending != pending_[dimension].end() ? writes[pending->second.write_index].member.values
                                             : base_.dimension(dimension).member(*key)->values;
    if (!assign(attrs, current, true)) return *key;
    if (pending != pending_[dimension].end()) {
      writes[pending->second.write_index].member.values = std::move(current);
    } else {
      pending_[dimension][*key] = Pending{false, writes.size()};
      writes.push_back(store::MemberWrite{false, store::DimensionMember{*key, std::move(current)}});
    }
    ++updated_[dimension];
    return *key;
  }

  assign(natural_key, values, false);
  assign(attrs, values, true);
  const std::uint64_t fresh = base_.dimension(dimension).size() + new_keys_[dimension].size() + 1;
  auto& writes = batch_.members[dimension];
  pending_[dimension][fresh] = Pending{true, writes.size()};
  writes.push_back(store::MemberWrite{true, store::DimensionMember{fresh, std::move(values)}});
  new_keys_[dimension][encoded] = fresh;
  ++created_[dimension];
  return fresh;
}

std::uint64_t Stager::load_document(std::string payload, const std::string& media_type,
                                    std::map<std::string, std::string> attrs) {
  if (payload.empty()) throw Error(errc::empty_payload, "document payload is empty");
  auto checksum = sha256_hex(payload);
  if (auto id = base_.find_document(checksum, media_type)) return *id;
  auto content = std::make_pair(checksum, media_type);
  if (auto it = staged_docs_.find(content); it != staged_docs_.end()) return it->second;
  store::StagedDocument doc;
  doc.record.id = base_.documents().size() + batch_.documents.size() + 1;
  doc.record.media_type = media_type;
  doc.record.checksum = std::move(checksum);
  doc.record.size = payload.size();
  doc.record.attributes = std::move(attrs);
  doc.payload = std::move(payload);
  staged_docs_[content] = doc.record.id;
  batch_.documents.push_back(std::move(doc));
  return batch_.documents.back().record.id;
}

std::uint64_t Stager::append_fact(const std::string& fact, std::vector<std::uint64_t> keys,
                                  std::vector<Value> measures) {
  auto& rows = batch_.facts[fact];
  store::FactRow row;
  row.id = base_.facts(fact).rows.size() + rows.size() + 1;
  row.keys = std::move(keys);
  row.measures = std::move(measures);
  row.batch_id = batch_.batch_id;
  rows.push_back(std::move(row));
  return rows.back().id;
}

store::DocumentLink Stager::link_document(const std::string& fact, std::uint64_t row, std::uint64_t document) {
  store::DocumentLink link{fact, row, document};
  auto staged_rows = batch_.facts.find(fact);
  const auto row_count = base_.facts(fact).rows.size() + (staged_rows == batch_.facts.end() ? 0 : staged_rows->second.size());
  if (row == 0 || row > row_count) {
    throw Error(errc::dangling_reference, "no row " + std::to_string(row) + " in '" + fact + "'");
  }
  if (document == 0 || document > base_.documents().size() + batch_.documents.size()) {
    throw Error(errc::dangling_reference, "no document " + std::to_string(document));
  }
  if (base_.has_link(link) || !staged_links_.insert(link).second) return link;
  batch_.links.push_back(link);
  return link;
}

LoadReport load_facts(const SourceDescriptor& src, const LoadContext& ctx, store::Catalog& catalog,
                      store::InstallOptions options) {
  auto writer = catalog.begin_write();
  const auto& base = writer.base();
  if (!base.has_schema()) throw Error(errc::invalid_source, "catalog has no schema installed");
  const auto& schema = base.schema();
  if (auto problems = check_source(src, schema); !problems.empty()) {
    throw Error(errc::invalid_source, "source '" + src.name + "': " + problems.front());
  }
  const auto& fact = *schema.fact_table(src.target_fact);

  LoadReport report;
  report.source = src.name;
  report.target_fact = src.target_fact;
  report.batch_id = batch_id(src);
  if (base.has_batch(report.batch_id)) {
    throw Error(errc::duplicate_batch, "source '" + src.name + "' is already loaded (batch " + report.batch_id + ")");
  }

  Stager stager(base, report.batch_id);
  if (ctx.metadata && !(*ctx.metadata == base.metadata())) stager.batch().metadata = ctx.metadata;

  RowStream rows(src);
  Columns columns(rows.header());
  Resolved cols;
  cols.label = columns.resolve(src.label_column);
  cols.value = columns.resolve(src.value_column);
  cols.unit = columns.resolve(src.unit_column);
  cols.timestamp = columns.resolve(src.timestamp_column);
  cols.session = columns.resolve(src.session_column);
  cols.documents = columns.resolve(src.documents_column);
  for (const auto& [m, c] : src.measure_columns) cols.measures[m] = columns.resolve(c);
  for (const auto& [d, attrs] : src.dimension_columns) {
    for (const auto& [a, c] : attrs) cols.dims[d][a] = columns.resolve(c);
  }

  delimited::Extracted ex;
  while (rows.next(ex)) {
    ++report.records_read;
    if (ex.rejection) {
      report.rejected.push_back({ex.record.provenance, std::string(errc::invalid_source), *ex.rejection});
      continue;
    }
    StagedRecord rec;
    try {
      rec = transform(src, ctx, schema, fact, cols, ex.record.fields);
    } catch (const Error& e) {
      report.rejected.push_back({ex.record.provenance, e.code(), e.what()});
      continue;
    }
    std::vector<std::uint64_t> keys;
    for (const auto& m : rec.members) keys.push_back(stager.resolve_dimension_member(m.dimension, {}, m.attrs));
    const auto row = stager.append_fact(fact.name, std::move(keys), std::move(rec.measures));
    for (auto& [payload, media_type] : rec.documents) {
      const auto doc = stager.load_document(std::move(payload), media_type);
      stager.link_document(fact.name, row, doc);
    }
    ++report.accepted;
  }

  report.members_created = stager.members_created();
  report.members_updated = stager.members_updated();
  report.documents_stored = stager.documents_stored();
  report.links_created = stager.links_created();
  writer.install(stager.take(), options);
  return report;
}

bool install_schema(const model::Schema& schema, store::Catalog& catalog) {
  auto writer = catalog.begin_write();
  const auto& base = writer.base();
  if (base.has_schema() && base.schema() == schema) return false;
  store::StagedBatch batch;
  batch.schema = schema;
  batch.batch_id = "schema:" + sha256_hex(dsl::serialize_schema(schema));
  if (base.has_batch(batch.batch_id)) {
    throw Error(errc::schema_conflict, "schema version " + std::to_string(schema.version) + " was superseded");
  }
  writer.install(std::move(batch));
  return true;
}

namespace {

char dialect_char(const std::string& v, const std::string& where) {
  if (v == "tab") return '\t';
  if (v == "comma") return ',';
  if (v == "semicolon") return ';';
  if (v == "pipe") return '|';
  if (v == "none") return '\0';
  if (v == "double-quote") return '"';
  if (v == "single-quote") return '\'';
  if (v.size() == 1) return v[0];
  throw Error(errc::invalid_source, where + ": expected a single character, got '" + v + "'");
}

bool flag(const std::string& v, const std::string& where) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw Error(errc::invalid_source, where + ": expected true or false, got '" + v + "'");
}

void set_source_key(SourceDescriptor& s, const std::string& key, const std::string& value, const fs::path& dir,
                    const std::string& where) {
  auto dotted = [&](std::string_view prefix) -> std::optional<std::string> {
    if (key.size() > prefix.size() && key.compare(0, prefix.size(), prefix) == 0) return key.substr(prefix.size());
    return std::nullopt;
  };
  if (key == "uri") {
    s.uri = dir / value;
  } else if (key == "target") {
    s.target_fact = value;
  } else if (key == "delimiter") {
    s.dialect.delimiter = dialect_char(value, where);
  } else if (key == "quote") {
    s.dialect.quote = dialect_char(value, where);
  } else if (key == "header") {
    s.dialect.header = flag(value, where);
  } else if (key == "date_format") {
    if (value == "iso") s.date_format = DateFormat::iso;
    else if (value == "dmy") s.date_format = DateFormat::dmy;
    else throw Error(errc::invalid_source, where + ": date_format must be iso or dmy");
  } else if (key == "provider") {
    s.provider = value;
  } else if (auto attr = dotted("provider.")) {
    s.provider_attributes[*attr] = value;
  } else if (key == "label") {
    s.label_column = value;
  } else if (key == "value") {
    s.value_column = value;
  } else if (key == "unit") {
    s.unit_column = value;
  } else if (key == "timestamp") {
    s.timestamp_column = value;
  } else if (key == "session") {
    s.session_column = value;
  } else if (key == "documents") {
    s.documents_column = value;
  } else if (key == "document_media_type") {
    s.document_media_type = value;
  } else if (key == "measure") {
    s.value_measure = value;
  } else if (auto m = dotted("measure.")) {
    s.measure_columns[*m] = value;
  } else if (auto d = dotted("dim.")) {
    const auto dot = d->find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == d->size()) {
      throw Error(errc::invalid_source, where + ": expected dim.<dimension>.<attribute>");
    }
    s.dimension_columns[d->substr(0, dot)][d->substr(dot + 1)] = value;
  } else if (key == "analysis_dimension") {
    s.analysis_dimension = value;
  } else if (key == "provider_dimension") {
    s.provider_dimension = value;
  } else if (key == "time_dimension") {
    s.time_dimension = value;
  } else {
    throw Error(errc::invalid_source, where + ": unknown source key '" + key + "'");
  }
}

}  // namespace

LoadManifest parse_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::io_error, "cannot read manifest '" + path.string() + "'");
  const auto dir = path.parent_path();
  LoadManifest out;
  enum class Section { none, mapping, source } section = Section::none;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> names;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(errc::invalid_source, where + ": unterminated section header");
      const auto inner = trim(std::string_view(t).substr(1, t.size() - 2));
      if (inner == "mapping") {
        section = Section::mapping;
      } else if (inner.rfind("source ", 0) == 0 && !trim(inner.substr(7)).empty()) {
        section = Section::source;
        SourceDescriptor s;
        s.name = trim(inner.substr(7));
        if (!names.insert(s.name).second) throw Error(errc::invalid_source, where + ": duplicate source '" + s.name + "'");
        out.sources.push_back(std::move(s));
      } else {
        throw Error(errc::invalid_source, where + ": unknown section '" + inner + "'");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(errc::invalid_source, where + ": expected key = value");
    const auto key = trim(std::string_view(t).substr(0, eq));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw Error(errc::invalid_source, where + ": empty key");
    switch (section) {
      case Section::none: throw Error(errc::invalid_source, where + ": key outside of a section");
      case Section::mapping:
        if (key == "synonyms") out.mapping_files.synonyms = dir / value;
        else if (key == "units") out.mapping_files.units = dir / value;
        else if (key == "canonical_units") out.mapping_files.canonical_units = dir / value;
        else if (key == "intervals") out.mapping_files.intervals = dir / value;
        else if (key == "analyses") out.analysis_attributes = dir / value;
        else if (key == "analysis_dimension") out.analysis_dimension = value;
        else if (key == "patient_dimension") out.patient_dimension = value;
        else throw Error(errc::invalid_source, where + ": unknown mapping key '" + key + "'");
        break;
      case Section::source: set_source_key(out.sources.back(), key, value, dir, where); break;
    }
  }
  for (const auto& s : out.sources) {
    if (s.uri.empty()) throw Error(errc::invalid_source, "source '" + s.name + "' has no uri");
    if (s.target_fact.empty()) throw Error(errc::invalid_source, "source '" + s.name + "' has no target");
  }
  return out;
}

LoadContext load_context(const LoadManifest& manifest) {
  LoadContext ctx;
  ctx.rules = mapping::load_rules(manifest.mapping_files);
  if (!manifest.analysis_attributes.empty()) {
    std::ifstream in(manifest.analysis_attributes, std::ios::binary);
    if (!in) throw Error(errc::io_error, "cannot read '" + manifest.analysis_attributes.string() + "'");
    delimited::Reader reader(in, delimited::Dialect{}, manifest.analysis_attributes.string());
    const auto& header = reader.header();
    if (header.empty()) throw Error(errc::invalid_mapping, manifest.analysis_attributes.string() + ": missing header");
    delimited::Extracted ex;
    while (reader.next(ex)) {
      const auto where = manifest.analysis_attributes.string() + ":" + std::to_string(ex.record.provenance.line);
      if (ex.rejection) throw Error(errc::invalid_mapping, where + ": " + *ex.rejection);
      auto& attrs = ctx.analysis_attributes[trim(ex.record.fields[0])];
      for (std::size_t i = 1; i < header.size(); ++i) attrs[header[i]] = trim(ex.record.fields[i]);
    }
  }
  store::Metadata meta;
  meta.analysis_dimension = manifest.analysis_dimension;
  meta.patient_dimension = manifest.patient_dimension;
  if (!manifest.mapping_files.intervals.empty()) meta.intervals = mapping::load_intervals(manifest.mapping_files.intervals);
  ctx.metadata = std::move(meta);
  return ctx;
}

std::vector<LoadReport> load_manifest(const LoadManifest& manifest, store::Catalog& catalog) {
  const auto ctx = load_context(manifest);
  const auto snap = catalog.snapshot();
  if (snap->has_schema() && ctx.metadata) {
    auto problems = mapping::check_intervals(ctx.metadata->intervals, snap->schema().dimension(manifest.patient_dimension));
    if (!problems.empty()) throw Error(errc::invalid_mapping, problems.front());
  }
  std::vector<LoadReport> reports;
  for (const auto& src : manifest.sources) {
    try {
      reports.push_back(load_facts(src, ctx, catalog));
    } catch (const Error& e) {
      if (e.code() != errc::duplicate_batch) throw;
      LoadReport r;
      r.source = src.name;
      r.target_fact = src.target_fact;
      r.batch_id = batch_id(src);
      r.duplicate = true;
      reports.push_back(std::move(r));
    }
  }
  return reports;
}

}  // namespace dwbus::etl
