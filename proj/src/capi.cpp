#include "dwbus/dwbus.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dwbus/dsl.hpp"
#include "dwbus/etl.hpp"
#include "dwbus/olap.hpp"
#include "dwbus/server.hpp"
#include "dwbus/store.hpp"
#include "dwbus/wire.hpp"

struct dwb_catalog {
  dwbus::store::Catalog catalog;
};

namespace {

using dwbus::wire::json;

thread_local std::string last_message;
thread_local std::string last_code;

void clear_error() {
  last_message.clear();
  last_code.clear();
}

dwb_status fail(std::string_view code, const std::string& message) {
  last_code = std::string(code);
  last_message = message;
  if (code == dwbus::errc::bad_request && message.rfind("usage:", 0) == 0) return DWB_USAGE;
  return dwbus::is_io_code(code) ? DWB_IO : DWB_INVALID;
}

dwb_status usage(const std::string& message) {
  last_code = std::string(dwbus::errc::bad_request);
  last_message = "usage: " + message;
  return DWB_USAGE;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
dwb_status guarded(Fn fn) {
  clear_error();
  try {
    return fn();
  } catch (const dwbus::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(dwbus::errc::internal, e.what());
  }
}

}  // namespace

extern "C" {

const char* dwb_version(void) { return "0.1.0"; }
const char* dwb_last_error(void) { return last_message.c_str(); }
const char* dwb_last_error_code(void) { return last_code.c_str(); }
void dwb_free(char* s) { std::free(s); }

dwb_status dwb_schema_check(const char* path, char** report_json) {
  if (path == nullptr) return usage("schema path is required");
  return guarded([&] {
    auto result = dwbus::dsl::parse_schema_file(path);
    json diags = json::array();
    for (const auto& d : result.diagnostics) {
      diags.push_back({{"line", d.line}, {"column", d.column}, {"message", d.message}, {"text", d.format(path)}});
    }
    json report = {{"ok", result.ok()}, {"diagnostics", diags}};
    if (result.schema) {
      const auto v = dwbus::model::validate_schema(*result.schema);
      report["composition"] = std::string(dwbus::model::to_string(v.composition));
      report["conformed_dimensions"] = dwbus::model::conformed_dimensions(*result.schema);
    }
    if (report_json != nullptr) *report_json = dup(report.dump());
    if (result.ok()) return DWB_OK;
    return fail(dwbus::errc::invalid_schema,
                result.diagnostics.empty() ? "schema is invalid" : result.diagnostics.front().format(path));
  });
}

dwb_status dwb_catalog_open(const char* root, int read_write, dwb_catalog** out) {
  if (root == nullptr || out == nullptr) return usage("catalog root and output handle are required");
  *out = nullptr;
  return guarded([&] {
    auto cat = dwbus::store::Catalog::open(root, read_write ? dwbus::store::OpenMode::read_write
                                                            : dwbus::store::OpenMode::read);
    *out = new dwb_catalog{std::move(cat)};
    return DWB_OK;
  });
}

void dwb_catalog_close(dwb_catalog* catalog) { delete catalog; }

dwb_status dwb_install_schema(dwb_catalog* catalog, const char* schema_path, int* installed) {
  if (catalog == nullptr || schema_path == nullptr) return usage("catalog and schema path are required");
  return guarded([&] {
    auto parsed = dwbus::dsl::parse_schema_file(schema_path);
    if (!parsed.ok()) {
      return fail(dwbus::errc::invalid_schema,
                  parsed.diagnostics.empty() ? "schema is invalid" : parsed.diagnostics.front().format(schema_path));
    }
    const bool done = dwbus::etl::install_schema(*parsed.schema, catalog->catalog);
    if (installed != nullptr) *installed = done ? 1 : 0;
    return DWB_OK;
  });
}

dwb_status dwb_load_manifest(dwb_catalog* catalog, const char* manifest_path, char** reports_json) {
  if (catalog == nullptr || manifest_path == nullptr) return usage("catalog and manifest path are required");
  return guarded([&] {
    const auto manifest = dwbus::etl::parse_manifest(manifest_path);
    const auto reports = dwbus::etl::load_manifest(manifest, catalog->catalog);
    json list = json::array();
    for (const auto& r : reports) list.push_back(dwbus::wire::to_json(r));
    if (reports_json != nullptr) *reports_json = dup(list.dump());
    return DWB_OK;
  });
}

dwb_status dwb_query(dwb_catalog* catalog, const char* query_json, char** result_json) {
  if (catalog == nullptr || query_json == nullptr || result_json == nullptr) {
    return usage("catalog, query and output are required");
  }
  return guarded([&] {
    const auto q = dwbus::wire::query_from_json(dwbus::wire::parse(query_json));
    const auto snap = catalog->catalog.snapshot();
    *result_json = dup(dwbus::wire::canonical(dwbus::wire::to_json(dwbus::olap::execute(q, *snap))));
    return DWB_OK;
  });
}

dwb_status dwb_navigate(dwb_catalog* catalog, const char* request_json, char** query_json) {
  if (catalog == nullptr || request_json == nullptr || query_json == nullptr) {
    return usage("catalog, request and output are required");
  }
  return guarded([&] {
    const auto snap = catalog->catalog.snapshot();
    const auto q = dwbus::wire::navigate(dwbus::wire::parse(request_json), snap->schema());
    *query_json = dup(dwbus::wire::canonical(dwbus::wire::to_json(q)));
    return DWB_OK;
  });
}

dwb_status dwb_export_av(dwb_catalog* catalog, const char* fact, const char* select_csv, const char* filters_json,
                         const char* out_path, size_t* rows) {
  if (catalog == nullptr || fact == nullptr || out_path == nullptr) return usage("catalog, fact and output are required");
  return guarded([&] {
    std::vector<std::string> select;
    if (select_csv != nullptr) {
      std::stringstream list(select_csv);
      for (std::string item; std::getline(list, item, ',');) {
        if (!item.empty()) select.push_back(item);
      }
    }
    std::vector<dwbus::olap::Filter> filters;
    if (filters_json != nullptr && *filters_json != '\0') {
      const auto j = dwbus::wire::parse(filters_json);
      if (!j.is_array()) throw dwbus::Error(dwbus::errc::bad_request, "filters must be a JSON array");
      for (const auto& f : j) filters.push_back(dwbus::wire::filter_from_json(f));
    }
    const auto snap = catalog->catalog.snapshot();
    const auto view = dwbus::olap::export_attribute_value(*snap, fact, select, filters);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw dwbus::Error(dwbus::errc::io_error, std::string("cannot write '") + out_path + "'");
    dwbus::olap::write_view(out, view);
    out.flush();
    if (!out) throw dwbus::Error(dwbus::errc::io_error, std::string("cannot write '") + out_path + "'");
    if (rows != nullptr) *rows = view.rows.size();
    return DWB_OK;
  });
}

dwb_status dwb_assemble(dwb_catalog* catalog, const char* group, uint64_t report_id, char** assembly_json) {
  if (catalog == nullptr || group == nullptr || assembly_json == nullptr) {
    return usage("catalog, group and output are required");
  }
  return guarded([&] {
    const auto snap = catalog->catalog.snapshot();
    const auto a = dwbus::olap::assemble_complex_fact(*snap, group, report_id);
    *assembly_json = dup(dwbus::wire::canonical(dwbus::wire::to_json(a, *snap)));
    return DWB_OK;
  });
}

dwb_status dwb_serve(const char* root, const char* host, int port, int read_only) {
  if (root == nullptr) return usage("catalog root is required");
  if (port < 1 || port > 65535) return usage("port must be in 1-65535");
  return guarded([&] {
    dwbus::server::ServerConfig config;
    config.catalog = root;
    if (host != nullptr) config.host = host;
    config.port = port;
    config.read_only = read_only != 0;
    dwbus::server::Server server(config);
    server.listen();
    return DWB_OK;
  });
}

}  // extern "C"
