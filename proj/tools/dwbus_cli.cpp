// dwbus: command-line front end over the C API.
//
// Exit codes: 0 success, 1 validation or query error, 2 I/O error,
// 3 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwbus/dwbus.h"

namespace {

constexpr int kUsage = 3;

using json = nlohmann::json;

struct CatalogCloser {
  void operator()(dwb_catalog* c) const { dwb_catalog_close(c); }
};
using CatalogPtr = std::unique_ptr<dwb_catalog, CatalogCloser>;

struct Owned {
  char* p = nullptr;
  ~Owned() { dwb_free(p); }
};

int report(dwb_status s) {
  if (s != DWB_OK) std::cerr << "dwbus: " << dwb_last_error_code() << ": " << dwb_last_error() << "\n";
  return static_cast<int>(s);
}

bool read_text(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return true;
}

int write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return 0;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text << "\n";
  if (!out) {
    std::cerr << "dwbus: io_error: cannot write '" << path << "'\n";
    return 2;
  }
  return 0;
}

int open_catalog(const std::string& root, bool read_write, CatalogPtr& out) {
  dwb_catalog* raw = nullptr;
  const auto s = dwb_catalog_open(root.c_str(), read_write ? 1 : 0, &raw);
  if (s != DWB_OK) return report(s);
  out.reset(raw);
  return 0;
}

int schema_check(const std::string& file) {
  Owned json_text;
  const auto s = dwb_schema_check(file.c_str(), &json_text.p);
  if (s == DWB_IO || s == DWB_USAGE || json_text.p == nullptr) return report(s);
  const auto r = json::parse(json_text.p);
  for (const auto& d : r.at("diagnostics")) std::cerr << d.at("text").get<std::string>() << "\n";
  if (s == DWB_OK) {
    std::cout << file << ": ok (" << r.value("composition", std::string()) << ")\n";
  }
  return static_cast<int>(s);
}

int load(const std::string& schema, const std::string& root, const std::string& manifest) {
  CatalogPtr cat;
  if (int rc = open_catalog(root, true, cat)) return rc;
  if (!schema.empty()) {
    int installed = 0;
    if (auto s = dwb_install_schema(cat.get(), schema.c_str(), &installed); s != DWB_OK) return report(s);
    if (installed) std::cout << "installed schema " << schema << "\n";
  }
  Owned reports;
  if (auto s = dwb_load_manifest(cat.get(), manifest.c_str(), &reports.p); s != DWB_OK) return report(s);
  for (const auto& r : json::parse(reports.p)) {
    const auto name = r.at("source").get<std::string>();
    if (r.at("duplicate").get<bool>()) {
      std::cout << "source " << name << ": duplicate batch " << r.at("batch_id").get<std::string>().substr(0, 12)
                << ", nothing loaded\n";
      continue;
    }
    std::cout << "source " << name << " -> " << r.at("target_fact").get<std::string>() << ": "
              << r.at("accepted").get<std::size_t>() << " accepted, " << r.at("rejected").size() << " rejected";
    std::size_t created = 0;
    for (const auto& [dim, n] : r.at("members_created").items()) created += n.get<std::size_t>();
    std::cout << ", " << created << " new members";
    if (auto docs = r.at("documents_stored").get<std::size_t>()) std::cout << ", " << docs << " documents";
    std::cout << "\n";
    for (const auto& x : r.at("rejected")) {
      std::cerr << x.at("uri").get<std::string>() << ":" << x.at("line").get<std::size_t>() << ": "
                << x.at("reason").get<std::string>() << "\n";
    }
  }
  return 0;
}

int query(const std::string& root, const std::string& query_file, const std::string& out) {
  std::string text;
  if (!read_text(query_file, text)) {
    std::cerr << "dwbus: io_error: cannot read '" << query_file << "'\n";
    return 2;
  }
  CatalogPtr cat;
  if (int rc = open_catalog(root, false, cat)) return rc;
  Owned result;
  if (auto s = dwb_query(cat.get(), text.c_str(), &result.p); s != DWB_OK) return report(s);
  return write_output(out, result.p);
}

int export_av(const std::string& root, const std::string& fact, const std::string& select,
              const std::string& filters_file, const std::string& out) {
  std::string filters;
  if (!filters_file.empty() && !read_text(filters_file, filters)) {
    std::cerr << "dwbus: io_error: cannot read '" << filters_file << "'\n";
    return 2;
  }
  CatalogPtr cat;
  if (int rc = open_catalog(root, false, cat)) return rc;
  std::size_t rows = 0;
  const auto s = dwb_export_av(cat.get(), fact.c_str(), select.c_str(), filters.empty() ? nullptr : filters.c_str(),
                               out.c_str(), &rows);
  if (s != DWB_OK) return report(s);
  std::cout << rows << " rows written to " << out << "\n";
  return 0;
}

int assemble(const std::string& root, const std::string& group, std::uint64_t id, const std::string& out) {
  CatalogPtr cat;
  if (int rc = open_catalog(root, false, cat)) return rc;
  Owned result;
  if (auto s = dwb_assemble(cat.get(), group.c_str(), id, &result.p); s != DWB_OK) return report(s);
  return write_output(out, result.p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dimensional warehouse engine"};
  app.require_subcommand(1);

  auto* schema_cmd = app.add_subcommand("schema", "schema tools");
  schema_cmd->require_subcommand(1);
  std::string schema_file;
  auto* check_cmd = schema_cmd->add_subcommand("check", "parse and validate a schema file");
  check_cmd->add_option("file", schema_file, "schema file")->required();

  std::string catalog, manifest, query_file, out, fact, select, filters, group, host = "127.0.0.1";
  std::uint64_t report_id = 0;
  int port = 8080;
  bool read_only = false;

  auto* load_cmd = app.add_subcommand("load", "load sources into a catalog");
  load_cmd->add_option("--schema", schema_file, "schema file to install first");
  load_cmd->add_option("--catalog", catalog, "catalog directory")->required();
  load_cmd->add_option("--manifest", manifest, "sources.manifest")->required();

  auto* query_cmd = app.add_subcommand("query", "run a cube query");
  query_cmd->add_option("--catalog", catalog, "catalog directory")->required();
  query_cmd->add_option("--query", query_file, "CubeQuery JSON file")->required();
  query_cmd->add_option("--out", out, "result file (default: standard output)");

  auto* export_cmd = app.add_subcommand("export-av", "export an attribute-value view");
  export_cmd->add_option("--catalog", catalog, "catalog directory")->required();
  export_cmd->add_option("--fact", fact, "fact table")->required();
  export_cmd->add_option("--select", select, "comma-separated dimension.attribute or measure names");
  export_cmd->add_option("--filters", filters, "JSON file holding an array of filters");
  export_cmd->add_option("--out", out, "output file")->required();

  auto* assemble_cmd = app.add_subcommand("assemble", "assemble a complex fact");
  assemble_cmd->add_option("--catalog", catalog, "catalog directory")->required();
  assemble_cmd->add_option("--group", group, "complex-fact group")->required();
  assemble_cmd->add_option("--id", report_id, "central fact row id")->required();
  assemble_cmd->add_option("--out", out, "result file (default: standard output)");

  auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP API");
  serve_cmd->add_option("--catalog", catalog, "catalog directory")->required();
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_flag("--read-only", read_only, "refuse POST /load");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*check_cmd) return schema_check(schema_file);
  if (*load_cmd) return load(schema_file, catalog, manifest);
  if (*query_cmd) return query(catalog, query_file, out);
  if (*export_cmd) return export_av(catalog, fact, select, filters, out);
  if (*assemble_cmd) return assemble(catalog, group, report_id, out);
  if (*serve_cmd) {
    std::cout << "serving " << catalog << " on " << host << ":" << port << std::endl;
    return report(dwb_serve(catalog.c_str(), host.c_str(), port, read_only ? 1 : 0));
  }
  return kUsage;
}
