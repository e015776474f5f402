#include "dwbus/server.hpp"

#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "dwbus/dsl.hpp"
#include "dwbus/etl.hpp"
#include "dwbus/olap.hpp"
#include "dwbus/wire.hpp"

namespace dwbus::server {

using wire::json;

namespace {

int status_for(const std::string& code) {
  if (code == errc::not_found || code == errc::unknown_name) return 404;
  if (code == errc::read_only) return 403;
  if (code == errc::duplicate_batch || code == errc::schema_conflict) return 409;
  if (is_io_code(code) || code == errc::internal) return 500;
  return 400;
}

std::uint64_t version_of(const store::Snapshot& snap) { return snap.schema_version(); }

void send_json(httplib::Response& res, const json& body, std::uint64_t version, int status = 200) {
  res.status = status;
  res.set_header("X-Schema-Version", std::to_string(version));
  res.set_content(wire::canonical(body), "application/json");
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message, std::uint64_t version) {
  auto body = wire::error_json(code, message);
  body["schema_version"] = version;
  send_json(res, body, version, status_for(code));
}

std::uint64_t parse_id(const std::string& text) {
  auto id = parse_integer(text);
  if (!id || *id < 1) throw Error(errc::bad_request, "'" + text + "' is not a valid id");
  return static_cast<std::uint64_t>(*id);
}

}  // namespace

struct Server::Impl {
  ServerConfig config;
  store::Catalog catalog;
  httplib::Server http;
  std::thread thread;
  int port = -1;

  explicit Impl(const ServerConfig& c)
      : config(c), catalog(store::Catalog::open(c.catalog, c.read_only ? store::OpenMode::read : store::OpenMode::read_write)) {
    routes();
  }

  // Runs `fn` against the current snapshot, mapping errors to responses.
  template <typename Fn>
  void guarded(httplib::Response& res, Fn fn) {
    const auto snap = catalog.snapshot();
    try {
      fn(*snap);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what(), version_of(*snap));
    } catch (const std::exception& e) {
      send_error(res, std::string(errc::internal), e.what(), version_of(*snap));
    }
  }

  void routes() {
    http.Get("/schema", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot& snap) { send_json(res, wire::schema_to_json(snap.schema()), version_of(snap)); });
    });

    http.Get("/dimensions/:name/members", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot& snap) {
        const auto& name = req.path_params.at("name");
        const auto level = req.get_param_value("level");
        const auto members = olap::level_members(snap, name, level, req.get_param_value("filter"));
        json list = json::array();
        for (const auto& m : members) list.push_back(wire::tuple_to_json(m));
        send_json(res,
                  {{"schema_version", version_of(snap)},
                   {"dimension", name},
                   {"level", level.empty() ? name : level},
                   {"members", list}},
                  version_of(snap));
      });
    });

    http.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot& snap) {
        const auto q = wire::query_from_json(wire::parse(req.body));
        send_json(res, wire::to_json(olap::execute(q, snap)), version_of(snap));
      });
    });

    http.Post("/navigate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot& snap) {
        const auto out = wire::navigate(wire::parse(req.body), snap.schema());
        send_json(res, {{"schema_version", version_of(snap)}, {"query", wire::to_json(out)}}, version_of(snap));
      });
    });

    http.Get("/facts/:table/attribute-value", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot& snap) {
        std::vector<std::string> select;
        std::stringstream list(req.get_param_value("select"));
        for (std::string item; std::getline(list, item, ',');) {
          if (!item.empty()) select.push_back(item);
        }
        std::vector<olap::Filter> filters;
        if (req.has_param("filters")) {
          const auto j = wire::parse(req.get_param_value("filters"));
          if (!j.is_array()) throw Error(errc::bad_request, "'filters' must be a JSON array");
          for (const auto& f : j) filters.push_back(wire::filter_from_json(f));
        }
        delimited::Dialect dialect;
        if (req.has_param("delimiter")) {
          const auto d = req.get_param_value("delimiter");
          if (d == "tab") dialect.delimiter = '\t';
          else if (d.size() == 1) dialect.delimiter = d[0];
          else throw Error(errc::bad_request, "bad delimiter '" + d + "'");
        }
        const auto view = olap::export_attribute_value(snap, req.path_params.at("table"), select, filters);
        std::ostringstream out;
        olap::write_view(out, view, dialect);
        res.set_header("X-Schema-Version", std::to_string(version_of(snap)));
        res.set_content(out.str(), "text/csv; charset=utf-8");
      });
    });

    http.Get("/complex/:group/:id", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot& snap) {
        const auto a = olap::assemble_complex_fact(snap, req.path_params.at("group"), parse_id(req.path_params.at("id")));
        send_json(res, wire::to_json(a, snap), version_of(snap));
      });
    });

    http.Get("/documents/:id", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot& snap) {
        const auto* doc = snap.document(parse_id(req.path_params.at("id")));
        if (doc == nullptr) throw Error(errc::not_found, "no document " + req.path_params.at("id"));
        auto bytes = catalog.read_blob(*doc);
        res.set_header("X-Schema-Version", std::to_string(version_of(snap)));
        res.set_header("X-Checksum-SHA256", doc->checksum);
        res.set_content(std::move(bytes), doc->media_type);
      });
    });

    http.Post("/load", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&](const store::Snapshot&) {
        if (config.read_only) throw Error(errc::read_only, "server is read-only");
        const auto body = wire::parse(req.body);
        if (!body.is_object() || !body.contains("manifest") || !body.at("manifest").is_string()) {
          throw Error(errc::bad_request, "load needs a string field 'manifest'");
        }
        bool installed = false;
        if (body.contains("schema")) {
          if (!body.at("schema").is_string()) throw Error(errc::bad_request, "'schema' must be a path string");
          auto parsed = dsl::parse_schema_file(body.at("schema").get<std::string>());
          if (!parsed.ok()) {
            const auto& d = parsed.diagnostics.front();
            throw Error(errc::invalid_schema, d.format(body.at("schema").get<std::string>()));
          }
          installed = etl::install_schema(*parsed.schema, catalog);
        }
        const auto manifest = etl::parse_manifest(body.at("manifest").get<std::string>());
        const auto reports = etl::load_manifest(manifest, catalog);
        json list = json::array();
        for (const auto& r : reports) list.push_back(wire::to_json(r));
        const auto after = catalog.snapshot();
        send_json(res, {{"schema_version", version_of(*after)}, {"schema_installed", installed}, {"reports", list}},
                  version_of(*after));
      });
    });
  }
};

Server::Server(const ServerConfig& config) {
  if (config.port < 0 || config.port > 65535) throw Error(errc::bad_request, "port must be in 0-65535");
  impl_ = std::make_unique<Impl>(config);
}

Server::~Server() { stop(); }

int Server::bind() {
  if (impl_->port > 0) return impl_->port;
  if (impl_->config.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(impl_->config.host);
  } else if (impl_->http.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->port = impl_->config.port;
  }
  if (impl_->port <= 0) {
    impl_->port = -1;
    throw Error(errc::io_error, "cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  return impl_->port;
}

void Server::listen() {
  bind();
  impl_->http.listen_after_bind();
}

void Server::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Server::port() const { return impl_->port; }
store::Catalog& Server::catalog() { return impl_->catalog; }

}  // namespace dwbus::server
