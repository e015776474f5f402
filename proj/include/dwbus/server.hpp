#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "dwbus/store.hpp"

// HTTP front end over a catalog. Endpoints:
//
//   GET  /schema
//   GET  /dimensions/{name}/members?level=&filter=
//   POST /query                      CubeQuery -> CubeResult
//   POST /navigate                   {query, op, dimension | level+value | filters}
//   GET  /facts/{table}/attribute-value?select=&filters=&delimiter=
//   GET  /complex/{group}/{report_id}
//   GET  /documents/{id}
//   POST /load                       {manifest, schema?}
//
// JSON responses carry "schema_version"; every response also carries the
// X-Schema-Version header. Failures are {"error": {code, message}}.
namespace dwbus::server {

struct ServerConfig {
  std::filesystem::path catalog;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  bool read_only = false;
};

class Server {
 public:
  // Opens the catalog; throws Error on failure.
  explicit Server(const ServerConfig& config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds the socket and returns the port. Throws Error(io_error).
  int bind();
  // Serves until stop(); binds first when needed.
  void listen();
  // listen() on a background thread; returns once ready.
  void start();
  void stop();

  int port() const;
  store::Catalog& catalog();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dwbus::server
