#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dwbus/etl.hpp"
#include "dwbus/store.hpp"

namespace testsupport {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// The shipped fixture manifest, optionally restricted to some sources.
dwbus::etl::LoadManifest fixture_manifest(const std::vector<std::string>& only = {});

// Installs medical.dws into a catalog.
void install_fixture_schema(dwbus::store::Catalog& catalog);

// --- independent recomputation of the fixture sources -----------------------

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, char delimiter);

struct OracleRow {
  std::size_t line = 0;
  std::string patient;
  std::string provider;
  std::string date;
  std::string session;
  std::string code;   // canonical analysis code, empty when unmapped
  double value = 0;   // in the canonical unit
  bool accepted = false;
};

// Per-row expectation for the biological and biometrical fixture sources
// ("lab-a", "lab-b", "biometrics"), computed from the raw files and the
// mapping tables without touching the engine.
std::vector<OracleRow> oracle_rows(const std::string& source);

}  // namespace testsupport
