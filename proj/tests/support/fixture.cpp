#include "fixture.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dwbus/dsl.hpp"
#include "seed.hpp"

namespace fs = std::filesystem;

namespace testsupport {

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  for (;;) {
    path_ = fs::temp_directory_path() /
            ("dwbus-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    if (fs::create_directory(path_)) return;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

dwbus::etl::LoadManifest fixture_manifest(const std::vector<std::string>& only) {
  auto m = dwbus::etl::parse_manifest(fixture_path("medical/sources.manifest"));
  if (only.empty()) return m;
  std::vector<dwbus::etl::SourceDescriptor> kept;
  for (const auto& name : only) {
    for (const auto& s : m.sources) {
      if (s.name == name) kept.push_back(s);
    }
  }
  m.sources = kept;
  return m;
}

void install_fixture_schema(dwbus::store::Catalog& catalog) {
  auto parsed = dwbus::dsl::parse_schema_file(fixture_path("medical/medical.dws"));
  if (!parsed.ok()) throw std::runtime_error("fixture schema does not parse");
  dwbus::etl::install_schema(*parsed.schema, catalog);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          fields.back() += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == delimiter) {
        fields.emplace_back();
      } else {
        fields.back() += c;
      }
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

namespace {

// ASCII plus the upper-case Latin-1 block encoded in UTF-8 (C3 80..9E).
std::string fold(const std::string& raw) {
  std::string lowered;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c >= 'A' && c <= 'Z') {
      lowered += static_cast<char>(c + 32);
    } else if (c == 0xC3 && i + 1 < raw.size()) {
      const auto d = static_cast<unsigned char>(raw[i + 1]);
      lowered += static_cast<char>(c);
      lowered += static_cast<char>((d >= 0x80 && d <= 0x9E && d != 0x97) ? d + 0x20 : d);
      ++i;
    } else {
      lowered += static_cast<char>(c);
    }
  }
  std::istringstream words(lowered);
  std::string out, w;
  while (words >> w) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

struct Tables {
  std::map<std::string, std::string> synonyms;
  std::map<std::string, std::string> canonical;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> conversions;
};

Tables tables() {
  Tables t;
  const auto dir = fs::path(fixture_path("medical/mapping"));
  auto syn = read_csv(dir / "synonyms.csv", ',');
  for (std::size_t i = 1; i < syn.size(); ++i) t.synonyms[fold(syn[i][0])] = syn[i][1];
  auto can = read_csv(dir / "canonical_units.csv", ',');
  for (std::size_t i = 1; i < can.size(); ++i) t.canonical[can[i][0]] = can[i][1];
  auto units = read_csv(dir / "units.csv", ',');
  for (std::size_t i = 1; i < units.size(); ++i) {
    t.conversions[{units[i][0], units[i][1]}] = {std::stod(units[i][2]), std::stod(units[i][3])};
  }
  return t;
}

std::string session_of(const std::string& raw) {
  const auto s = fold(raw);
  if (s.empty()) return "unspecified";
  if (s == "before" || s == "avant") return "before-training";
  if (s == "after" || s == "après") return "after-training";
  throw std::runtime_error("oracle: unknown session " + raw);
}

struct Layout {
  std::string file;
  char delimiter;
  std::string provider;
  bool dmy;
  int patient, date, session, label, value, unit;
};

Layout layout_of(const std::string& source) {
  if (source == "lab-a") return {"lab_a.csv", ',', "lab-a", false, 0, 4, 5, 6, 7, 8};
  if (source == "lab-b") return {"lab_b.csv", ';', "lab-b", true, 0, 1, 2, 3, 4, 5};
  if (source == "biometrics") return {"biometrics.csv", ',', "medical-centre", false, 0, 1, 2, 3, 4, 5};
  throw std::invalid_argument("oracle has no layout for " + source);
}

}  // namespace

std::vector<OracleRow> oracle_rows(const std::string& source) {
  const auto t = tables();
  const auto layout = layout_of(source);
  const auto rows = read_csv(fs::path(fixture_path("medical/sources")) / layout.file, layout.delimiter);
  std::vector<OracleRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    OracleRow o;
    o.line = i + 1;
    o.patient = r[layout.patient];
    o.provider = layout.provider;
    const auto& d = r[layout.date];
    o.date = layout.dmy ? d.substr(6, 4) + "-" + d.substr(3, 2) + "-" + d.substr(0, 2) : d.substr(0, 10);
    o.session = session_of(r[layout.session]);
    auto syn = t.synonyms.find(fold(r[layout.label]));
    if (syn != t.synonyms.end()) {
      o.code = syn->second;
      std::string num = r[layout.value];
      for (auto& c : num) {
        if (c == ',') c = '.';
      }
      const double raw = std::stod(num);
      const auto& unit = r[layout.unit];
      const auto& canonical = t.canonical.at(o.code);
      if (unit == canonical) {
        o.value = raw;
        o.accepted = true;
      } else if (auto conv = t.conversions.find({unit, canonical}); conv != t.conversions.end()) {
        o.value = raw * conv->second.first + conv->second.second;
        o.accepted = true;
      }
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace testsupport
