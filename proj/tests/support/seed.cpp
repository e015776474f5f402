#include "seed.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dwbus/dsl.hpp"
#include "dwbus/etl.hpp"

namespace testsupport {

using dwbus::olap::Aggregate;
using dwbus::olap::Comparison;
using dwbus::olap::CubeQuery;
using dwbus::olap::Filter;

std::string fixture_path(const std::string& relative) { return std::string(DWBUS_FIXTURES) + "/" + relative; }

const PatientRec& SeedWorld::patient(const std::string& code) const {
  for (const auto& p : patients) {
    if (p.code == code) return p;
  }
  throw std::out_of_range(code);
}

const ProviderRec& SeedWorld::provider(const std::string& code) const {
  for (const auto& p : providers) {
    if (p.code == code) return p;
  }
  throw std::out_of_range(code);
}

const AnalysisRec& SeedWorld::analysis(const std::string& code) const {
  for (const auto& a : analyses) {
    if (a.code == code) return a;
  }
  throw std::out_of_range(code);
}

std::size_t SeedWorld::fact_count() const {
  std::size_t n = 0;
  for (const auto& [name, rows] : facts) n += rows.size();
  return n;
}

dwbus::model::Schema seed_schema() {
  auto parsed = dwbus::dsl::parse_schema_file(fixture_path("medical/medical.dws"));
  if (!parsed.ok()) throw std::runtime_error("fixture schema does not parse");
  dwbus::model::FactTable training;
  training.name = "training";
  training.grain = {{"patient", "patient"}, {"data-provider", "data-provider"}, {"time", "session"}};
  training.measures = {{"duration", dwbus::model::MeasureKind::integer, dwbus::model::Aggregability::additive},
                       {"intensity", dwbus::model::MeasureKind::decimal, dwbus::model::Aggregability::semi_additive}};
  return dwbus::model::add_fact_table(*parsed.schema, training);
}

namespace {

int days_in_month(int y, int m) {
  static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
  return d[m - 1];
}

std::string ymd(int y, int m, int d) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

double round_to(double v, int digits) {
  const double p = std::pow(10.0, digits);
  return std::round(v * p) / p;
}

}  // namespace

SeedWorld make_world(std::uint64_t seed, int patients, int days) {
  std::mt19937_64 rng(seed);
  SeedWorld w;
  static const char* sports[] = {"rowing", "cycling", "athletics", "swimming", "fencing", "judo"};
  for (int i = 1; i <= patients; ++i) {
    char code[24];
    std::snprintf(code, sizeof(code), "P%03d", i);
    w.patients.push_back({code, 1975 + static_cast<std::int64_t>(rng() % 16), (rng() % 2) ? "F" : "M",
                          sports[rng() % 6]});
  }
  w.providers = {{"lab-a", "Laboratoire A", "laboratory"},
                 {"lab-b", "Laboratoire B", "laboratory"},
                 {"medical-centre", "Centre medical", "clinic"}};
  w.analyses = {{"hemoglobin", "g/L", "SLBC-0101", "hemogram", "hematology"},
                {"hematocrit", "%", "SLBC-0104", "hemogram", "hematology"},
                {"reticulocytes", "10^9/L", "SLBC-0102", "reticulocyte-numbering", "hematology"},
                {"ferritin", "µg/L", "SLBC-0203", "iron-status", "biochemistry"},
                {"transferrin", "g/L", "SLBC-0204", "iron-status", "biochemistry"},
                {"cortisol", "nmol/L", "SLBC-0311", "hormones", "endocrinology"}};
  const std::map<std::string, std::pair<double, double>> dist = {
      {"hemoglobin", {145, 14}}, {"hematocrit", {43, 4}},     {"reticulocytes", {60, 22}},
      {"ferritin", {90, 45}},    {"transferrin", {2.7, 0.4}}, {"cortisol", {420, 130}}};

  auto& bio = w.facts["biological"];
  auto& training = w.facts["training"];
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& p : w.patients) {
    int y = 2004, m = 1, d = 5;
    for (int day = 0; day < days; ++day) {
      const std::string date = ymd(y, m, d);
      for (const char* session : {"before-training", "after-training"}) {
        const int n = static_cast<int>(rng() % 3);
        for (int k = 0; k < n; ++k) {
          const auto& a = w.analyses[rng() % w.analyses.size()];
          std::normal_distribution<double> nd(dist.at(a.code).first, dist.at(a.code).second);
          SeedFact f{p.code, (rng() % 2) ? "lab-a" : "lab-b", date, session, a.code, {}};
          f.measures["value"] = round_to(std::max(0.05, nd(rng)), 3);
          bio.push_back(std::move(f));
        }
        if (unit(rng) < 0.7) {
          SeedFact f{p.code, "medical-centre", date, session, "", {}};
          f.measures["duration"] = static_cast<std::int64_t>(20 + rng() % 161);
          f.measures["intensity"] = round_to(1.0 + 9.0 * unit(rng), 4);
          training.push_back(std::move(f));
        }
      }
      if (++d > days_in_month(y, m)) {
        d = 1;
        if (++m > 12) {
          m = 1;
          ++y;
        }
      }
    }
  }
  // Interleave the storage order a little so rows of one group are not
  // contiguous.
  std::shuffle(bio.begin(), bio.end(), rng);
  std::shuffle(training.begin(), training.end(), rng);
  return w;
}

std::vector<dwbus::mapping::ReferenceInterval> seed_intervals() {
  using dwbus::mapping::ReferenceInterval;
  return {ReferenceInterval{"hemoglobin", 125, 170, {}},
          ReferenceInterval{"hemoglobin", 120, 160, {{"sex", "F"}}},
          ReferenceInterval{"hemoglobin", 130, 175, {{"sex", "M"}}},
          ReferenceInterval{"ferritin", 20, 250, {}},
          ReferenceInterval{"ferritin", 30, 300, {{"sex", "M"}, {"sport", "cycling"}}},
          ReferenceInterval{"cortisol", 140, 690, {}},
          ReferenceInterval{"reticulocytes", 20, 100, {}}};
}

void install_world(const SeedWorld& w, dwbus::store::Catalog& catalog) {
  using dwbus::etl::Attributes;
  {
    auto writer = catalog.begin_write();
    dwbus::store::StagedBatch batch;
    batch.batch_id = "seed-schema";
    batch.schema = seed_schema();
    dwbus::store::Metadata meta;
    meta.intervals = seed_intervals();
    batch.metadata = meta;
    writer.install(std::move(batch));
  }
  auto writer = catalog.begin_write();
  dwbus::etl::Stager st(writer.base(), "seed-rows");
  auto patient_key = [&](const std::string& code) {
    const auto& p = w.patient(code);
    return st.resolve_dimension_member(
        "patient", {}, Attributes{{"code", p.code}, {"birth-year", p.birth_year}, {"sex", p.sex}, {"sport", p.sport}});
  };
  auto provider_key = [&](const std::string& code) {
    const auto& p = w.provider(code);
    return st.resolve_dimension_member("data-provider", {},
                                       Attributes{{"code", p.code}, {"name", p.name}, {"kind", p.kind}});
  };
  auto time_key = [&](const SeedFact& f) {
    return st.resolve_dimension_member(
        "time", {},
        Attributes{{"date", f.date},
                   {"session", f.session},
                   {"month", f.date.substr(0, 7)},
                   {"year", static_cast<std::int64_t>(std::stoi(f.date.substr(0, 4)))}});
  };
  auto analysis_key = [&](const std::string& code) {
    const auto& a = w.analysis(code);
    return st.resolve_dimension_member("medical-analysis", {},
                                       Attributes{{"code", a.code},
                                                  {"unit", a.unit},
                                                  {"nomenclature", a.nomenclature},
                                                  {"examination", a.examination},
                                                  {"category", a.category}});
  };
  for (const auto& f : w.facts.at("biological")) {
    st.append_fact("biological", {patient_key(f.patient), provider_key(f.provider), time_key(f), analysis_key(f.analysis)},
                   {f.measures.at("value")});
  }
  for (const auto& f : w.facts.at("training")) {
    st.append_fact("training", {patient_key(f.patient), provider_key(f.provider), time_key(f)},
                   {f.measures.at("duration"), f.measures.at("intensity")});
  }
  writer.install(st.take());
}

OTuple level_value(const SeedWorld& w, const SeedFact& f, const std::string& dimension, const std::string& level) {
  if (dimension == "patient" && level == "patient") return {f.patient};
  if (dimension == "data-provider" && level == "data-provider") return {f.provider};
  if (dimension == "time") {
    if (level == "session") return {f.date, f.session};
    if (level == "day") return {f.date};
    if (level == "month") return {f.date.substr(0, 7)};
    if (level == "year") return {static_cast<std::int64_t>(std::stoi(f.date.substr(0, 4)))};
  }
  if (dimension == "medical-analysis") {
    const auto& a = w.analysis(f.analysis);
    if (level == "analysis") return {a.code};
    if (level == "examination") return {a.examination};
    if (level == "category") return {a.category};
  }
  throw std::invalid_argument("oracle has no level " + dimension + "/" + level);
}

OTuple coarsen(const SeedWorld& w, const std::string& dimension, const std::string& fine_level, const OTuple& fine) {
  if (dimension == "time") {
    const auto& date = std::get<std::string>(fine[0]);
    if (fine_level == "session") return {date};
    if (fine_level == "day") return {date.substr(0, 7)};
    if (fine_level == "month") return {static_cast<std::int64_t>(std::stoi(date.substr(0, 4)))};
  }
  if (dimension == "medical-analysis") {
    const auto& v = std::get<std::string>(fine[0]);
    if (fine_level == "analysis") return {w.analysis(v).examination};
    if (fine_level == "examination") {
      for (const auto& a : w.analyses) {
        if (a.examination == v) return {a.category};
      }
    }
  }
  throw std::invalid_argument("oracle cannot coarsen " + dimension + "/" + fine_level);
}

std::vector<std::string> dimensions_for(const std::string& fact) {
  if (fact == "biological") return {"patient", "data-provider", "time", "medical-analysis"};
  return {"patient", "data-provider", "time"};
}

std::vector<std::string> levels_for(const std::string&, const std::string& dimension) {
  if (dimension == "time") return {"session", "day", "month", "year"};
  if (dimension == "medical-analysis") return {"analysis", "examination", "category"};
  return {dimension};
}

std::vector<std::string> measures_for(const std::string& fact) {
  if (fact == "biological") return {"value"};
  return {"duration", "intensity"};
}

bool measure_is_integer(const std::string& fact, const std::string& measure) {
  return fact == "training" && measure == "duration";
}

namespace {

int rank(const Value& v) {
  if (std::holds_alternative<std::monostate>(v)) return 0;
  if (std::holds_alternative<std::string>(v)) return 2;
  return 1;
}

double num(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

}  // namespace

int ocompare(const Value& a, const Value& b) {
  const int ra = rank(a), rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (ra == 0) return 0;
  if (ra == 2) {
    const auto& x = std::get<std::string>(a);
    const auto& y = std::get<std::string>(b);
    return x < y ? -1 : (y < x ? 1 : 0);
  }
  if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
    const auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
    return x < y ? -1 : (y < x ? 1 : 0);
  }
  const double x = num(a), y = num(b);
  return x < y ? -1 : (y < x ? 1 : 0);
}

int ocompare(const OTuple& a, const OTuple& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (int c = ocompare(a[i], b[i])) return c;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

bool oracle_matches(const SeedFact& f, const SeedWorld& w, const Filter& filter) {
  const auto v = level_value(w, f, filter.dimension, filter.level);
  if (filter.op == Comparison::in) {
    for (const auto& lit : filter.literals) {
      if (ocompare(v, lit) == 0) return true;
    }
    return false;
  }
  const int c = ocompare(v, filter.literals.at(0));
  switch (filter.op) {
    case Comparison::eq: return c == 0;
    case Comparison::ne: return c != 0;
    case Comparison::lt: return c < 0;
    case Comparison::le: return c <= 0;
    case Comparison::gt: return c > 0;
    case Comparison::ge: return c >= 0;
    case Comparison::in: break;
  }
  return false;
}

namespace {

struct KeyLess {
  bool operator()(const std::vector<OTuple>& a, const std::vector<OTuple>& b) const {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (int c = ocompare(a[i], b[i])) return c < 0;
    }
    return false;
  }
};

struct Bag {
  std::uint64_t rows = 0;
  std::vector<std::vector<Value>> inputs;  // per measure spec, non-null values
};

Value aggregate(const std::vector<Value>& xs, Aggregate agg, bool integer, std::uint64_t rows) {
  if (agg == Aggregate::count) return static_cast<std::int64_t>(rows);
  if (xs.empty()) return Value{};
  switch (agg) {
    case Aggregate::sum:
      if (integer) {
        std::int64_t s = 0;
        for (const auto& x : xs) s += std::get<std::int64_t>(x);
        return s;
      } else {
        double s = 0;
        for (const auto& x : xs) s += num(x);
        return s;
      }
    case Aggregate::avg: {
      double s = 0;
      for (const auto& x : xs) s += num(x);
      return s / static_cast<double>(xs.size());
    }
    case Aggregate::min: {
      Value m = xs[0];
      for (const auto& x : xs) {
        if (ocompare(x, m) < 0) m = x;
      }
      return m;
    }
    case Aggregate::max: {
      Value m = xs[0];
      for (const auto& x : xs) {
        if (ocompare(x, m) > 0) m = x;
      }
      return m;
    }
    case Aggregate::count: break;
  }
  return Value{};
}

}  // namespace

OResult oracle_execute(const SeedWorld& w, const CubeQuery& q) {
  std::map<std::vector<OTuple>, Bag, KeyLess> groups;
  Bag all;
  all.inputs.resize(q.measures.size());
  const auto it = w.facts.find(q.fact);
  const std::vector<SeedFact> none;
  const auto& rows = it == w.facts.end() ? none : it->second;
  for (const auto& f : rows) {
    bool keep = true;
    for (const auto& filter : q.filters) keep = keep && oracle_matches(f, w, filter);
    if (!keep) continue;
    std::vector<OTuple> key;
    for (const auto& g : q.group_by) key.push_back(level_value(w, f, g.dimension, g.level));
    auto& bag = groups[key];
    bag.inputs.resize(q.measures.size());
    ++bag.rows;
    ++all.rows;
    for (std::size_t i = 0; i < q.measures.size(); ++i) {
      const auto& v = f.measures.at(q.measures[i].measure);
      if (std::holds_alternative<std::monostate>(v)) continue;
      bag.inputs[i].push_back(v);
      all.inputs[i].push_back(v);
    }
  }
  OResult r;
  for (const auto& [key, bag] : groups) {
    OCell c{key, {}, bag.rows};
    for (std::size_t i = 0; i < q.measures.size(); ++i) {
      c.values.push_back(aggregate(bag.inputs[i], q.measures[i].aggregate,
                                   measure_is_integer(q.fact, q.measures[i].measure), bag.rows));
    }
    r.cells.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < q.measures.size(); ++i) {
    r.totals.push_back(aggregate(all.inputs[i], q.measures[i].aggregate,
                                 measure_is_integer(q.fact, q.measures[i].measure), all.rows));
  }
  r.total_count = all.rows;
  return r;
}

CubeQuery random_query(std::mt19937_64& rng, const SeedWorld& w) {
  CubeQuery q;
  q.fact = (rng() % 5 < 3) ? "biological" : "training";
  const auto& rows = w.facts.at(q.fact);
  auto dims = dimensions_for(q.fact);
  std::shuffle(dims.begin(), dims.end(), rng);
  const std::size_t n_group = rng() % std::min<std::size_t>(4, dims.size() + 1);
  for (std::size_t i = 0; i < n_group; ++i) {
    const auto levels = levels_for(q.fact, dims[i]);
    q.group_by.push_back({dims[i], levels[rng() % levels.size()]});
  }
  const auto measures = measures_for(q.fact);
  static const Aggregate aggs[] = {Aggregate::sum, Aggregate::avg, Aggregate::min, Aggregate::max, Aggregate::count};
  const std::size_t n_measures = 1 + rng() % 3;
  for (std::size_t i = 0; i < n_measures; ++i) {
    q.measures.push_back({measures[rng() % measures.size()], aggs[rng() % 5]});
  }
  static const Comparison ops[] = {Comparison::eq, Comparison::ne, Comparison::lt, Comparison::le,
                                   Comparison::gt, Comparison::ge, Comparison::in};
  const std::size_t n_filters = rng() % 3;
  const auto all_dims = dimensions_for(q.fact);
  for (std::size_t i = 0; i < n_filters; ++i) {
    Filter f;
    f.dimension = all_dims[rng() % all_dims.size()];
    const auto levels = levels_for(q.fact, f.dimension);
    f.level = levels[rng() % levels.size()];
    f.op = ops[rng() % 7];
    const std::size_t n_lit = f.op == Comparison::in ? 1 + rng() % 3 : 1;
    for (std::size_t k = 0; k < n_lit; ++k) {
      f.literals.push_back(level_value(w, rows[rng() % rows.size()], f.dimension, f.level));
    }
    q.filters.push_back(std::move(f));
  }
  return q;
}

bool close_rel(double a, double b, double rel_tol) {
  if (a == b) return true;
  return std::fabs(a - b) <= rel_tol * std::max(std::fabs(a), std::fabs(b));
}

namespace {

std::string show(const Value& v) {
  std::ostringstream o;
  if (std::holds_alternative<std::monostate>(v)) o << "null";
  else if (const auto* i = std::get_if<std::int64_t>(&v)) o << *i << "i";
  else if (const auto* d = std::get_if<double>(&v)) o.precision(17), o << *d << "d";
  else o << '"' << std::get<std::string>(v) << '"';
  return o.str();
}

bool same_value(const Value& got, const Value& want, Aggregate agg, bool integer, double tol, std::string& why) {
  const bool approx = (agg == Aggregate::avg) || (agg == Aggregate::sum && !integer);
  if (approx) {
    if (std::holds_alternative<std::monostate>(want) || std::holds_alternative<std::monostate>(got)) {
      if (got.index() == want.index()) return true;
    } else if (std::holds_alternative<double>(got) && close_rel(num(got), num(want), tol)) {
      return true;
    }
  } else if (got.index() == want.index() && ocompare(got, want) == 0) {
    return true;
  }
  why = "got " + show(got) + " want " + show(want);
  return false;
}

}  // namespace

bool same_result(const dwbus::olap::CubeResult& got, const OResult& want, const CubeQuery& q, double tol,
                 std::string* why) {
  std::string local;
  std::string& w = why ? *why : local;
  if (got.cells.size() != want.cells.size()) {
    w = "cell count " + std::to_string(got.cells.size()) + " vs " + std::to_string(want.cells.size());
    return false;
  }
  for (std::size_t i = 0; i < got.cells.size(); ++i) {
    const auto& g = got.cells[i];
    const auto& o = want.cells[i];
    if (g.key.size() != o.key.size()) {
      w = "key width differs at cell " + std::to_string(i);
      return false;
    }
    for (std::size_t k = 0; k < g.key.size(); ++k) {
      if (g.key[k].size() != o.key[k].size()) {
        w = "tuple width differs at cell " + std::to_string(i);
        return false;
      }
      for (std::size_t j = 0; j < g.key[k].size(); ++j) {
        if (g.key[k][j].index() != o.key[k][j].index() || ocompare(g.key[k][j], o.key[k][j]) != 0) {
          w = "key differs at cell " + std::to_string(i) + ": " + show(g.key[k][j]) + " vs " + show(o.key[k][j]);
          return false;
        }
      }
    }
    if (g.count != o.count) {
      w = "count differs at cell " + std::to_string(i);
      return false;
    }
    for (std::size_t m = 0; m < q.measures.size(); ++m) {
      std::string detail;
      if (!same_value(g.values.at(m), o.values[m], q.measures[m].aggregate,
                      measure_is_integer(q.fact, q.measures[m].measure), tol, detail)) {
        w = "cell " + std::to_string(i) + " measure " + std::to_string(m) + ": " + detail;
        return false;
      }
    }
  }
  if (got.total_count != want.total_count) {
    w = "total count differs";
    return false;
  }
  for (std::size_t m = 0; m < q.measures.size(); ++m) {
    std::string detail;
    if (!same_value(got.totals.at(m), want.totals[m], q.measures[m].aggregate,
                    measure_is_integer(q.fact, q.measures[m].measure), tol, detail)) {
      w = "total " + std::to_string(m) + ": " + detail;
      return false;
    }
  }
  return true;
}

Value oracle_cell(const SeedWorld& w, const SeedFact& f, const std::string& column) {
  const auto dot = column.find('.');
  if (dot == std::string::npos) return f.measures.at(column);
  const auto dim = column.substr(0, dot);
  const auto attr = column.substr(dot + 1);
  if (dim == "patient") {
    const auto& p = w.patient(f.patient);
    if (attr == "code") return p.code;
    if (attr == "birth-year") return p.birth_year;
    if (attr == "sex") return p.sex;
    if (attr == "sport") return p.sport;
  }
  if (dim == "data-provider") {
    const auto& p = w.provider(f.provider);
    if (attr == "code") return p.code;
    if (attr == "name") return p.name;
    if (attr == "kind") return p.kind;
  }
  if (dim == "time") {
    if (attr == "date") return f.date;
    if (attr == "session") return f.session;
    if (attr == "month") return f.date.substr(0, 7);
    if (attr == "year") return static_cast<std::int64_t>(std::stoi(f.date.substr(0, 4)));
  }
  if (dim == "medical-analysis") {
    const auto& a = w.analysis(f.analysis);
    if (attr == "code") return a.code;
    if (attr == "unit") return a.unit;
    if (attr == "nomenclature") return a.nomenclature;
    if (attr == "examination") return a.examination;
    if (attr == "category") return a.category;
  }
  throw std::invalid_argument("oracle has no column " + column);
}

}  // namespace testsupport
