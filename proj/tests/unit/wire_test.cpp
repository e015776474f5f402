#include <gtest/gtest.h>

#include <random>

#include "dwbus/wire.hpp"
#include "seed.hpp"

using namespace dwbus;
using wire::json;

namespace {

template <typename F>
std::string code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "no error";
}

}  // namespace

TEST(Wire, Values) {
  EXPECT_EQ(wire::value_to_json(Value{}), json(nullptr));
  EXPECT_EQ(wire::value_to_json(Value{std::int64_t{7}}), json(7));
  EXPECT_EQ(wire::value_from_json(json(2.5)), Value{2.5});
  EXPECT_EQ(wire::value_from_json(json(3)), Value{std::int64_t{3}});
  EXPECT_EQ(code_of([] { wire::value_from_json(json(true)); }), errc::bad_request);
  EXPECT_EQ(wire::tuple_to_json({Value{std::string("P001")}}), json("P001"));
  EXPECT_EQ(wire::tuple_to_json({Value{std::string("2004-03-02")}, Value{std::string("before-training")}}),
            json::array({"2004-03-02", "before-training"}));
  EXPECT_EQ(wire::tuple_from_json(json::array({1, "x"})).size(), 2u);
}

TEST(Wire, QueryRejectsUnknownFields) {
  const auto ok = json::parse(R"({"fact":"biological","measures":[{"measure":"value","aggregate":"avg"}]})");
  EXPECT_EQ(wire::query_from_json(ok).measures[0].aggregate, olap::Aggregate::avg);
  auto extra = ok;
  extra["limit"] = 10;
  EXPECT_EQ(code_of([&] { wire::query_from_json(extra); }), errc::bad_request);
  auto bad_agg = ok;
  bad_agg["measures"][0]["aggregate"] = "median";
  EXPECT_EQ(code_of([&] { wire::query_from_json(bad_agg); }), errc::bad_request);
  EXPECT_EQ(code_of([] { wire::query_from_json(json::parse(R"({"measures":[]})")); }), errc::bad_request);
  EXPECT_EQ(code_of([] { wire::parse("{not json"); }), errc::bad_request);
}

TEST(Wire, CanonicalFormSortsKeys) {
  const auto a = json::parse(R"({"b":1,"a":{"d":2,"c":3}})");
  const auto b = json::parse(R"({"a":{"c":3,"d":2},"b":1})");
  EXPECT_EQ(wire::canonical(a), wire::canonical(b));
  EXPECT_EQ(wire::canonical(a), R"({"a":{"c":3,"d":2},"b":1})");
}

TEST(Wire, ErrorShape) {
  const auto e = wire::error_json("unknown_name", "no such fact");
  EXPECT_EQ(e.at("error").at("code"), "unknown_name");
  EXPECT_EQ(e.at("error").at("message"), "no such fact");
}

TEST(WireProperty, QueriesRoundTrip) {
  const auto world = testsupport::make_world(3, 4, 10);
  std::mt19937_64 rng(71);
  for (int i = 0; i < 500; ++i) {
    auto q = testsupport::random_query(rng, world);
    q.flag_normality = rng() % 2;
    const auto j = wire::to_json(q);
    EXPECT_EQ(wire::query_from_json(j), q) << j.dump();
    EXPECT_EQ(wire::canonical(wire::to_json(wire::query_from_json(wire::parse(j.dump())))), wire::canonical(j));
  }
}
