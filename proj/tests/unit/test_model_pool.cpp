#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <set>

#include "driftwatch/errors.hpp"
#include "driftwatch/model_pool.hpp"

using namespace driftwatch;
using namespace driftwatch::pool;

namespace {

const Item kRain{"weather", "rain"};
const Item kSnow{"weather", "snow"};
const Item kClear{"weather", "clear-day"};
const Item kNewYork{"location", "New York"};
const Item kHelsinki{"location", "Helsinki"};
const Item kTibet{"location", "Tibet"};

ModelVersion version(std::string id, Itemset cause, std::int64_t t, double rr = 2.0) {
  auto m = std::make_shared<toy::ToyClassifier>();
  m->version_id = id;
  return {std::move(id), std::move(cause), m, t, t, rr};
}

ModelPool make_pool(int capacity = 4, Subsumption mode = Subsumption::coverage, bool bounded = true) {
  return ModelPool({capacity, bounded, mode}, version("clean", {}, 0, 0.0));
}

std::vector<std::string> ids(const ModelPool& p) {
  std::vector<std::string> out;
  for (const auto& v : p.versions()) out.push_back(v.version_id);
  return out;
}

AttributeMap attrs(std::initializer_list<Item> items) {
  AttributeMap m;
  for (const auto& i : items) m[i.attribute] = i.value;
  return m;
}

}  // namespace

TEST_CASE("exact match replaces the older version") {
  auto p = make_pool();
  p.insert(version("v1", {kRain}, 10));
  const auto evicted = p.insert(version("v2", {kRain}, 20));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].version_id == "v1");
  CHECK(ids(p) == std::vector<std::string>{"clean", "v2"});
}

TEST_CASE("a broader cause evicts the narrower one") {
  auto p = make_pool();
  p.insert(version("narrow", {kSnow, kNewYork}, 10));
  const auto evicted = p.insert(version("broad", {kSnow}, 20));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].version_id == "narrow");
  CHECK(ids(p) == std::vector<std::string>{"clean", "broad"});
}

TEST_CASE("a narrower cause is not admitted under coverage") {
  auto p = make_pool();
  p.insert(version("broad", {kSnow}, 10));
  const auto evicted = p.insert(version("narrow", {kSnow, kNewYork}, 20));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].version_id == "narrow");
  CHECK(ids(p) == std::vector<std::string>{"clean", "broad"});
}

TEST_CASE("attribute-wise mode evicts in the other direction") {
  auto p = make_pool(4, Subsumption::attribute_wise);
  p.insert(version("broad", {kSnow}, 10));
  const auto evicted = p.insert(version("narrow", {kSnow, kNewYork}, 20));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].version_id == "broad");
  CHECK(ids(p) == std::vector<std::string>{"clean", "narrow"});
}

TEST_CASE("none mode keeps nested causes side by side") {
  auto p = make_pool(4, Subsumption::none);
  p.insert(version("broad", {kSnow}, 10));
  CHECK(p.insert(version("narrow", {kSnow, kNewYork}, 20)).empty());
  CHECK(p.adapted_count() == 2);
}

TEST_CASE("LRU eviction at capacity") {
  auto p = make_pool(2);
  p.insert(version("a", {{"weather", "a"}}, 10));
  p.insert(version("b", {{"weather", "b"}}, 20));
  const auto evicted = p.insert(version("c", {{"weather", "c"}}, 30));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].version_id == "a");
  CHECK(ids(p) == std::vector<std::string>{"clean", "c", "b"});
}

TEST_CASE("LRU ties go to insertion order") {
  auto p = make_pool(1);
  p.insert(version("a", {{"weather", "a"}}, 10));
  const auto evicted = p.insert(version("b", {{"weather", "b"}}, 10));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].version_id == "a");
}

TEST_CASE("unbounded pools never evict by age") {
  auto p = make_pool(1, Subsumption::none, false);
  for (int i = 0; i < 10; ++i) CHECK(p.insert(version("v" + std::to_string(i), {{"weather", std::to_string(i)}}, i)).empty());
  CHECK(p.adapted_count() == 10);
}

TEST_CASE("clean insert replaces the pinned model") {
  auto p = make_pool(1);
  p.insert(version("a", {kRain}, 10));
  const auto evicted = p.insert(version("clean2", {}, 20, 0.0));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].version_id == "clean");
  CHECK(p.clean().version_id == "clean2");
  CHECK(p.adapted_count() == 1);
}

TEST_CASE("select prefers the most specific match") {
  auto p = make_pool(4, Subsumption::none);
  p.insert(version("rain", {kRain}, 10));
  p.insert(version("rain-ny", {kRain, kNewYork}, 5));
  CHECK(p.select(attrs({kRain, kNewYork})).version_id == "rain-ny");
  CHECK(p.select(attrs({kRain, kTibet})).version_id == "rain");
}

TEST_CASE("select falls back to the clean model") {
  auto p = make_pool();
  p.insert(version("snow", {kSnow}, 10));
  CHECK(p.select(attrs({kClear, kTibet})).version_id == "clean");
}

TEST_CASE("match count beats risk ratio") {
  auto p = make_pool(4, Subsumption::none);
  p.insert(version("snow-hel", {kSnow, kHelsinki}, 10, 2.0));
  p.insert(version("snow", {kSnow}, 10, 3.0));
  CHECK(p.select(attrs({kSnow, kHelsinki})).version_id == "snow-hel");
}

TEST_CASE("select tie-breaks on risk ratio then recency then id") {
  auto p = make_pool(4, Subsumption::none);
  p.insert(version("loc", {kNewYork}, 10, 2.0));
  p.insert(version("wx", {kRain}, 5, 3.0));
  CHECK(p.select(attrs({kRain, kNewYork})).version_id == "wx");

  auto q = make_pool(4, Subsumption::none);
  q.insert(version("loc", {kNewYork}, 10, 2.0));
  q.insert(version("wx", {kRain}, 5, 2.0));
  CHECK(q.select(attrs({kRain, kNewYork})).version_id == "loc");

  auto r = make_pool(4, Subsumption::none);
  r.insert(version("b", {kNewYork}, 10, 2.0));
  r.insert(version("a", {kRain}, 10, 2.0));
  CHECK(r.select(attrs({kRain, kNewYork})).version_id == "a");
}

TEST_CASE("config and construction errors") {
  CHECK_THROWS_AS(make_pool(0), ConfigError);
  CHECK_THROWS_AS(ModelPool({}, version("x", {kRain}, 0)), InvalidInput);
  CHECK(subsumption_from_string("attribute-wise") == Subsumption::attribute_wise);
  CHECK_THROWS_AS(subsumption_from_string("wide"), ConfigError);
}

TEST_CASE("pool export") {
  auto p = make_pool();
  p.insert(version("v", {kSnow}, 10, std::numeric_limits<double>::infinity()));
  const auto j = to_json(p);
  CHECK(j["capacity"] == 4);
  CHECK(j["subsumption"] == "coverage");
  REQUIRE(j["versions"].size() == 2);
  CHECK(j["versions"][0]["version_id"] == "clean");
  CHECK(j["versions"][1]["cause"] == "weather=snow");
  CHECK(j["versions"][1]["risk_ratio"] == "inf");
}

TEST_CASE("random operation sequences keep the pool invariants") {
  const std::vector<Item> universe{kRain, kSnow, kClear, kNewYork, kHelsinki, kTibet, {"device_id", "d1"},
                                   {"device_id", "d2"}};
  std::mt19937_64 rng(42);
  for (auto mode : {Subsumption::coverage, Subsumption::attribute_wise, Subsumption::none}) {
    for (int capacity : {1, 2, 4}) {
      auto p = make_pool(capacity, mode);
      std::int64_t clock = 0;
      for (int op = 0; op < 10000 / 9; ++op) {
        std::uniform_int_distribution<int> kind(0, 9);
        const int k = kind(rng);
        if (k < 7) {
          std::vector<Item> items;
          std::uniform_int_distribution<int> size(1, 3);
          std::uniform_int_distribution<std::size_t> pick(0, universe.size() - 1);
          const int n = size(rng);
          for (int i = 0; i < n; ++i) items.push_back(universe[pick(rng)]);
          clock += std::uniform_int_distribution<int>(0, 2)(rng);
          const auto before = p.size();
          const auto evicted = p.insert(version("v" + std::to_string(op), Itemset(items), clock,
                                                std::uniform_real_distribution<double>(1.0, 4.0)(rng)));
          // Versions are conserved: what went in either stayed or came back out.
          CHECK(before + 1 == p.size() + evicted.size());
        } else if (k < 9) {
          AttributeMap a;
          for (const auto& item : universe) {
            if (std::bernoulli_distribution(0.4)(rng)) a[item.attribute] = item.value;
          }
          const auto& chosen = p.select(a);
          CHECK(chosen.cause.matches(a));
          CHECK(&p.select(a) == &chosen);
          for (const auto& v : p.versions()) {
            if (v.cause.matches(a)) CHECK(v.cause.size() <= chosen.cause.size());
          }
        } else {
          p.insert(version("clean" + std::to_string(op), {}, clock, 0.0));
        }
        REQUIRE(p.adapted_count() <= static_cast<std::size_t>(capacity));
        const auto vs = p.versions();
        REQUIRE(vs.front().is_clean());
        std::set<Itemset> causes;
        for (std::size_t i = 1; i < vs.size(); ++i) {
          CHECK_FALSE(vs[i].is_clean());
          CHECK(causes.insert(vs[i].cause).second);
          if (mode == Subsumption::none) continue;
          for (std::size_t j = 1; j < vs.size(); ++j) {
            if (i != j) CHECK_FALSE(vs[i].cause.strict_subset_of(vs[j].cause));
          }
        }
      }
    }
  }
}
