#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "driftwatch/drift_log.hpp"
#include "driftwatch/errors.hpp"
#include "example_log.hpp"

using namespace driftwatch;
using fixtures::at;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "driftwatch_tests";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

std::unique_ptr<DriftLog> example_log() {
  auto log = std::make_unique<DriftLog>(fixtures::example_schema());
  for (const auto& e : fixtures::example_entries()) log->append(e);
  return log;
}

}  // namespace

TEST_CASE("append accepts the example rows and assigns sequential ids") {
  DriftLog log(fixtures::example_schema());
  const auto rows = fixtures::example_entries();
  CHECK(log.append(rows[0]) == 0);
  CHECK(log.append(rows[1]) == 1);
  CHECK(log.size() == 2);
}

TEST_CASE("append rejects schema violations with the field name") {
  DriftLog log(fixtures::example_schema());
  auto e = fixtures::example_entries()[0];
  e.attributes.erase("weather");
  try {
    log.append(e);
    FAIL("expected SchemaError");
  } catch (const SchemaError& err) {
    CHECK(err.field() == "weather");
  }
  auto extra = fixtures::example_entries()[0];
  extra.attributes["lens"] = "acme";
  CHECK_THROWS_AS(log.append(extra), SchemaError);
  CHECK(log.size() == 0);
}

TEST_CASE("duplicate entries are separate rows") {
  DriftLog log(fixtures::example_schema());
  const auto e = fixtures::example_entries()[3];
  log.append(e);
  log.append(e);
  CHECK(log.size() == 2);
}

TEST_CASE("per-device timestamps may not go backwards") {
  DriftLog log(fixtures::example_schema());
  const auto rows = fixtures::example_entries();
  log.append(rows[3]);
  CHECK_THROWS_AS(log.append(rows[2]), InvalidInput);  // same device, earlier
  CHECK_NOTHROW(log.append(rows[0]));                  // other device
}

TEST_CASE("window filters by half-open range in insertion order") {
  DriftLog empty(fixtures::example_schema());
  CHECK(empty.window(0, 10).entries.empty());

  auto log = example_log();
  const auto all = log->window(fixtures::kDay, fixtures::kDay + 86400);
  REQUIRE(all.entries.size() == 5);
  CHECK(all.entries == fixtures::example_entries());

  const auto morning = log->window(at(8, 0, 0), at(12, 0, 0));
  REQUIRE(morning.entries.size() == 2);
  CHECK(morning.entries[0].attributes.at("weather") == "snow");
  CHECK(log->window(at(6, 2, 1), at(6, 2, 23)).entries.size() == 1);

  CHECK_THROWS_AS(log->window(10, 10), InvalidInput);
  CHECK_THROWS_AS(log->window(11, 10), InvalidInput);
}

TEST_CASE("count over the example log") {
  const auto w = fixtures::example_window();
  CHECK(count(w, Itemset{{"weather", "snow"}}, DriftFilter::drifted) == 2);
  CHECK(count(w, Itemset{}, DriftFilter::any) == 5);
  CHECK(count(w, Itemset{{"weather", "snow"}, {"location", "Helsinki"}}, DriftFilter::drifted) == 1);
  CHECK(count(w, Itemset{{"weather", "rain"}}) == 0);
}

TEST_CASE("working copy marks are local") {
  auto log = example_log();
  const auto w = log->window(fixtures::kDay, fixtures::kDay + 86400);
  WorkingCopy copy(w);
  CHECK(copy.drifted_count() == 3);
  CHECK(copy.mark_no_drift(Itemset{{"weather", "snow"}}) == 2);
  CHECK(copy.drifted_count() == 1);
  CHECK(copy.drift(2));
  CHECK_FALSE(copy.drift(3));
  CHECK(count(log->window(fixtures::kDay, fixtures::kDay + 86400), Itemset{}, DriftFilter::drifted) == 3);

  WorkingCopy untouched(w);
  CHECK(untouched.mark_no_drift(Itemset{{"weather", "hail"}}) == 0);
  CHECK(untouched.mark_no_drift(Itemset{{"weather", "snow"}, {"location", "Tibet"}}) == 0);
  CHECK(untouched.drifted_count() == 3);

  WorkingCopy twice(w);
  const auto a = twice.mark_no_drift(Itemset{{"location", "Helsinki"}});
  const auto b = twice.mark_no_drift(Itemset{{"weather", "clear-day"}, {"location", "New York"}});
  CHECK(a == 1);
  CHECK(b == 1);
  CHECK(twice.drifted_count() == 3 - a - b);
}

TEST_CASE("count identities and anti-monotonicity on random logs") {
  std::mt19937_64 rng(99);
  const std::vector<std::string> weathers{"clear-day", "rain", "snow", "fog"};
  const std::vector<std::string> places{"A", "B", "C"};
  std::uniform_int_distribution<int> pick(0, 99);
  for (int trial = 0; trial < 40; ++trial) {
    LogWindow w{0, 1000, {}};
    for (int i = 0; i < 200; ++i) {
      const auto dev = "d" + std::to_string(pick(rng) % 5);
      w.entries.push_back({i, dev, "v", {{"weather", weathers[pick(rng) % 4]}, {"location", places[pick(rng) % 3]}, {"device_id", dev}},
                           pick(rng) < 30});
    }
    WorkingCopy copy(w);
    for (const auto& wx : weathers) {
      for (const auto& pl : places) {
        const Itemset one{{"weather", wx}};
        const Itemset two{{"weather", wx}, {"location", pl}};
        const Itemset three{{"weather", wx}, {"location", pl}, {"device_id", "d1"}};
        for (const auto* s : {&one, &two, &three}) {
          CHECK(count(w, *s, DriftFilter::drifted) + count(w, *s, DriftFilter::clean) ==
                count(w, *s, DriftFilter::any));
          CHECK(copy.count(*s, DriftFilter::drifted) == count(w, *s, DriftFilter::drifted));
          CHECK(copy.count(*s) == count(w, *s));
        }
        for (auto f : {DriftFilter::any, DriftFilter::drifted, DriftFilter::clean}) {
          CHECK(count(w, two, f) <= count(w, one, f));
          CHECK(count(w, three, f) <= count(w, two, f));
        }
      }
    }
  }
}

TEST_CASE("persistence round trip reproduces records") {
  const auto path = temp_path("roundtrip.ndjson");
  {
    DriftLog log(fixtures::example_schema(), path);
    for (const auto& e : fixtures::example_entries()) log.append(e);
  }
  auto reopened = DriftLog::open(path);
  CHECK(reopened->schema() == fixtures::example_schema());
  CHECK(reopened->entries() == fixtures::example_entries());

  // Appends continue after reopen, and the file is still a single valid log.
  auto extra = fixtures::example_entries()[4];
  extra.timestamp += 60;
  reopened->append(extra);
  reopened.reset();
  auto again = DriftLog::open(path);
  CHECK(again->size() == 6);
  CHECK(again->entries().back() == extra);
}

TEST_CASE("reopen rejects a mismatched schema and tolerates a torn tail") {
  const auto path = temp_path("torn.ndjson");
  {
    DriftLog log(fixtures::example_schema(), path);
    log.append(fixtures::example_entries()[0]);
  }
  CHECK_THROWS_AS(DriftLog(Schema{{"weather"}}, path), ConfigError);
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"ts\": 12, \"device";
  }
  auto log = DriftLog::open(path);
  CHECK(log->size() == 1);
}

TEST_CASE("concurrent appenders all land") {
  DriftLog log(Schema{{"weather"}});
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&log, t] {
      for (int i = 0; i < 500; ++i) {
        log.append({i, "dev" + std::to_string(t), "v", {{"weather", "rain"}}, i % 2 == 0});
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(log.size() == 2000);
  CHECK(count(log.window(0, 500), Itemset{}, DriftFilter::drifted) == 1000);
}
