#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "driftwatch/errors.hpp"
#include "driftwatch/rca.hpp"
#include "example_log.hpp"

using namespace driftwatch;
using namespace driftwatch::rca;

namespace {

const Item kSnow{"weather", "snow"};
const Item kClear{"weather", "clear-day"};
const Item kNewYork{"location", "New York"};
const Item kHelsinki{"location", "Helsinki"};
const Item kAndroid21{"device_id", "android_21"};

const RootCause* find(const std::vector<RootCause>& v, const Itemset& s) {
  for (const auto& c : v) {
    if (c.itemset == s) return &c;
  }
  return nullptr;
}

void check_metrics(const Metrics& m, double occ, double sup, double conf, double rr) {
  CHECK(m.occurrence == doctest::Approx(occ).epsilon(0.005));
  CHECK(std::abs(m.support - sup) <= 0.005);
  CHECK(std::abs(m.confidence - conf) <= 0.005);
  CHECK(std::abs(m.risk_ratio - rr) <= 0.005);
}

// Independent oracle: enumerate every itemset of up to `max_size` distinct
// attributes over the window's values and compute metrics by direct counting.
std::map<Itemset, Metrics> brute_force_table(const LogWindow& w, const Thresholds& t) {
  std::map<std::string, std::set<std::string>> values;
  for (const auto& e : w.entries) {
    for (const auto& [k, v] : e.attributes) values[k].insert(v);
  }
  std::vector<std::string> attrs;
  for (const auto& [k, v] : values) attrs.push_back(k);

  std::map<Itemset, Metrics> out;
  std::vector<Item> current;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (!current.empty()) {
      const Itemset s(current);
      std::size_t n = w.entries.size(), d = 0, m = 0, md = 0;
      for (const auto& e : w.entries) {
        d += e.drift;
        bool match = true;
        for (const auto& it : current) match = match && e.attributes.at(it.attribute) == it.value;
        if (match) {
          ++m;
          md += e.drift;
        }
      }
      if (m > 0 && d > 0 && static_cast<double>(md) / n >= t.min_occurrence) {
        Metrics x;
        x.occurrence = static_cast<double>(md) / n;
        x.support = static_cast<double>(md) / d;
        x.confidence = static_cast<double>(md) / m;
        if (n == m) {
          x.risk_ratio_defined = false;
        } else if (d == md) {
          x.risk_ratio = md > 0 ? INFINITY : 0.0;
        } else {
          x.risk_ratio = x.confidence / (static_cast<double>(d - md) / (n - m));
        }
        x.matched = m;
        x.matched_drifted = md;
        out[s] = x;
      }
    }
    if (current.size() == static_cast<std::size_t>(t.max_itemset_size)) return;
    for (std::size_t a = start; a < attrs.size(); ++a) {
      for (const auto& v : values[attrs[a]]) {
        current.push_back({attrs[a], v});
        rec(a + 1);
        current.pop_back();
      }
    }
  };
  rec(0);
  return out;
}

LogWindow random_window(std::mt19937_64& rng, std::size_t n) {
  const std::vector<std::string> weathers{"clear-day", "rain", "snow", "fog"};
  std::uniform_int_distribution<int> pick(0, 999);
  LogWindow w{0, static_cast<std::int64_t>(n), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto weather = weathers[pick(rng) % 4];
    const auto loc = "L" + std::to_string(pick(rng) % 3);
    const auto dev = "d" + std::to_string(pick(rng) % 6);
    const double p = weather == "snow" ? 0.8 : (loc == "L1" ? 0.3 : 0.1);
    w.entries.push_back({static_cast<std::int64_t>(i), dev, "v",
                         {{"weather", weather}, {"location", loc}, {"device_id", dev}},
                         pick(rng) < p * 1000});
  }
  return w;
}

}  // namespace

TEST_CASE("compute_metrics reproduces the example table") {
  const auto w = fixtures::example_window();
  check_metrics(*compute_metrics(w, Itemset{kSnow}), 0.4, 0.67, 1.0, 3.0);
  check_metrics(*compute_metrics(w, Itemset{kSnow, kNewYork}), 0.2, 0.33, 1.0, 2.0);
  check_metrics(*compute_metrics(w, Itemset{kNewYork}), 0.4, 0.67, 0.67, 1.33);
  check_metrics(*compute_metrics(w, Itemset{kClear}), 0.2, 0.33, 0.33, 0.33);
  // Worked example: P(drift | {snow, Helsinki}) = 1, P(drift | not) = 1/2.
  CHECK(compute_metrics(w, Itemset{kSnow, kHelsinki})->risk_ratio == doctest::Approx(2.0));

  CHECK_FALSE(compute_metrics(w, Itemset{{"weather", "rain"}}).has_value());
  WorkingCopy copy(w);
  const auto via_copy = compute_metrics(copy, Itemset{kNewYork});
  CHECK(via_copy->confidence == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("risk ratio edge cases") {
  // Matches every entry: undefined, fails the threshold.
  auto all = metrics_from_counts(10, 4, 10, 4);
  CHECK_FALSE(all->risk_ratio_defined);
  CHECK_FALSE(passes(*all, Thresholds{}));
  // Nothing outside the match drifted: +inf.
  auto inf = metrics_from_counts(10, 4, 6, 4);
  CHECK(std::isinf(inf->risk_ratio));
  CHECK(passes(*inf, Thresholds{}));
  CHECK_FALSE(metrics_from_counts(10, 0, 3, 0).has_value());
  CHECK_FALSE(metrics_from_counts(10, 3, 0, 0).has_value());

  RootCause a{Itemset{kSnow}, *inf, 0, true};
  RootCause b{Itemset{kClear}, *metrics_from_counts(10, 4, 2, 2), 0, true};
  RootCause c{Itemset{kNewYork}, *all, 0, false};
  CHECK(rank_before(a, b));
  CHECK(rank_before(b, c));
  CHECK_FALSE(rank_before(c, a));
}

TEST_CASE("fim on the example log") {
  const auto w = fixtures::example_window();
  const auto table = mine(w, Thresholds{});
  REQUIRE_FALSE(table.empty());
  CHECK(table[0].itemset == Itemset{kSnow});
  CHECK(table[0].rank == 0);
  CHECK(table[0].metrics.risk_ratio == doctest::Approx(3.0));
  CHECK(table.back().itemset == Itemset{kClear});

  const auto passing = fim(w, Thresholds{});
  CHECK(passing[0].itemset == Itemset{kSnow});
  CHECK(find(passing, Itemset{kClear}) == nullptr);
  CHECK(find(passing, Itemset{kNewYork}) != nullptr);
  CHECK(find(passing, Itemset{kSnow, kNewYork}) != nullptr);
  for (const auto& c : passing) CHECK(passes(c.metrics, Thresholds{}));
  for (std::size_t i = 1; i < passing.size(); ++i) {
    CHECK_FALSE(rank_before(passing[i], passing[i - 1]));
  }

  auto quiet = w;
  for (auto& e : quiet.entries) e.drift = false;
  CHECK(fim(quiet, Thresholds{}).empty());
  CHECK(mine(quiet, Thresholds{}).empty());
}

TEST_CASE("mine matches brute-force enumeration") {
  std::mt19937_64 rng(8);
  Thresholds t;
  t.min_occurrence = 0.02;
  for (int trial = 0; trial < 15; ++trial) {
    const auto w = random_window(rng, 300);
    const auto oracle = brute_force_table(w, t);
    const auto table = mine(w, t);
    REQUIRE(table.size() == oracle.size());
    for (const auto& c : table) {
      auto it = oracle.find(c.itemset);
      REQUIRE(it != oracle.end());
      CHECK(c.metrics.matched == it->second.matched);
      CHECK(c.metrics.matched_drifted == it->second.matched_drifted);
      CHECK(c.passes_thresholds == passes(it->second, t));
    }
  }
}

TEST_CASE("anti-monotonicity of occurrence and support") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_window(rng, 400);
    const auto table = mine(w, Thresholds{});
    for (const auto& small : table) {
      for (const auto& big : table) {
        if (!small.itemset.strict_subset_of(big.itemset)) continue;
        CHECK(big.metrics.occurrence <= small.metrics.occurrence);
        CHECK(big.metrics.support <= small.metrics.support);
      }
    }
  }
}

TEST_CASE("set reduction merges finer causes under the best coarser cause") {
  const auto passing = fim(fixtures::example_window(), Thresholds{});
  const auto groups = set_reduction(passing);
  REQUIRE_FALSE(groups.empty());
  CHECK(groups[0].cause.itemset == Itemset{kSnow});
  bool snow_ny_under_snow = false;
  for (const auto& m : groups[0].merged) {
    if (m.itemset == Itemset{kSnow, kNewYork}) snow_ny_under_snow = true;
  }
  CHECK(snow_ny_under_snow);
  for (const auto& g : groups) {
    CHECK(g.cause.itemset.size() == 1);
    if (g.cause.itemset == Itemset{kNewYork}) {
      CHECK(find(g.merged, Itemset{kSnow, kNewYork}) == nullptr);
    }
  }

  const Metrics m = *metrics_from_counts(10, 5, 4, 3);
  const std::vector<RootCause> singles{{Itemset{{"a", "1"}}, m, 0, true},
                                       {Itemset{{"b", "1"}}, m, 1, true},
                                       {Itemset{{"c", "1"}}, m, 2, true}};
  const auto identity = set_reduction(singles);
  REQUIRE(identity.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(identity[i].cause.itemset == singles[i].itemset);
    CHECK(identity[i].merged.empty());
  }

  const std::vector<RootCause> chain{{Itemset{{"a", "1"}}, m, 0, true},
                                     {Itemset{{"a", "1"}, {"b", "1"}}, m, 1, true},
                                     {Itemset{{"a", "1"}, {"b", "1"}, {"c", "1"}}, m, 2, true}};
  const auto chained = set_reduction(chain);
  REQUIRE(chained.size() == 1);
  CHECK(chained[0].merged.size() == 2);

  // A coarser cause ranked below its finer one still absorbs it.
  const std::vector<RootCause> inverted{{Itemset{{"a", "1"}, {"b", "1"}}, m, 0, true},
                                        {Itemset{{"a", "1"}}, m, 1, true}};
  const auto inv = set_reduction(inverted);
  REQUIRE(inv.size() == 1);
  CHECK(inv[0].cause.itemset == Itemset{{"a", "1"}});
}

TEST_CASE("counterfactual filter reproduces the hand trace") {
  const auto w = fixtures::example_window();
  const auto groups = set_reduction(fim(w, Thresholds{}));
  WorkingCopy copy(w);
  const auto final_causes = counterfactual_filter(groups, copy, Thresholds{});
  REQUIRE(final_causes.size() == 1);
  CHECK(final_causes[0].itemset == Itemset{kSnow});

  // Hand-computed state after clearing the snow rows: only row 3 drifts.
  CHECK(copy.drifted_count() == 1);
  CHECK(compute_metrics(copy, Itemset{kAndroid21})->confidence == doctest::Approx(1.0 / 3.0));
  CHECK(compute_metrics(copy, Itemset{kNewYork})->confidence == doctest::Approx(1.0 / 3.0));
  CHECK(compute_metrics(copy, Itemset{kNewYork, kAndroid21})->confidence ==
        doctest::Approx(1.0 / 3.0));
}

TEST_CASE("counterfactual filter keeps independent causes") {
  LogWindow w{0, 100, {}};
  auto add = [&](const char* wx, const char* loc, bool d, int n) {
    for (int i = 0; i < n; ++i) {
      w.entries.push_back({static_cast<std::int64_t>(w.entries.size()), "dev", "v",
                           {{"weather", wx}, {"location", loc}}, d});
    }
  };
  add("fog", "A", true, 20);
  add("rain", "B", true, 20);
  add("clear-day", "A", false, 30);
  add("clear-day", "B", false, 30);
  const auto report = analyze(w, Thresholds{});
  REQUIRE(report.causes.size() == 2);
  std::set<Itemset> got{report.causes[0].itemset, report.causes[1].itemset};
  CHECK(got == std::set<Itemset>{Itemset{{"weather", "fog"}}, Itemset{{"weather", "rain"}}});

  // One cause covering all drift.
  LogWindow single{0, 100, {}};
  for (int i = 0; i < 50; ++i) {
    single.entries.push_back({i, "dev", "v", {{"weather", i < 10 ? "snow" : "clear-day"}}, i < 10});
  }
  const auto r1 = analyze(single, Thresholds{});
  REQUIRE(r1.causes.size() == 1);
  CHECK(r1.causes[0].itemset == Itemset{kSnow});
}

TEST_CASE("analyze composes the stages and reports the clean group") {
  const auto w = fixtures::example_window();
  const auto report = analyze(w, Thresholds{}, {}, "toy");
  REQUIRE(report.causes.size() == 1);
  CHECK(report.causes[0].itemset == Itemset{kSnow});
  CHECK(report.matched_entries == std::vector<std::size_t>{2});
  CHECK(report.clean_group == std::vector<std::size_t>{0, 1, 2});
  CHECK(report.entry_count == 5);
  CHECK(report.drifted_count == 3);
  CHECK(report.window_id == "toy");

  auto quiet = w;
  for (auto& e : quiet.entries) e.drift = false;
  const auto none = analyze(quiet, Thresholds{});
  CHECK(none.causes.empty());
  CHECK(none.clean_group.size() == 5);

  // Ablations.
  const auto fim_only = analyze(w, Thresholds{}, {false, false});
  CHECK(fim_only.causes.size() == fim(w, Thresholds{}).size());
  const auto reduced_only = analyze(w, Thresholds{}, {true, false});
  CHECK(reduced_only.causes.size() == set_reduction(fim(w, Thresholds{})).size());
}

TEST_CASE("planted disjoint causes are recovered exactly") {
  LogWindow w{0, 14 * 86400, {}};
  const std::vector<std::string> locs{"A", "B", "C", "D"};
  for (int day = 0; day < 14; ++day) {
    const std::string wx = day == 2 || day == 3 ? "fog" : (day == 9 || day == 10 ? "rain" : "clear-day");
    for (const auto& loc : locs) {
      for (int dev = 0; dev < 4; ++dev) {
        const auto id = loc + std::to_string(dev);
        w.entries.push_back({day * 86400 + dev, id, "v",
                             {{"weather", wx}, {"location", loc}, {"device_id", id}}, wx != "clear-day"});
      }
    }
  }
  const auto report = analyze(w, Thresholds{});
  std::set<Itemset> got;
  for (const auto& c : report.causes) got.insert(c.itemset);
  CHECK(got == std::set<Itemset>{Itemset{{"weather", "fog"}}, Itemset{{"weather", "rain"}}});
}

TEST_CASE("accepted causes pass at acceptance time and are coverage-irredundant") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_window(rng, 500);
    const Thresholds t;
    const auto groups = set_reduction(fim(w, t));
    WorkingCopy copy(w);
    const auto accepted = counterfactual_filter(groups, copy, t);

    // Replay: recompute each accepted cause's metrics at its acceptance point.
    WorkingCopy replay(w);
    std::vector<std::set<std::size_t>> covered;
    std::size_t next = 0;
    for (const auto& g : groups) {
      const auto m = compute_metrics(replay, g.cause.itemset);
      if (m && passes(*m, t)) {
        REQUIRE(next < accepted.size());
        CHECK(accepted[next].itemset == g.cause.itemset);
        CHECK(accepted[next].metrics.confidence == doctest::Approx(m->confidence));
        std::set<std::size_t> mine_set;
        for (std::size_t i = 0; i < replay.size(); ++i) {
          if (replay.drift(i) && g.cause.itemset.matches(replay.entry(i).attributes)) {
            mine_set.insert(i);
          }
        }
        for (const auto& prev : covered) {
          CHECK_FALSE(std::includes(prev.begin(), prev.end(), mine_set.begin(), mine_set.end()));
        }
        covered.push_back(mine_set);
        replay.mark_no_drift(g.cause.itemset);
        ++next;
        continue;
      }
      for (const auto& sub : g.merged) {
        const auto ms = compute_metrics(replay, sub.itemset);
        if (ms && passes(*ms, t)) {
          REQUIRE(next < accepted.size());
          CHECK(accepted[next].itemset == sub.itemset);
          ++next;
        }
      }
    }
    CHECK(next == accepted.size());
  }
}

TEST_CASE("analyze is deterministic") {
  std::mt19937_64 rng(4);
  const auto w = random_window(rng, 800);
  const auto a = analyze(w, Thresholds{});
  const auto b = analyze(w, Thresholds{});
  auto ja = to_json(a);
  auto jb = to_json(b);
  ja.erase("wall_time_ms");
  jb.erase("wall_time_ms");
  CHECK(ja == jb);
}

TEST_CASE("report JSON round trip keeps causes and metrics") {
  const auto report = analyze(fixtures::example_window(), Thresholds{}, {}, "w0");
  const auto back = report_from_json(to_json(report));
  REQUIRE(back.causes.size() == 1);
  CHECK(back.causes[0].itemset == report.causes[0].itemset);
  CHECK(back.causes[0].metrics.risk_ratio == doctest::Approx(3.0));
  CHECK(back.table.size() == report.table.size());
}

TEST_CASE("fms examples") {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  CHECK(fms(a, a) == 1.0);
  const std::vector<int> all_clean(50, -1);
  CHECK(fms(all_clean, all_clean) == 1.0);
  CHECK_THROWS_AS(fms(a, std::vector<int>{0, 1}), InvalidInput);

  const Partition pa{{0, 1}, {2, 3, 4}, {5}};
  const Partition pb{{5, 4}, {3, 2, 1, 0}};
  const Partition bad{{0, 1}, {2}};
  CHECK_THROWS_AS(fms(pa, bad), InvalidInput);
  CHECK(fms(pa, pa) == 1.0);
}

TEST_CASE("fms equals exhaustive pair enumeration") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> label(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 6 + trial % 10;
    std::vector<int> a(n);
    std::vector<int> b(n);
    for (auto& v : a) v = label(rng);
    for (auto& v : b) v = label(rng);
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool in_a = a[i] == a[j];
        const bool in_b = b[i] == b[j];
        tp += in_a && in_b;
        fp += !in_a && in_b;
        fn += in_a && !in_b;
      }
    }
    double expected;
    if (tp + fp == 0 && tp + fn == 0) {
      expected = 1.0;
    } else if (tp + fp == 0 || tp + fn == 0) {
      expected = 0.0;
    } else {
      expected = std::sqrt(tp / (tp + fp) * tp / (tp + fn));
    }
    const double got = fms(a, b);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got == doctest::Approx(fms(b, a)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}
