// One line per acceptance criterion: "criterion N: PASS|FAIL ...". Exit
// status is the number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "driftwatch/adapter.hpp"
#include "driftwatch/detect.hpp"
#include "driftwatch/fleet_sim.hpp"
#include "driftwatch/model_pool.hpp"
#include "driftwatch/rca.hpp"
#include "example_log.hpp"

using namespace driftwatch;
using namespace driftwatch::detect;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Metrics of the example log.
Outcome table_metrics() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto table = rca::mine(fixtures::example_window(), rca::Thresholds{});
  const double elapsed = seconds_since(t0);
  struct Row {
    Itemset s;
    double occ, sup, conf, rr;
  };
  const std::vector<Row> want{
      {Itemset{{"weather", "snow"}}, 0.4, 0.67, 1.0, 3.0},
      {Itemset{{"weather", "snow"}, {"location", "New York"}}, 0.2, 0.33, 1.0, 2.0},
      {Itemset{{"location", "New York"}}, 0.4, 0.67, 0.67, 1.33},
      {Itemset{{"weather", "clear-day"}}, 0.2, 0.33, 0.33, 0.33},
  };
  double worst = 0.0;
  for (const auto& r : want) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const rca::RootCause& c) { return c.itemset == r.s; });
    if (it == table.end()) return {false, "missing " + r.s.to_string()};
    const auto& m = it->metrics;
    for (auto [got, exp] : {std::pair{m.occurrence, r.occ}, {m.support, r.sup}, {m.confidence, r.conf},
                            {m.risk_ratio, r.rr}}) {
      worst = std::max(worst, std::abs(got - exp));
    }
  }
  return {worst <= 0.005 && elapsed < 1.0, fmt("max abs error %.4f (tol 0.005), %.3f s (< 1 s)", worst, elapsed)};
}

// 2. Toy trace: only {snow} survives; the counterfactual pass drops the rest.
Outcome toy_trace() {
  const auto w = fixtures::example_window();
  const rca::Thresholds t;
  const auto report = rca::analyze(w, t);
  if (report.causes.size() != 1 || !(report.causes[0].itemset == Itemset{{"weather", "snow"}})) {
    return {false, "causes != [weather=snow]"};
  }
  WorkingCopy copy(w);
  copy.mark_no_drift(Itemset{{"weather", "snow"}});
  bool ok = true;
  std::string detail = "[weather=snow];";
  for (const auto& s : {Itemset{{"location", "New York"}}, Itemset{{"device_id", "android_21"}}}) {
    const auto before = rca::compute_metrics(w, s);
    const auto after = rca::compute_metrics(copy, s);
    const bool eliminated = before && rca::passes(*before, t) && after && std::abs(after->confidence - 1.0 / 3) < 1e-9 &&
                            !rca::passes(*after, t);
    ok = ok && eliminated;
    detail += fmt(" %s conf %.3f -> %.3f", s.to_string().c_str(), before ? before->confidence : -1.0,
                  after ? after->confidence : -1.0);
  }
  return {ok, detail};
}

// 3. Planted weather causes, imperfect detector.
LogWindow planted_window(const std::set<std::string>& planted, std::uint64_t seed, double tpr, double fpr) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> weathers{"clear-day", "rain", "snow", "fog"};
  std::uniform_int_distribution<int> wx(0, 3), dev(0, 27);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LogWindow w{0, 3000, {}};
  for (int i = 0; i < 3000; ++i) {
    const int d = dev(rng);
    const auto weather = weathers[wx(rng)];
    const auto id = "dev" + std::to_string(d);
    const bool drift = u(rng) < (planted.count(weather) ? tpr : fpr);
    w.entries.push_back({i, id, "clean", {{"weather", weather}, {"location", "L" + std::to_string(d % 7)}, {"device_id", id}}, drift});
  }
  return w;
}

Outcome fms_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::set<std::string>> scenarios{
      {}, {"rain"}, {"snow"}, {"fog"}, {"rain", "snow"}, {"rain", "fog"}, {"snow", "fog"}, {"rain", "snow", "fog"}};
  std::string detail;
  bool ok = true;
  for (const auto& planted : scenarios) {
    int perfect = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto w = planted_window(planted, seed * 7919 + planted.size(), 0.7, 0.05);
      const auto report = rca::analyze(w, rca::Thresholds{});
      std::vector<rca::RootCause> truth;
      for (const auto& p : planted) truth.push_back({Itemset{{"weather", p}}, {}, 0, true});
      const auto a = rca::assign_causes(w.entries, report.causes);
      const auto b = rca::assign_causes(w.entries, truth);
      perfect += rca::fms(a, b) == 1.0;
    }
    ok = ok && perfect >= 9;
    detail += fmt("%d ", perfect);
  }
  const double elapsed = seconds_since(t0);
  return {ok && elapsed < 30.0, "FMS=1 seeds per scenario (need >= 9/10): " + detail + fmt("; %.2f s", elapsed)};
}

// 4. Analytic TENT gradient against central differences.
Outcome gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const int d = 2 + draw % 15, k = 2 + draw % 7, b = 2 + draw % 11;
    auto head = std::make_shared<toy::LinearHead>();
    head->dim = d;
    head->classes = k;
    for (int i = 0; i < d * k; ++i) head->weights.push_back(0.7 * n(rng));
    for (int i = 0; i < k; ++i) head->bias.push_back(0.3 * n(rng));
    toy::ToyClassifier m;
    m.head = head;
    for (int j = 0; j < d; ++j) {
      m.gamma.push_back(1.0 + 0.3 * n(rng));
      m.beta.push_back(0.3 * n(rng));
    }
    std::vector<toy::Features> batch(b, toy::Features(d));
    for (auto& x : batch) {
      for (auto& v : x) v = n(rng);
    }
    const auto g = adapt::grad_tent(m, batch);
    for (int which = 0; which < 2; ++which) {
      for (int j = 0; j < d; ++j) {
        auto gp = m.gamma, gm = m.gamma, bp = m.beta, bm = m.beta;
        (which == 0 ? gp : bp)[j] += h;
        (which == 0 ? gm : bm)[j] -= h;
        const double numeric =
            (adapt::tent_loss(m.with_norm(gp, bp), batch) - adapt::tent_loss(m.with_norm(gm, bm), batch)) / (2 * h);
        const double analytic = which == 0 ? g.gamma[j] : g.beta[j];
        worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3}));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-5 && elapsed < 5.0, fmt("max relative error %.2e (tol 1e-5), %.2f s", worst, elapsed)};
}

// 5. Strategy ordering over three seeds.
Outcome strategy_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  double none = 0.0, all = 0.0, by = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto c = sim::SimConfig::defaults();
    c.seed = seed;
    const auto p = sim::prepare(c);
    none += sim::run(p, sim::Strategy::no_adapt).drifted_accuracy / 3;
    all += sim::run(p, sim::Strategy::adapt_all).drifted_accuracy / 3;
    by += sim::run(p, sim::Strategy::by_cause).drifted_accuracy / 3;
  }
  const double elapsed = seconds_since(t0);
  return {by >= all + 0.05 && by >= none + 0.05 && elapsed < 300.0,
          fmt("drifted accuracy by-cause %.3f, adapt-all %.3f, no-adapt %.3f (margin 0.05), %.1f s", by, all, none,
              elapsed)};
}

// 6. Detection rates before and after adaptation, seed 1.
Outcome detection() {
  const auto rows = sim::detection_evolution(sim::SimConfig::defaults());
  bool ok = !rows.empty();
  std::string detail;
  for (const auto& r : rows) {
    ok = ok && r.adapted && r.post < r.pre && std::abs(r.post - r.clean) <= 0.10;
    detail += fmt("%s %.3f->%.3f (clean %.3f); ", r.cause.c_str(), r.pre, r.post, r.clean);
  }
  return {ok, detail + "need post < pre and |post - clean| <= 0.10"};
}

// 7. Version counts with and without set reduction + counterfactual.
Outcome version_counts() {
  auto c = sim::SimConfig::defaults();
  c.uplink_fraction = 0.5;
  const auto full = sim::run(c, sim::Strategy::by_cause);
  auto f = c;
  f.analysis = {false, false};
  f.pool.bounded = false;
  f.pool.subsumption = pool::Subsumption::none;
  const auto fim_only = sim::run(f, sim::Strategy::by_cause);
  bool ok = full.windows.size() >= 3;
  std::string a, b;
  for (std::size_t w = 0; w < full.windows.size(); ++w) {
    const auto n = full.windows[w].versions_deployed;
    const auto m = fim_only.windows[w].versions_deployed;
    a += std::to_string(n) + " ";
    b += std::to_string(m) + " ";
    if (w >= 1) ok = ok && n <= 4 && n == full.windows[1].versions_deployed && m > n;
  }
  return {ok, "versions per window, reduced: " + a + "| FIM-only: " + b + "(uplink 0.5)"};
}

// 8. Analysis time on 50k vs 100k entries.
LogWindow big_window(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> weathers{"clear-day", "rain", "snow", "fog"};
  std::uniform_int_distribution<int> wx(0, 3), dev(0, 499);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LogWindow w{0, static_cast<std::int64_t>(n), {}};
  w.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int d = dev(rng);
    const auto weather = weathers[wx(rng)];
    const auto id = "dev" + std::to_string(d);
    const double p = weather == "snow" ? 0.8 : weather == "fog" ? 0.6 : 0.05;
    w.entries.push_back({static_cast<std::int64_t>(i), id, "clean",
                         {{"weather", weather}, {"location", "L" + std::to_string(d % 7)}, {"device_id", id}},
                         u(rng) < p});
  }
  return w;
}

double median_analyze_seconds(const LogWindow& w) {
  std::vector<double> t;
  for (int i = 0; i < 3; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    rca::analyze(w, rca::Thresholds{});
    t.push_back(seconds_since(t0));
  }
  std::sort(t.begin(), t.end());
  return t[1];
}

Outcome scalability() {
  const auto t0 = std::chrono::steady_clock::now();
  const double a = median_analyze_seconds(big_window(50000, 1));
  const double b = median_analyze_seconds(big_window(100000, 2));
  const double elapsed = seconds_since(t0);
  return {b / a <= 2.5 && elapsed < 120.0,
          fmt("t(50k) %.3f s, t(100k) %.3f s, ratio %.2f (<= 2.5), %.1f s", a, b, b / a, elapsed)};
}

// 9. Invariant suites.
Outcome invariants() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 3.0);
  int failures = 0;
  auto check = [&](bool c) { failures += !c; };

  // Drift-log counts and apriori anti-monotonicity.
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = big_window(400, 100 + trial);
    const auto table = rca::mine(w, rca::Thresholds{0.0, 0.0, 0.0, 0.0, 3});
    for (const auto& c : table) {
      const Itemset& s = c.itemset;
      check(count(w, s, DriftFilter::drifted) + count(w, s, DriftFilter::clean) == count(w, s));
      for (const auto& item : s.items()) {
        std::vector<Item> rest;
        for (const auto& other : s.items()) {
          if (!(other == item)) rest.push_back(other);
        }
        if (rest.empty()) continue;
        const auto parent = rca::compute_metrics(w, Itemset(rest));
        check(parent && parent->occurrence >= c.metrics.occurrence && parent->support >= c.metrics.support);
      }
    }
  }

  // Pool capacity and subsumption closure under random operations.
  const std::vector<Item> universe{{"weather", "rain"}, {"weather", "snow"}, {"location", "A"},
                                   {"location", "B"},   {"device_id", "d1"}, {"device_id", "d2"}};
  int ops = 0;
  for (auto mode : {pool::Subsumption::coverage, pool::Subsumption::attribute_wise, pool::Subsumption::none}) {
    for (int cap : {1, 2, 4}) {
      auto clean = std::make_shared<toy::ToyClassifier>();
      pool::ModelPool p({cap, true, mode}, {"clean", {}, clean, 0, 0, 0.0});
      for (int i = 0; i < 1112; ++i, ++ops) {
        std::vector<Item> items;
        const int k = 1 + static_cast<int>(u(rng) * 3);
        for (int j = 0; j < k; ++j) items.push_back(universe[static_cast<std::size_t>(u(rng) * universe.size())]);
        p.insert({"v" + std::to_string(i), Itemset(items), clean, i / 3, i / 3, 1.0 + u(rng)});
        check(p.adapted_count() <= static_cast<std::size_t>(cap));
        const auto vs = p.versions();
        check(vs.front().is_clean());
        for (std::size_t a = 1; a < vs.size(); ++a) {
          for (std::size_t b = 1; b < vs.size(); ++b) {
            if (a == b) continue;
            check(!(vs[a].cause == vs[b].cause));
            if (mode != pool::Subsumption::none) check(!vs[a].cause.strict_subset_of(vs[b].cause));
          }
        }
      }
    }
  }

  // Softmax, MSP, KS, F1, FMS.
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(2 + trial % 9);
    for (auto& v : z) v = n(rng);
    const auto p = softmax(z);
    double sum = 0.0;
    for (double v : p) sum += v;
    check(std::abs(sum - 1.0) < 1e-12);
    auto shifted = z;
    for (auto& v : shifted) v += 50.0;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) check(std::abs(p[i] - q[i]) < 1e-12);
    const double msp = msp_score(z);
    check(msp >= 1.0 / z.size() - 1e-12 && msp <= 1.0);

    std::vector<double> a(5 + trial % 20), b(3 + trial % 13);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng) + 1.0;
    const double ks = ks_statistic(a, b);
    check(ks >= 0.0 && ks <= 1.0 && std::abs(ks - ks_statistic(b, a)) < 1e-12 && ks_statistic(a, a) == 0.0);

    const ConfusionCounts cc{static_cast<std::uint64_t>(1 + trial % 7), static_cast<std::uint64_t>(trial % 5),
                             static_cast<std::uint64_t>(trial % 3), 4};
    const double prec = static_cast<double>(cc.tp) / (cc.tp + cc.fp), rec = static_cast<double>(cc.tp) / (cc.tp + cc.fn);
    check(std::abs(f1(cc) - 2 * prec * rec / (prec + rec)) < 1e-12);

    std::vector<int> la(30), lb(30);
    for (auto& v : la) v = static_cast<int>(u(rng) * 4) - 1;
    for (auto& v : lb) v = static_cast<int>(u(rng) * 3);
    const double s = rca::fms(la, lb);
    check(s >= 0.0 && s <= 1.0 && std::abs(s - rca::fms(lb, la)) < 1e-12 && rca::fms(la, la) == 1.0);
  }

  // Simulator determinism.
  const auto c = sim::SimConfig::defaults();
  const auto h1 = sim::report_hash(sim::run(c, sim::Strategy::by_cause));
  const auto h2 = sim::report_hash(sim::run(c, sim::Strategy::by_cause));
  check(h1 == h2);
  return {failures == 0, fmt("%d violations over count/apriori/pool (%d ops)/score properties; sim hash %s == %s",
                             failures, ops, h1.c_str(), h2.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"example-log metrics", table_metrics},
      {"toy trace", toy_trace},
      {"FMS pipeline fidelity", fms_fidelity},
      {"gradient correctness", gradient},
      {"strategy ordering", strategy_ordering},
      {"detection evolution", detection},
      {"version-count stability", version_counts},
      {"RCA scalability", scalability},
      {"invariant suites", invariants},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
