#include "driftwatch/rca.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "driftwatch/errors.hpp"
#include "driftwatch/serialization.hpp"

namespace driftwatch::rca {

namespace {

using ItemId = WorkingCopy::ItemId;
using Key = std::vector<ItemId>;

struct KeyHash {
  std::size_t operator()(const Key& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (ItemId id : k) {
      h ^= id;
      h *= 1099511628211ull;
    }
    return h;
  }
};

struct Counts {
  std::size_t matched = 0;
  std::size_t drifted = 0;
};

// Risk ratio as a sortable number: undefined sorts below everything.
double rank_value(const Metrics& m) {
  return m.risk_ratio_defined ? m.risk_ratio : -std::numeric_limits<double>::infinity();
}

// Calls fn(combo) for every k-combination of `items` (sorted input keeps the
// combinations sorted).
template <typename Fn>
void for_each_combination(std::span<const ItemId> items, std::size_t k, Key& scratch, Fn&& fn,
                          std::size_t start = 0) {
  if (scratch.size() == k) {
    fn(scratch);
    return;
  }
  const std::size_t need = k - scratch.size();
  for (std::size_t i = start; i + need <= items.size(); ++i) {
    scratch.push_back(items[i]);
    for_each_combination(items, k, scratch, fn, i + 1);
    scratch.pop_back();
  }
}

Itemset decode(const WorkingCopy& copy, const Key& key) {
  std::vector<Item> items;
  items.reserve(key.size());
  for (ItemId id : key) items.push_back(copy.item(id));
  return Itemset(std::move(items));
}

std::vector<RootCause> mine_copy(const WorkingCopy& copy, const Thresholds& t) {
  const std::size_t total = copy.size();
  const std::size_t drifted = copy.drifted_count();
  std::vector<RootCause> table;
  if (total == 0 || drifted == 0) return table;

  const auto frequent = [&](const Counts& c) {
    return static_cast<double>(c.drifted) / static_cast<double>(total) >= t.min_occurrence;
  };
  auto emit = [&](const Key& key, const Counts& c) {
    auto m = metrics_from_counts(total, drifted, c.matched, c.drifted);
    if (!m) return;
    RootCause rc{decode(copy, key), *m, 0, passes(*m, t)};
    table.push_back(std::move(rc));
  };

  // Level 1.
  std::vector<Counts> singles(copy.item_count());
  for (std::size_t i = 0; i < total; ++i) {
    for (ItemId id : copy.entry_items(i)) {
      ++singles[id].matched;
      if (copy.drift(i)) ++singles[id].drifted;
    }
  }
  std::vector<char> single_frequent(copy.item_count(), 0);
  std::set<Key> level;
  for (ItemId id = 0; id < singles.size(); ++id) {
    if (!frequent(singles[id])) continue;
    single_frequent[id] = 1;
    level.insert(Key{id});
    emit(Key{id}, singles[id]);
  }

  for (int k = 2; k <= t.max_itemset_size && !level.empty(); ++k) {
    // Join (k-1)-itemsets sharing a (k-2)-prefix, prune by the apriori
    // property, and skip pairs over the same attribute (never co-occur).
    std::unordered_map<Key, Counts, KeyHash> candidates;
    const std::vector<Key> prev(level.begin(), level.end());
    for (std::size_t a = 0; a < prev.size(); ++a) {
      for (std::size_t b = a + 1; b < prev.size(); ++b) {
        if (!std::equal(prev[a].begin(), prev[a].end() - 1, prev[b].begin())) break;
        const ItemId x = prev[a].back();
        const ItemId y = prev[b].back();
        bool clash = copy.item(x).attribute == copy.item(y).attribute;
        for (std::size_t p = 0; !clash && p + 1 < prev[a].size(); ++p) {
          clash = copy.item(prev[a][p]).attribute == copy.item(y).attribute;
        }
        if (clash) continue;
        Key cand = prev[a];
        cand.push_back(y);
        bool all_frequent = true;
        for (std::size_t drop = 0; drop + 2 < cand.size() && all_frequent; ++drop) {
          Key sub;
          sub.reserve(cand.size() - 1);
          for (std::size_t q = 0; q < cand.size(); ++q) {
            if (q != drop) sub.push_back(cand[q]);
          }
          all_frequent = level.count(sub) > 0;
        }
        if (all_frequent) candidates.emplace(std::move(cand), Counts{});
      }
    }
    if (candidates.empty()) break;

    Key row;
    Key scratch;
    for (std::size_t i = 0; i < total; ++i) {
      row.clear();
      for (ItemId id : copy.entry_items(i)) {
        if (single_frequent[id]) row.push_back(id);
      }
      if (row.size() < static_cast<std::size_t>(k)) continue;
      const bool d = copy.drift(i);
      for_each_combination(std::span<const ItemId>(row), static_cast<std::size_t>(k), scratch,
                           [&](const Key& combo) {
                             auto it = candidates.find(combo);
                             if (it == candidates.end()) return;
                             ++it->second.matched;
                             if (d) ++it->second.drifted;
                           });
    }

    std::set<Key> next;
    for (const auto& [key, c] : candidates) {
      if (!frequent(c)) continue;
      next.insert(key);
      emit(key, c);
    }
    level = std::move(next);
  }

  std::sort(table.begin(), table.end(), rank_before);
  for (std::size_t r = 0; r < table.size(); ++r) table[r].rank = static_cast<int>(r);
  return table;
}

}  // namespace

bool passes(const Metrics& m, const Thresholds& t) {
  return m.occurrence >= t.min_occurrence && m.support >= t.min_support &&
         m.confidence >= t.min_confidence && m.risk_ratio_defined &&
         m.risk_ratio >= t.min_risk_ratio;
}

bool rank_before(const RootCause& a, const RootCause& b) {
  const double ra = rank_value(a.metrics);
  const double rb = rank_value(b.metrics);
  if (ra != rb) return ra > rb;
  if (a.metrics.confidence != b.metrics.confidence) {
    return a.metrics.confidence > b.metrics.confidence;
  }
  if (a.metrics.support != b.metrics.support) return a.metrics.support > b.metrics.support;
  if (a.itemset.size() != b.itemset.size()) return a.itemset.size() < b.itemset.size();
  return a.itemset < b.itemset;
}

std::optional<Metrics> metrics_from_counts(std::size_t total, std::size_t drifted,
                                           std::size_t matched, std::size_t matched_drifted) {
  if (matched == 0 || drifted == 0 || total == 0) return std::nullopt;
  Metrics m;
  m.matched = matched;
  m.matched_drifted = matched_drifted;
  m.occurrence = static_cast<double>(matched_drifted) / static_cast<double>(total);
  m.support = static_cast<double>(matched_drifted) / static_cast<double>(drifted);
  m.confidence = static_cast<double>(matched_drifted) / static_cast<double>(matched);

  const std::size_t outside = total - matched;
  const std::size_t outside_drifted = drifted - matched_drifted;
  if (outside == 0) {
    m.risk_ratio_defined = false;
    m.risk_ratio = std::numeric_limits<double>::quiet_NaN();
  } else if (outside_drifted == 0) {
    m.risk_ratio = matched_drifted > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    const double p_out = static_cast<double>(outside_drifted) / static_cast<double>(outside);
    m.risk_ratio = m.confidence / p_out;
  }
  return m;
}

std::optional<Metrics> compute_metrics(const WorkingCopy& copy, const Itemset& itemset) {
  const auto [matched, drifted] = copy.match_counts(itemset);
  return metrics_from_counts(copy.size(), copy.drifted_count(), matched, drifted);
}

std::optional<Metrics> compute_metrics(const LogWindow& window, const Itemset& itemset) {
  std::size_t drifted = 0;
  std::size_t matched = 0;
  std::size_t matched_drifted = 0;
  for (const auto& e : window.entries) {
    if (e.drift) ++drifted;
    if (itemset.matches(e.attributes)) {
      ++matched;
      if (e.drift) ++matched_drifted;
    }
  }
  return metrics_from_counts(window.entries.size(), drifted, matched, matched_drifted);
}

std::vector<RootCause> mine(const LogWindow& window, const Thresholds& thresholds) {
  if (thresholds.max_itemset_size < 1) throw ConfigError("max_itemset_size must be >= 1");
  return mine_copy(WorkingCopy(window), thresholds);
}

std::vector<RootCause> fim(const LogWindow& window, const Thresholds& thresholds) {
  auto table = mine(window, thresholds);
  std::vector<RootCause> out;
  for (auto& rc : table) {
    if (rc.passes_thresholds) out.push_back(std::move(rc));
  }
  return out;
}

std::vector<CoarseGroup> set_reduction(std::span<const RootCause> ranked) {
  // Coarse causes have no strict subset among the ranked causes.
  std::vector<CoarseGroup> groups;
  std::vector<const RootCause*> finer;
  for (const auto& cause : ranked) {
    const bool has_coarser = std::any_of(ranked.begin(), ranked.end(), [&](const RootCause& o) {
      return o.itemset.strict_subset_of(cause.itemset);
    });
    if (has_coarser) {
      finer.push_back(&cause);
    } else {
      groups.push_back({cause, {}});
    }
  }
  // Groups are in rank order, so the first containing group ranks highest.
  // Containment is transitive, so some coarse cause always contains a finer one.
  for (const RootCause* cause : finer) {
    for (auto& g : groups) {
      if (g.cause.itemset.strict_subset_of(cause->itemset)) {
        g.merged.push_back(*cause);
        break;
      }
    }
  }
  return groups;
}

std::vector<CoarseGroup> singleton_groups(std::span<const RootCause> ranked) {
  std::vector<CoarseGroup> groups;
  groups.reserve(ranked.size());
  for (const auto& c : ranked) groups.push_back({c, {}});
  return groups;
}

std::vector<RootCause> counterfactual_filter(std::span<const CoarseGroup> groups,
                                             WorkingCopy& copy, const Thresholds& thresholds) {
  std::vector<RootCause> accepted;
  for (const auto& group : groups) {
    auto m = compute_metrics(copy, group.cause.itemset);
    if (m && passes(*m, thresholds)) {
      RootCause rc = group.cause;
      rc.metrics = *m;
      rc.passes_thresholds = true;
      accepted.push_back(std::move(rc));
      copy.mark_no_drift(group.cause.itemset);
      continue;
    }
    for (const auto& sub : group.merged) {
      auto ms = compute_metrics(copy, sub.itemset);
      if (ms && passes(*ms, thresholds)) {
        RootCause rc = sub;
        rc.metrics = *ms;
        rc.passes_thresholds = true;
        accepted.push_back(std::move(rc));
      }
    }
  }
  return accepted;
}

RootCauseReport analyze(const LogWindow& window, const Thresholds& thresholds,
                        const AnalysisOptions& options, std::string window_id) {
  const auto t0 = std::chrono::steady_clock::now();
  if (thresholds.max_itemset_size < 1) throw ConfigError("max_itemset_size must be >= 1");

  RootCauseReport report;
  report.window_id = std::move(window_id);
  report.window_start = window.start;
  report.window_end = window.end;
  report.entry_count = window.entries.size();

  WorkingCopy copy(window);
  report.drifted_count = copy.drifted_count();
  report.table = mine_copy(copy, thresholds);

  std::vector<RootCause> passing;
  for (const auto& rc : report.table) {
    if (rc.passes_thresholds) passing.push_back(rc);
  }
  const auto groups =
      options.set_reduction ? set_reduction(passing) : singleton_groups(passing);
  if (options.counterfactual) {
    report.causes = counterfactual_filter(groups, copy, thresholds);
  } else {
    for (const auto& g : groups) report.causes.push_back(g.cause);
  }

  const auto labels = assign_causes(window.entries, report.causes);
  report.matched_entries.assign(report.causes.size(), 0);
  for (std::size_t c = 0; c < report.causes.size(); ++c) {
    report.matched_entries[c] = count(window.entries, report.causes[c].itemset);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) report.clean_group.push_back(i);
  }
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<int> assign_causes(std::span<const DriftLogEntry> entries,
                               std::span<const RootCause> causes) {
  std::vector<int> labels(entries.size(), -1);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t c = 0; c < causes.size(); ++c) {
      if (causes[c].itemset.matches(entries[i].attributes)) {
        labels[i] = static_cast<int>(c);
        break;
      }
    }
  }
  return labels;
}

double fms(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw InvalidInput("FMS partitions cover different element counts");
  }
  std::map<int, std::size_t> size_a;
  std::map<int, std::size_t> size_b;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    ++size_a[labels_a[i]];
    ++size_b[labels_b[i]];
    ++joint[{labels_a[i], labels_b[i]}];
  }
  auto pairs = [](std::size_t n) { return static_cast<double>(n) * (n - 1.0) / 2.0; };
  double tp = 0.0;
  for (const auto& [k, n] : joint) tp += pairs(n);
  double together_a = 0.0;
  for (const auto& [k, n] : size_a) together_a += pairs(n);
  double together_b = 0.0;
  for (const auto& [k, n] : size_b) together_b += pairs(n);
  // All-singleton partitions on both sides agree on every pair.
  if (together_a == 0.0 && together_b == 0.0) return 1.0;
  if (together_a == 0.0 || together_b == 0.0) return 0.0;
  const double fp = together_b - tp;
  const double fn = together_a - tp;
  return std::sqrt(tp / (tp + fp) * (tp / (tp + fn)));
}

double fms(const Partition& a, const Partition& b) {
  auto to_labels = [](const Partition& p) {
    std::map<std::size_t, int> label;
    for (std::size_t c = 0; c < p.size(); ++c) {
      for (std::size_t id : p[c]) {
        if (!label.emplace(id, static_cast<int>(c)).second) {
          throw InvalidInput("element " + std::to_string(id) + " appears in two clusters");
        }
      }
    }
    return label;
  };
  const auto la = to_labels(a);
  const auto lb = to_labels(b);
  std::vector<int> va;
  std::vector<int> vb;
  va.reserve(la.size());
  vb.reserve(lb.size());
  auto ia = la.begin();
  auto ib = lb.begin();
  for (; ia != la.end() && ib != lb.end(); ++ia, ++ib) {
    if (ia->first != ib->first) break;
    va.push_back(ia->second);
    vb.push_back(ib->second);
  }
  if (ia != la.end() || ib != lb.end()) {
    throw InvalidInput("FMS partitions cover different element universes");
  }
  return fms(va, vb);
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json rr;
  if (!m.risk_ratio_defined) {
    rr = nullptr;
  } else if (std::isinf(m.risk_ratio)) {
    rr = "inf";
  } else {
    rr = m.risk_ratio;
  }
  return {{"occurrence", m.occurrence}, {"support", m.support},
          {"confidence", m.confidence}, {"risk_ratio", rr},
          {"matched", m.matched},       {"matched_drifted", m.matched_drifted}};
}

nlohmann::json to_json(const RootCause& c) {
  nlohmann::json j = to_json(c.metrics);
  j["itemset"] = c.itemset;
  j["label"] = c.itemset.to_string();
  j["rank"] = c.rank;
  j["passes"] = c.passes_thresholds;
  return j;
}

nlohmann::json to_json(const RootCauseReport& r, bool include_table) {
  nlohmann::json causes = nlohmann::json::array();
  for (std::size_t i = 0; i < r.causes.size(); ++i) {
    auto c = to_json(r.causes[i]);
    c["matched_entries"] = i < r.matched_entries.size() ? r.matched_entries[i] : 0;
    causes.push_back(std::move(c));
  }
  nlohmann::json j = {{"window_id", r.window_id},
                      {"window_start", r.window_start},
                      {"window_end", r.window_end},
                      {"entry_count", r.entry_count},
                      {"drifted_count", r.drifted_count},
                      {"causes", std::move(causes)},
                      {"clean_group_size", r.clean_group.size()},
                      {"wall_time_ms", r.wall_time_ms}};
  if (include_table) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& c : r.table) table.push_back(to_json(c));
    j["table"] = std::move(table);
  }
  return j;
}

RootCause root_cause_from_json(const nlohmann::json& j) {
  RootCause c;
  c.itemset = j.at("itemset").get<Itemset>();
  c.rank = j.value("rank", 0);
  c.passes_thresholds = j.value("passes", false);
  c.metrics.occurrence = j.at("occurrence").get<double>();
  c.metrics.support = j.at("support").get<double>();
  c.metrics.confidence = j.at("confidence").get<double>();
  c.metrics.matched = j.value("matched", std::size_t{0});
  c.metrics.matched_drifted = j.value("matched_drifted", std::size_t{0});
  const auto& rr = j.at("risk_ratio");
  if (rr.is_null()) {
    c.metrics.risk_ratio_defined = false;
    c.metrics.risk_ratio = std::numeric_limits<double>::quiet_NaN();
  } else if (rr.is_string()) {
    c.metrics.risk_ratio = std::numeric_limits<double>::infinity();
  } else {
    c.metrics.risk_ratio = rr.get<double>();
  }
  return c;
}

RootCauseReport report_from_json(const nlohmann::json& j) {
  RootCauseReport r;
  r.window_id = j.at("window_id").get<std::string>();
  r.window_start = j.at("window_start").get<std::int64_t>();
  r.window_end = j.at("window_end").get<std::int64_t>();
  r.entry_count = j.at("entry_count").get<std::size_t>();
  r.drifted_count = j.at("drifted_count").get<std::size_t>();
  r.wall_time_ms = j.value("wall_time_ms", 0.0);
  for (const auto& c : j.at("causes")) {
    r.causes.push_back(root_cause_from_json(c));
    r.matched_entries.push_back(c.value("matched_entries", std::size_t{0}));
  }
  if (j.contains("table")) {
    for (const auto& c : j.at("table")) r.table.push_back(root_cause_from_json(c));
  }
  return r;
}

}  // namespace driftwatch::rca
