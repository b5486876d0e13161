#pragma once

// Root cause analysis over a drift-log window.
//
// Pipeline: apriori frequent-itemset mining with four drift metrics, ranking
// by risk ratio, set reduction of finer causes into coarser ones, and a
// counterfactual pass that re-tests each candidate after the entries of
// already accepted causes are virtually un-flagged.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/drift_log.hpp"
#include "driftwatch/itemset.hpp"

namespace driftwatch::rca {

struct Thresholds {
  double min_occurrence = 0.01;
  double min_support = 0.01;
  double min_confidence = 0.51;
  double min_risk_ratio = 1.1;
  int max_itemset_size = 3;
};

struct Metrics {
  // drifted matches / all entries
  double occurrence = 0.0;
  // drifted matches / drifted entries
  double support = 0.0;
  // drifted matches / matches
  double confidence = 0.0;
  // P(drift | match) / P(drift | no match). +inf when nothing outside the
  // match drifted; undefined when the itemset matches every entry.
  double risk_ratio = 0.0;
  bool risk_ratio_defined = true;

  std::size_t matched = 0;
  std::size_t matched_drifted = 0;
};

bool passes(const Metrics& m, const Thresholds& t);

struct RootCause {
  Itemset itemset;
  Metrics metrics;
  int rank = 0;
  bool passes_thresholds = false;
};

// Strict weak order used for ranking: risk ratio desc (undefined last),
// confidence desc, support desc, fewer items first, then itemset order.
bool rank_before(const RootCause& a, const RootCause& b);

// Metrics of `itemset` over the given counts. std::nullopt when the itemset
// matches nothing or no entry is flagged (support undefined).
std::optional<Metrics> metrics_from_counts(std::size_t total, std::size_t drifted,
                                           std::size_t matched, std::size_t matched_drifted);
std::optional<Metrics> compute_metrics(const LogWindow& window, const Itemset& itemset);
std::optional<Metrics> compute_metrics(const WorkingCopy& copy, const Itemset& itemset);

// Every itemset (up to max_itemset_size) whose occurrence passes
// min_occurrence, with metrics, ranked. This is the full mining table.
std::vector<RootCause> mine(const LogWindow& window, const Thresholds& thresholds);

// Ranked itemsets passing all four thresholds. Empty when nothing drifted.
std::vector<RootCause> fim(const LogWindow& window, const Thresholds& thresholds);

struct CoarseGroup {
  RootCause cause;
  std::vector<RootCause> merged;  // finer causes, in rank order
};

// Groups each cause under the highest-ranked coarse cause whose itemset is a
// strict subset of its own. Input must be in rank order; output keeps it.
std::vector<CoarseGroup> set_reduction(std::span<const RootCause> ranked);

// Without set reduction every cause forms its own group.
std::vector<CoarseGroup> singleton_groups(std::span<const RootCause> ranked);

// Accepts coarse causes that still pass on the working copy (clearing their
// entries' drift flags), otherwise any merged finer cause that passes.
// Metrics on returned causes are those at acceptance time.
std::vector<RootCause> counterfactual_filter(std::span<const CoarseGroup> groups,
                                             WorkingCopy& copy, const Thresholds& thresholds);

struct AnalysisOptions {
  bool set_reduction = true;
  bool counterfactual = true;
};

struct RootCauseReport {
  std::string window_id;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  std::size_t entry_count = 0;
  std::size_t drifted_count = 0;
  std::vector<RootCause> causes;
  std::vector<RootCause> table;
  // Entries in the window matched by each final cause (parallel to causes).
  std::vector<std::size_t> matched_entries;
  // Indices (into the window) of entries no final cause matches.
  std::vector<std::size_t> clean_group;
  double wall_time_ms = 0.0;
};

RootCauseReport analyze(const LogWindow& window, const Thresholds& thresholds,
                        const AnalysisOptions& options = {}, std::string window_id = "");

// Per entry, the index of the first cause (in order) matching it, or -1.
std::vector<int> assign_causes(std::span<const DriftLogEntry> entries,
                               std::span<const RootCause> causes);

// Fowlkes-Mallows score between two labelings of the same elements, by pair
// counting. Throws InvalidInput when the labelings differ in length.
double fms(std::span<const int> labels_a, std::span<const int> labels_b);

// Partition form: each inner vector is one cluster of element ids. Throws
// InvalidInput unless both partitions cover the same ids exactly once.
using Partition = std::vector<std::vector<std::size_t>>;
double fms(const Partition& a, const Partition& b);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const RootCause& c);
nlohmann::json to_json(const RootCauseReport& r, bool include_table = true);
RootCause root_cause_from_json(const nlohmann::json& j);
RootCauseReport report_from_json(const nlohmann::json& j);

}  // namespace driftwatch::rca
