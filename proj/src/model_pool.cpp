#include "driftwatch/model_pool.hpp"

#include <algorithm>
#include <cmath>

#include "driftwatch/errors.hpp"
#include "driftwatch/serialization.hpp"

namespace driftwatch::pool {

namespace {

bool dominates(const Itemset& a, const Itemset& b, Subsumption mode) {
  switch (mode) {
    case Subsumption::coverage:
      return a.strict_subset_of(b);
    case Subsumption::attribute_wise:
      return b.strict_subset_of(a);
    case Subsumption::none:
      return false;
  }
  return false;
}

nlohmann::json rr_json(double rr) {
  if (std::isinf(rr)) return "inf";
  if (std::isnan(rr)) return nullptr;
  return rr;
}

}  // namespace

void PoolConfig::validate() const {
  if (capacity < 1) throw ConfigError("pool capacity must be >= 1");
}

const char* to_string(Subsumption mode) {
  switch (mode) {
    case Subsumption::coverage:
      return "coverage";
    case Subsumption::attribute_wise:
      return "attribute-wise";
    case Subsumption::none:
      return "none";
  }
  return "?";
}

Subsumption subsumption_from_string(const std::string& name) {
  if (name == "coverage") return Subsumption::coverage;
  if (name == "attribute-wise") return Subsumption::attribute_wise;
  if (name == "none") return Subsumption::none;
  throw ConfigError("unknown subsumption mode '" + name + "'");
}

ModelPool::ModelPool(PoolConfig config, ModelVersion clean) : config_(config) {
  config_.validate();
  if (!clean.is_clean()) throw InvalidInput("the pinned model must have an empty cause");
  versions_.push_back(std::move(clean));
  sequence_.push_back(next_sequence_++);
}

std::vector<ModelVersion> ModelPool::insert(ModelVersion version) {
  std::vector<ModelVersion> evicted;
  if (version.is_clean()) {
    evicted.push_back(std::exchange(versions_.front(), std::move(version)));
    sequence_.front() = next_sequence_++;
    return evicted;
  }

  for (std::size_t i = 1; i < versions_.size(); ++i) {
    if (versions_[i].cause == version.cause) {
      evicted.push_back(std::exchange(versions_[i], std::move(version)));
      sequence_[i] = next_sequence_++;
      return evicted;
    }
  }

  for (std::size_t i = 1; i < versions_.size(); ++i) {
    if (dominates(versions_[i].cause, version.cause, config_.subsumption)) {
      evicted.push_back(std::move(version));
      return evicted;
    }
  }
  for (std::size_t i = versions_.size(); i-- > 1;) {
    if (dominates(version.cause, versions_[i].cause, config_.subsumption)) {
      evicted.push_back(std::move(versions_[i]));
      versions_.erase(versions_.begin() + static_cast<std::ptrdiff_t>(i));
      sequence_.erase(sequence_.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  versions_.push_back(std::move(version));
  sequence_.push_back(next_sequence_++);

  while (config_.bounded && adapted_count() > static_cast<std::size_t>(config_.capacity)) {
    std::size_t oldest = 1;
    for (std::size_t i = 2; i < versions_.size(); ++i) {
      const auto& a = versions_[i];
      const auto& b = versions_[oldest];
      if (a.last_updated < b.last_updated ||
          (a.last_updated == b.last_updated && sequence_[i] < sequence_[oldest])) {
        oldest = i;
      }
    }
    evicted.push_back(std::move(versions_[oldest]));
    versions_.erase(versions_.begin() + static_cast<std::ptrdiff_t>(oldest));
    sequence_.erase(sequence_.begin() + static_cast<std::ptrdiff_t>(oldest));
  }
  return evicted;
}

const ModelVersion& ModelPool::select(const AttributeMap& attrs) const {
  const ModelVersion* best = nullptr;
  for (std::size_t i = 1; i < versions_.size(); ++i) {
    const auto& v = versions_[i];
    if (!v.cause.matches(attrs)) continue;
    if (!best) {
      best = &v;
      continue;
    }
    if (v.cause.size() != best->cause.size()) {
      if (v.cause.size() > best->cause.size()) best = &v;
      continue;
    }
    if (v.risk_ratio_at_creation != best->risk_ratio_at_creation) {
      if (v.risk_ratio_at_creation > best->risk_ratio_at_creation) best = &v;
      continue;
    }
    if (v.last_updated != best->last_updated) {
      if (v.last_updated > best->last_updated) best = &v;
      continue;
    }
    if (v.version_id < best->version_id) best = &v;
  }
  return best ? *best : versions_.front();
}

std::vector<ModelVersion> ModelPool::versions() const {
  std::vector<std::size_t> order;
  for (std::size_t i = 1; i < versions_.size(); ++i) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (versions_[a].last_updated != versions_[b].last_updated) {
      return versions_[a].last_updated > versions_[b].last_updated;
    }
    return sequence_[a] > sequence_[b];
  });
  std::vector<ModelVersion> out{versions_.front()};
  for (auto i : order) out.push_back(versions_[i]);
  return out;
}

const ModelVersion* ModelPool::find(const Itemset& cause) const {
  for (const auto& v : versions_) {
    if (v.cause == cause) return &v;
  }
  return nullptr;
}

nlohmann::json version_to_json(const ModelVersion& v) {
  return {{"version_id", v.version_id},
          {"cause", v.cause.to_string()},
          {"itemset", v.cause},
          {"created_at", v.created_at},
          {"last_updated", v.last_updated},
          {"risk_ratio", rr_json(v.risk_ratio_at_creation)}};
}

nlohmann::json to_json(const ModelPool& pool) {
  nlohmann::json versions = nlohmann::json::array();
  for (const auto& v : pool.versions()) versions.push_back(version_to_json(v));
  return {{"capacity", pool.config().capacity},
          {"bounded", pool.config().bounded},
          {"subsumption", to_string(pool.config().subsumption)},
          {"versions", versions}};
}

}  // namespace driftwatch::pool
