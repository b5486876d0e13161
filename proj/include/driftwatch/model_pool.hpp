#pragma once

// Capacity-bounded set of per-cause model versions plus a pinned clean model.
// Not internally synchronized: one writer mutates a pool, readers take copies
// (the pool is a cheap value type; models are shared immutable pointers).

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/itemset.hpp"
#include "driftwatch/toy_model.hpp"

namespace driftwatch::pool {

struct ModelVersion {
  std::string version_id;
  Itemset cause;  // empty = clean model
  std::shared_ptr<const toy::ToyClassifier> model;
  std::int64_t created_at = 0;
  std::int64_t last_updated = 0;
  double risk_ratio_at_creation = 0.0;

  bool is_clean() const noexcept { return cause.empty(); }
};

// How an incoming version consolidates against comparable older ones.
//  coverage:       a broader cause (fewer attributes) evicts narrower ones; an
//                  incoming cause narrower than a pooled one is not admitted.
//  attribute_wise: the mirror image; a cause with more attributes evicts
//                  the ones it contains.
//  none:           only exact matches replace.
enum class Subsumption { coverage, attribute_wise, none };

struct PoolConfig {
  int capacity = 4;      // excludes the clean model
  bool bounded = true;   // false disables LRU eviction entirely
  Subsumption subsumption = Subsumption::coverage;

  void validate() const;  // throws ConfigError
};

const char* to_string(Subsumption mode);
Subsumption subsumption_from_string(const std::string& name);

class ModelPool {
 public:
  // `clean` must have an empty cause (InvalidInput otherwise).
  ModelPool(PoolConfig config, ModelVersion clean);

  // Returns the versions that left the pool, including a rejected incoming
  // version. The clean model is replaced by a clean insert but never evicted.
  std::vector<ModelVersion> insert(ModelVersion version);

  // Most specific pooled cause contained in attrs; ties go to the higher
  // creation risk ratio, then the later update, then the smaller version id.
  // Falls back to the clean model.
  const ModelVersion& select(const AttributeMap& attrs) const;

  const ModelVersion& clean() const { return versions_.front(); }
  // Clean model first, then adapted versions from most to least recently updated.
  std::vector<ModelVersion> versions() const;
  std::size_t size() const noexcept { return versions_.size(); }
  std::size_t adapted_count() const noexcept { return versions_.size() - 1; }
  const ModelVersion* find(const Itemset& cause) const;
  const PoolConfig& config() const noexcept { return config_; }

 private:
  PoolConfig config_;
  std::vector<ModelVersion> versions_;  // [0] is the clean model
  std::vector<std::uint64_t> sequence_;  // insertion order, breaks last_updated ties
  std::uint64_t next_sequence_ = 0;
};

nlohmann::json to_json(const ModelPool& pool);
nlohmann::json version_to_json(const ModelVersion& v);

}  // namespace driftwatch::pool
