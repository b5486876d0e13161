#include "driftwatch/config.hpp"

#include <algorithm>

#include "driftwatch/errors.hpp"

namespace driftwatch::config {

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void require_object(const nlohmann::json& j, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
}

}  // namespace

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

rca::Thresholds thresholds_from_json(const nlohmann::json& j) {
  check_keys(j, {"min_occurrence", "min_support", "min_confidence", "min_risk_ratio", "max_itemset_size"},
             "thresholds");
  rca::Thresholds t;
  read(j, "min_occurrence", t.min_occurrence);
  read(j, "min_support", t.min_support);
  read(j, "min_confidence", t.min_confidence);
  read(j, "min_risk_ratio", t.min_risk_ratio);
  read(j, "max_itemset_size", t.max_itemset_size);
  if (t.max_itemset_size < 1) throw ConfigError("max_itemset_size must be >= 1");
  return t;
}

nlohmann::json to_json(const rca::Thresholds& t) {
  return {{"min_occurrence", t.min_occurrence},
          {"min_support", t.min_support},
          {"min_confidence", t.min_confidence},
          {"min_risk_ratio", t.min_risk_ratio},
          {"max_itemset_size", t.max_itemset_size}};
}

rca::AnalysisOptions analysis_options_from_json(const nlohmann::json& j) {
  check_keys(j, {"set_reduction", "counterfactual"}, "analysis");
  rca::AnalysisOptions o;
  read(j, "set_reduction", o.set_reduction);
  read(j, "counterfactual", o.counterfactual);
  return o;
}

nlohmann::json to_json(const rca::AnalysisOptions& o) {
  return {{"set_reduction", o.set_reduction}, {"counterfactual", o.counterfactual}};
}

adapt::AdaptConfig adapt_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"steps", "learning_rate", "batch_size", "augmentations", "augmentation_std", "seed", "renormalize"},
             "adaptation");
  adapt::AdaptConfig c;
  read(j, "steps", c.steps);
  read(j, "learning_rate", c.learning_rate);
  read(j, "batch_size", c.batch_size);
  read(j, "augmentations", c.augmentations);
  read(j, "augmentation_std", c.augmentation_std);
  read(j, "seed", c.seed);
  read(j, "renormalize", c.renormalize);
  c.validate();
  return c;
}

nlohmann::json to_json(const adapt::AdaptConfig& c) {
  return {{"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"augmentations", c.augmentations},
          {"augmentation_std", c.augmentation_std},
          {"seed", c.seed},
          {"renormalize", c.renormalize}};
}

pool::PoolConfig pool_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"capacity", "bounded", "subsumption"}, "pool");
  pool::PoolConfig c;
  read(j, "capacity", c.capacity);
  read(j, "bounded", c.bounded);
  if (j.contains("subsumption")) c.subsumption = pool::subsumption_from_string(j.at("subsumption").get<std::string>());
  c.validate();
  return c;
}

nlohmann::json to_json(const pool::PoolConfig& c) {
  return {{"capacity", c.capacity}, {"bounded", c.bounded}, {"subsumption", pool::to_string(c.subsumption)}};
}

toy::TaskConfig task_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"classes", "dim", "train_per_class", "validation_per_class", "noise_scale", "min_separation",
                 "max_separation", "offset_scale", "l2"},
             "task");
  toy::TaskConfig c;
  read(j, "classes", c.classes);
  read(j, "dim", c.dim);
  read(j, "train_per_class", c.train_per_class);
  read(j, "validation_per_class", c.validation_per_class);
  read(j, "noise_scale", c.noise_scale);
  read(j, "min_separation", c.min_separation);
  read(j, "max_separation", c.max_separation);
  read(j, "offset_scale", c.offset_scale);
  read(j, "l2", c.l2);
  return c;
}

nlohmann::json to_json(const toy::TaskConfig& c) {
  return {{"classes", c.classes},
          {"dim", c.dim},
          {"train_per_class", c.train_per_class},
          {"validation_per_class", c.validation_per_class},
          {"noise_scale", c.noise_scale},
          {"min_separation", c.min_separation},
          {"max_separation", c.max_separation},
          {"offset_scale", c.offset_scale},
          {"l2", c.l2}};
}

}  // namespace driftwatch::config
