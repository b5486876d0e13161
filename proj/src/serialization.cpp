#include "driftwatch/serialization.hpp"

#include "driftwatch/errors.hpp"

namespace driftwatch {

void to_json(nlohmann::json& j, const Itemset& s) {
  j = nlohmann::json::object();
  for (const auto& item : s.items()) j[item.attribute] = item.value;
}

void from_json(const nlohmann::json& j, Itemset& s) {
  if (!j.is_object()) throw InvalidInput("itemset must be a JSON object");
  std::vector<Item> items;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw InvalidInput("itemset value for '" + k + "' must be a string");
    items.push_back({k, v.get<std::string>()});
  }
  s = Itemset(std::move(items));
}

void to_json(nlohmann::json& j, const DriftLogEntry& e) {
  j = {{"ts", e.timestamp},
       {"device_id", e.device_id},
       {"model_version_id", e.model_version_id},
       {"attributes", e.attributes},
       {"drift", e.drift}};
}

void from_json(const nlohmann::json& j, DriftLogEntry& e) {
  if (!j.is_object()) throw SchemaError("", "entry must be a JSON object");
  auto require = [&](const char* field) -> const nlohmann::json& {
    auto it = j.find(field);
    if (it == j.end()) throw SchemaError(field, std::string("missing field '") + field + "'");
    return *it;
  };
  const auto& ts = require("ts");
  if (!ts.is_number_integer()) throw SchemaError("ts", "field 'ts' must be an integer");
  const auto& dev = require("device_id");
  if (!dev.is_string()) throw SchemaError("device_id", "field 'device_id' must be a string");
  const auto& drift = require("drift");
  if (!drift.is_boolean()) throw SchemaError("drift", "field 'drift' must be a boolean");
  const auto& attrs = require("attributes");
  if (!attrs.is_object()) throw SchemaError("attributes", "field 'attributes' must be an object");

  e.timestamp = ts.get<std::int64_t>();
  e.device_id = dev.get<std::string>();
  e.drift = drift.get<bool>();
  e.model_version_id.clear();
  if (auto it = j.find("model_version_id"); it != j.end()) {
    if (!it->is_string()) {
      throw SchemaError("model_version_id", "field 'model_version_id' must be a string");
    }
    e.model_version_id = it->get<std::string>();
  }
  e.attributes.clear();
  for (const auto& [k, v] : attrs.items()) {
    if (!v.is_string()) throw SchemaError(k, "attribute '" + k + "' must be a string");
    e.attributes[k] = v.get<std::string>();
  }
}

}  // namespace driftwatch
