#pragma once

// JSON mappings for the record types that cross process boundaries.

#include <json.hpp>

#include "driftwatch/drift_log.hpp"
#include "driftwatch/itemset.hpp"

namespace driftwatch {

void to_json(nlohmann::json& j, const Itemset& s);
void from_json(const nlohmann::json& j, Itemset& s);

void to_json(nlohmann::json& j, const DriftLogEntry& e);
// Throws SchemaError naming the offending field on malformed input.
void from_json(const nlohmann::json& j, DriftLogEntry& e);

}  // namespace driftwatch
