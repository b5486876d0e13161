#pragma once

// JSON mappings for the tunable settings shared by the simulator and the
// service. Missing keys keep their defaults; unknown keys throw ConfigError so
// typos do not silently fall back.

#include <json.hpp>

#include "driftwatch/adapter.hpp"
#include "driftwatch/model_pool.hpp"
#include "driftwatch/rca.hpp"
#include "driftwatch/toy_model.hpp"

namespace driftwatch::config {

rca::Thresholds thresholds_from_json(const nlohmann::json& j);
nlohmann::json to_json(const rca::Thresholds& t);

rca::AnalysisOptions analysis_options_from_json(const nlohmann::json& j);
nlohmann::json to_json(const rca::AnalysisOptions& o);

adapt::AdaptConfig adapt_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const adapt::AdaptConfig& c);

pool::PoolConfig pool_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const pool::PoolConfig& c);

toy::TaskConfig task_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const toy::TaskConfig& c);

// Throws ConfigError naming the first key of j not in `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* where);

}  // namespace driftwatch::config
