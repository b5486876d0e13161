#pragma once

// Deterministic fleet workload and end-to-end experiment driver.
//
// Devices in several locations submit inputs at Poisson times; the local
// weather decides which corruption (if any) an input suffers. Each device
// detects drift per inference and logs it. At every window boundary the
// chosen strategy acts: nothing, one adaptation on everything uplinked, or
// root cause analysis followed by one adaptation per cause.
//
// Ground truth (labels and true causes) lives in a separate channel that only
// the scoring code reads.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/adapter.hpp"
#include "driftwatch/model_pool.hpp"
#include "driftwatch/rca.hpp"
#include "driftwatch/toy_model.hpp"
#include "driftwatch/weather.hpp"

namespace driftwatch::sim {

enum class Strategy { no_adapt, adapt_all, by_cause };
const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

enum class AdaptMethod { tent, memo };

struct LocationSpec {
  std::string name;
  std::vector<double> class_probs;  // empty: Zipf(alpha) over a per-location class order
};

struct SimConfig {
  std::uint64_t seed = 1;
  std::vector<LocationSpec> locations;
  int devices_per_location = 16;
  double arrivals_per_day = 2.0;
  std::int64_t start = 1577836800;  // 2020-01-01
  int days = 111;
  int windows = 8;
  int severity = 3;
  double drift_probability = 1.0;
  double zipf_alpha = 0.0;
  double uplink_fraction = 0.1;
  std::vector<std::string> causes{"rain", "snow", "fog"};

  std::filesystem::path weather_file;  // empty: generate from weather_seed
  std::uint64_t weather_seed = 2020;
  double drifted_day_fraction = 0.3;

  toy::TaskConfig task;
  std::uint64_t task_seed = 7;
  double msp_threshold = 0.9;

  rca::Thresholds thresholds;
  rca::AnalysisOptions analysis;
  adapt::AdaptConfig adaptation;
  AdaptMethod method = AdaptMethod::tent;
  bool adapt_clean = false;
  int sample_retention_windows = 3;
  pool::PoolConfig pool;

  int evaluation_samples = 400;

  // Seven locations, the seventh auto-named, everything else at defaults.
  static SimConfig defaults();
  // Relative weather paths resolve against base_dir. Throws ConfigError.
  static SimConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static SimConfig load(const std::filesystem::path& path);
  void validate() const;
};

nlohmann::json to_json(const SimConfig& c);

struct Observation {
  std::int64_t timestamp = 0;
  std::string device_id;
  std::string location;
  std::string weather;
  toy::Features x;

  AttributeMap attributes() const;
};

struct GroundTruth {
  int label = 0;
  std::string cause;  // "clean" or the weather that corrupted the input
};

struct Stream {
  std::vector<Observation> events;  // time ordered
  std::vector<GroundTruth> truth;   // parallel to events, scoring only
  weather::WeatherSchedule schedule;
};

weather::WeatherSchedule load_schedule(const SimConfig& config);
Stream generate_stream(const SimConfig& config, const toy::SyntheticTask& task);

// Task, clean model and stream, built once and shared by several runs.
struct Prepared {
  SimConfig config;
  toy::SyntheticTask task;
  toy::ToyClassifier base;
  Stream stream;
};
Prepared prepare(const SimConfig& config);

struct WindowStats {
  int index = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::size_t events = 0;
  std::size_t drifted_events = 0;
  std::size_t flagged = 0;
  std::size_t correct = 0;
  std::size_t drifted_correct = 0;
  std::size_t versions_deployed = 0;  // adapted versions on devices during the window
  std::vector<std::string> causes;    // found at the end of the window
  std::vector<std::string> adapted;
  std::vector<std::string> deferred;

  double accuracy() const;
  double drifted_accuracy() const;  // NaN when no drifted events
  double detection_rate() const;
};

struct CauseDetection {
  std::string cause;
  double pre = 0.0;    // clean model on this cause's data
  double post = 0.0;   // latest adapted version for this cause on the same data
  double clean = 0.0;  // clean model on clean data
  bool adapted = false;
  std::string version_id;
};

struct SimReport {
  Strategy strategy = Strategy::no_adapt;
  nlohmann::json config;
  std::vector<WindowStats> windows;
  std::size_t events = 0;
  std::size_t drifted_events = 0;
  double accuracy = 0.0;
  double drifted_accuracy = 0.0;
  std::vector<double> cumulative_accuracy;
  std::vector<CauseDetection> detection;  // by-cause only
  double wall_time_ms = 0.0;
};

SimReport run(const Prepared& prepared, Strategy strategy);
SimReport run(const SimConfig& config, Strategy strategy);

// Per planted cause, detection rates before and after by-cause adaptation.
std::vector<CauseDetection> detection_evolution(const SimConfig& config);

nlohmann::json to_json(const SimReport& r);
// FNV-1a over the canonical JSON with wall times removed, as 16 hex digits.
std::string report_hash(const SimReport& r);
std::string summary_table(const SimReport& r);

}  // namespace driftwatch::sim
