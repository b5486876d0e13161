#pragma once

// Cloud-side monitor: ingests drift-log entries and uplinked samples, runs
// root cause analysis per closed window, raises alerts and turns causes into
// adapted model versions. The HTTP layer (monitor_http.hpp) is a thin
// translation of these calls; everything here is usable in-process.
//
// Windows are fixed-length intervals numbered from `origin`; window w covers
// [origin + w * window_seconds, origin + (w + 1) * window_seconds).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/adapter.hpp"
#include "driftwatch/drift_log.hpp"
#include "driftwatch/model_pool.hpp"
#include "driftwatch/rca.hpp"
#include "driftwatch/toy_model.hpp"
#include "driftwatch/weather.hpp"

namespace driftwatch::monitor {

enum class Mode { autopilot, manual };
const char* to_string(Mode m);
Mode mode_from_string(const std::string& name);  // throws InvalidInput

enum class AlertState { open, acknowledged, adapted };
const char* to_string(AlertState s);

struct MonitorConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  Schema schema{{"weather", "location", "device_id"}};
  std::int64_t origin = 1577836800;  // 2020-01-01
  std::int64_t window_seconds = 86400;
  Mode mode = Mode::autopilot;
  rca::Thresholds thresholds;
  rca::AnalysisOptions analysis;
  adapt::AdaptConfig adaptation;
  // Windows of samples kept for adaptation, counting the analyzed one.
  int sample_retention_windows = 3;
  pool::PoolConfig pool;
  toy::TaskConfig task;
  std::uint64_t task_seed = 7;
  // Empty: everything in memory. Otherwise the drift log, reports and audit
  // trail live here and reports survive a restart.
  std::filesystem::path data_dir;
  std::filesystem::path weather_file;  // empty: generated schedule
  std::vector<std::string> weather_locations{"New York",       "Tibet",  "Beijing", "New South Wales",
                                             "United Kingdom", "Quebec", "location-7"};
  int weather_days = 366;
  std::uint64_t weather_seed = 2020;

  static MonitorConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static MonitorConfig load(const std::filesystem::path& path);
  void validate() const;
};

nlohmann::json to_json(const MonitorConfig& c);

struct Alert {
  std::string id;
  std::int64_t window = 0;
  std::vector<std::string> causes;  // itemset strings, rank order
  std::int64_t created_at = 0;      // end of the window, epoch seconds
  AlertState state = AlertState::open;
};

nlohmann::json to_json(const Alert& a);

struct AdaptationOutcome {
  std::string cause_id;
  std::string cause;
  std::optional<std::string> version_id;  // set when a version was pushed
  std::size_t samples = 0;
  std::string skipped;                    // reason when no version was made
  std::vector<std::string> evicted;
};

nlohmann::json to_json(const AdaptationOutcome& o);

struct WindowStatus {
  std::int64_t window = 0;
  bool closed = false;
  bool analyzed = false;
  std::size_t entries = 0;
  std::size_t samples = 0;
};

class Monitor {
 public:
  // Trains the clean model and opens (or replays) the persisted state.
  // Throws ConfigError.
  explicit Monitor(MonitorConfig config);
  // Injects the clean model and weather provider; used by tests.
  Monitor(MonitorConfig config, toy::ToyClassifier clean, std::unique_ptr<weather::WeatherProvider> provider);
  ~Monitor();

  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;

  // Adds a "weather" attribute from the provider when the schema wants one
  // and the entry lacks it. Returns the entry id. Throws SchemaError, or
  // Conflict when the entry's window is already closed.
  std::uint64_t ingest_entry(DriftLogEntry entry);
  // Returns the number of buffered samples for that window. Throws
  // InvalidInput on a dimension mismatch, SchemaError on missing attributes.
  std::size_t ingest_sample(const std::string& device_id, std::int64_t timestamp, toy::Features x,
                            AttributeMap attributes);

  // Marks the window closed; in autopilot also analyzes and adapts. Returns
  // the report when one was produced. Closing twice is a no-op.
  std::optional<rca::RootCauseReport> close_window(std::int64_t window);

  // Throws Conflict when the window is open, already analyzed or being
  // analyzed. In autopilot, adapts on every cause before returning.
  rca::RootCauseReport run_analysis(std::int64_t window);

  // Adapts on the named causes (ids "w<window>-c<index>"); all of the
  // window's causes when `cause_ids` is empty. Throws NotFound for an unknown
  // window report or cause id, Conflict when called by hand in autopilot.
  std::vector<AdaptationOutcome> adapt(std::int64_t window, const std::vector<std::string>& cause_ids,
                                       bool from_autopilot = false);

  std::vector<Alert> alerts(std::optional<AlertState> state = std::nullopt) const;
  Alert acknowledge(const std::string& alert_id);  // NotFound, Conflict when already adapted
  std::optional<rca::RootCauseReport> report(std::int64_t window) const;
  // Report JSON with cause ids attached, as served to operators.
  static nlohmann::json report_json(const rca::RootCauseReport& r, std::int64_t window);

  // Atomic snapshot of the published pool.
  std::shared_ptr<const pool::ModelPool> pool() const;
  std::uint64_t pool_generation() const;

  Mode mode() const;
  void set_mode(Mode m);

  // Per-window aggregates over the log: metric "drift_rate" or "entries".
  // Throws InvalidInput for any other metric.
  nlohmann::json timeline(const std::string& metric) const;
  std::vector<WindowStatus> windows() const;

  std::int64_t window_of(std::int64_t timestamp) const;
  std::int64_t window_start(std::int64_t window) const;
  const MonitorConfig& config() const noexcept { return config_; }
  const DriftLog& log() const noexcept { return *log_; }

 private:
  struct Sample {
    std::int64_t window;
    AttributeMap attributes;
    toy::Features x;
    bool consumed = false;
  };

  void audit(const std::string& event, nlohmann::json details);
  void enrich(const std::string& device_id, std::int64_t timestamp, AttributeMap& attrs) const;
  void persist_report(std::int64_t window, const rca::RootCauseReport& r);
  void load_reports();
  void persist_state_locked();  // caller holds mu_

  MonitorConfig config_;
  toy::ToyClassifier clean_;
  std::unique_ptr<weather::WeatherProvider> provider_;
  std::unique_ptr<DriftLog> log_;

  mutable std::mutex mu_;  // everything below
  Mode mode_;
  std::set<std::int64_t> closed_;
  std::set<std::int64_t> analyzing_;
  std::map<std::int64_t, rca::RootCauseReport> reports_;
  std::vector<Alert> alerts_;
  std::vector<Sample> samples_;
  std::shared_ptr<const pool::ModelPool> pool_;
  std::uint64_t pool_generation_ = 0;
  std::uint64_t audit_seq_ = 0;
  std::ofstream audit_out_;

  std::mutex adapt_mu_;  // single writer for the pool
};

}  // namespace driftwatch::monitor
