#include "driftwatch/monitor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "driftwatch/config.hpp"
#include "driftwatch/errors.hpp"
#include "driftwatch/serialization.hpp"

namespace driftwatch::monitor {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

std::string cause_id(std::int64_t window, std::size_t index) {
  return "w" + std::to_string(window) + "-c" + std::to_string(index);
}

std::optional<std::size_t> parse_cause_index(const std::string& id, std::int64_t window) {
  const std::string prefix = "w" + std::to_string(window) + "-c";
  if (id.rfind(prefix, 0) != 0 || id.size() == prefix.size()) return std::nullopt;
  std::size_t index = 0;
  for (std::size_t i = prefix.size(); i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return std::nullopt;
    index = index * 10 + static_cast<std::size_t>(id[i] - '0');
  }
  return index;
}

AlertState alert_state_from_string(const std::string& s) {
  if (s == "open") return AlertState::open;
  if (s == "acknowledged") return AlertState::acknowledged;
  if (s == "adapted") return AlertState::adapted;
  throw ConfigError("unknown alert state '" + s + "'");
}

}  // namespace

const char* to_string(Mode m) { return m == Mode::autopilot ? "autopilot" : "manual"; }

Mode mode_from_string(const std::string& name) {
  if (name == "autopilot") return Mode::autopilot;
  if (name == "manual") return Mode::manual;
  throw InvalidInput("mode must be 'autopilot' or 'manual'");
}

const char* to_string(AlertState s) {
  switch (s) {
    case AlertState::open:
      return "open";
    case AlertState::acknowledged:
      return "acknowledged";
    case AlertState::adapted:
      return "adapted";
  }
  return "?";
}

void MonitorConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port must lie in 0..65535");
  if (schema.attributes.empty()) throw ConfigError("schema needs at least one attribute");
  if (window_seconds < 1) throw ConfigError("window_seconds must be >= 1");
  if (sample_retention_windows < 1) throw ConfigError("sample_retention_windows must be >= 1");
  if (weather_days < 1) throw ConfigError("weather days must be >= 1");
  adaptation.validate();
  pool.validate();
}

MonitorConfig MonitorConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  config::check_keys(j,
                     {"host", "port", "schema", "origin", "window_seconds", "mode", "thresholds", "analysis",
                      "adaptation", "sample_retention_windows", "pool", "task", "task_seed", "data_dir", "weather"},
                     "service config");
  MonitorConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path = p;
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("schema")) c.schema.attributes = j.at("schema").get<std::vector<std::string>>();
    if (j.contains("origin")) c.origin = weather::parse_date(j.at("origin").get<std::string>());
    c.window_seconds = j.value("window_seconds", c.window_seconds);
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("thresholds")) c.thresholds = config::thresholds_from_json(j.at("thresholds"));
    if (j.contains("analysis")) c.analysis = config::analysis_options_from_json(j.at("analysis"));
    if (j.contains("adaptation")) c.adaptation = config::adapt_config_from_json(j.at("adaptation"));
    c.sample_retention_windows = j.value("sample_retention_windows", c.sample_retention_windows);
    if (j.contains("pool")) c.pool = config::pool_config_from_json(j.at("pool"));
    if (j.contains("task")) c.task = config::task_config_from_json(j.at("task"));
    c.task_seed = j.value("task_seed", c.task_seed);
    if (j.contains("data_dir")) c.data_dir = resolve(j.at("data_dir").get<std::string>());
    if (j.contains("weather")) {
      const auto& w = j.at("weather");
      config::check_keys(w, {"file", "locations", "days", "seed"}, "weather");
      if (w.contains("file")) c.weather_file = resolve(w.at("file").get<std::string>());
      c.weather_locations = w.value("locations", c.weather_locations);
      c.weather_days = w.value("days", c.weather_days);
      c.weather_seed = w.value("seed", c.weather_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed service config: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

MonitorConfig MonitorConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return from_json(j, path.parent_path());
}

nlohmann::json to_json(const MonitorConfig& c) {
  nlohmann::json weather{{"locations", c.weather_locations}, {"days", c.weather_days}, {"seed", c.weather_seed}};
  if (!c.weather_file.empty()) weather["file"] = c.weather_file.string();
  nlohmann::json j{{"host", c.host},
                   {"port", c.port},
                   {"schema", c.schema.attributes},
                   {"origin", weather::format_date(c.origin)},
                   {"window_seconds", c.window_seconds},
                   {"mode", to_string(c.mode)},
                   {"thresholds", config::to_json(c.thresholds)},
                   {"analysis", config::to_json(c.analysis)},
                   {"adaptation", config::to_json(c.adaptation)},
                   {"sample_retention_windows", c.sample_retention_windows},
                   {"pool", config::to_json(c.pool)},
                   {"task", config::to_json(c.task)},
                   {"task_seed", c.task_seed},
                   {"weather", weather}};
  if (!c.data_dir.empty()) j["data_dir"] = c.data_dir.string();
  return j;
}

nlohmann::json to_json(const Alert& a) {
  return {{"id", a.id},
          {"window", a.window},
          {"causes", a.causes},
          {"created_at", a.created_at},
          {"state", to_string(a.state)}};
}

nlohmann::json to_json(const AdaptationOutcome& o) {
  nlohmann::json j{{"cause_id", o.cause_id}, {"cause", o.cause}, {"samples", o.samples}, {"evicted", o.evicted}};
  j["version_id"] = o.version_id ? nlohmann::json(*o.version_id) : nlohmann::json(nullptr);
  j["skipped"] = o.skipped.empty() ? nlohmann::json(nullptr) : nlohmann::json(o.skipped);
  return j;
}

namespace {

std::unique_ptr<weather::WeatherProvider> default_provider(const MonitorConfig& c) {
  auto schedule = c.weather_file.empty()
                      ? weather::WeatherSchedule::generate(c.weather_locations, c.origin, c.weather_days,
                                                           c.weather_seed)
                      : weather::WeatherSchedule::load_csv(c.weather_file);
  return std::make_unique<weather::ScheduleProvider>(std::move(schedule));
}

toy::ToyClassifier default_clean(const MonitorConfig& c) {
  c.validate();
  return toy::train_clean(toy::SyntheticTask::generate(c.task, c.task_seed), c.task_seed);
}

}  // namespace

Monitor::Monitor(MonitorConfig config)
    : Monitor(config, default_clean(config), default_provider(config)) {}

Monitor::Monitor(MonitorConfig config, toy::ToyClassifier clean, std::unique_ptr<weather::WeatherProvider> provider)
    : config_(std::move(config)), clean_(std::move(clean)), provider_(std::move(provider)), mode_(config_.mode) {
  config_.validate();
  if (!provider_) throw ConfigError("a weather provider is required");
  auto clean_ptr = std::make_shared<const toy::ToyClassifier>(clean_);
  pool_ = std::make_shared<const pool::ModelPool>(
      config_.pool, pool::ModelVersion{clean_.version_id, {}, clean_ptr, config_.origin, config_.origin, 0.0});
  if (config_.data_dir.empty()) {
    log_ = std::make_unique<DriftLog>(config_.schema);
  } else {
    std::filesystem::create_directories(config_.data_dir / "reports");
    log_ = std::make_unique<DriftLog>(config_.schema, config_.data_dir / "drift_log.ndjson");
    audit_out_.open(config_.data_dir / "audit.ndjson", std::ios::app);
    load_reports();
  }
  audit("service_started", {{"mode", to_string(mode_)}, {"entries", log_->size()}});
}

Monitor::~Monitor() = default;

void Monitor::audit(const std::string& event, nlohmann::json details) {
  // Callers may or may not hold mu_; the sequence counter is only touched here
  // and under the same lock discipline as the stream.
  static std::mutex audit_mu;
  std::lock_guard lock(audit_mu);
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  nlohmann::json rec{{"seq", audit_seq_++}, {"time_ms", now}, {"event", event}, {"details", std::move(details)}};
  if (audit_out_.is_open()) {
    audit_out_ << rec.dump() << '\n';
    audit_out_.flush();
  }
}

void Monitor::load_reports() {
  const auto state_path = config_.data_dir / "state.json";
  for (const auto& f : std::filesystem::directory_iterator(config_.data_dir / "reports")) {
    long long w = 0;
    if (std::sscanf(f.path().filename().string().c_str(), "window-%lld.json", &w) != 1) continue;
    std::ifstream in(f.path());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("corrupt report " + f.path().string());
    reports_[w] = rca::report_from_json(j);
    closed_.insert(w);
  }
  std::ifstream in(state_path);
  if (!in) return;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("corrupt service state " + state_path.string());
  for (auto w : j.value("closed", std::vector<std::int64_t>{})) closed_.insert(w);
  if (j.contains("mode")) mode_ = mode_from_string(j.at("mode").get<std::string>());
  for (const auto& a : j.value("alerts", nlohmann::json::array())) {
    alerts_.push_back({a.at("id"), a.at("window"), a.at("causes").get<std::vector<std::string>>(), a.at("created_at"),
                       alert_state_from_string(a.at("state"))});
  }
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

// Closed windows, mode and alerts; written whenever one of them changes.
void Monitor::persist_state_locked() {
  if (config_.data_dir.empty()) return;
  nlohmann::json alerts = nlohmann::json::array();
  for (const auto& a : alerts_) alerts.push_back(to_json(a));
  write_atomically(config_.data_dir / "state.json",
                   nlohmann::json{{"closed", closed_}, {"mode", to_string(mode_)}, {"alerts", alerts}}.dump());
}

void Monitor::persist_report(std::int64_t window, const rca::RootCauseReport& r) {
  if (config_.data_dir.empty()) return;
  write_atomically(config_.data_dir / "reports" / ("window-" + std::to_string(window) + ".json"),
                   report_json(r, window).dump(2));
}

std::int64_t Monitor::window_of(std::int64_t timestamp) const {
  return floor_div(timestamp - config_.origin, config_.window_seconds);
}

std::int64_t Monitor::window_start(std::int64_t window) const { return config_.origin + window * config_.window_seconds; }

void Monitor::enrich(const std::string& device_id, std::int64_t timestamp, AttributeMap& attrs) const {
  const auto& wanted = config_.schema.attributes;
  auto wants = [&](const char* a) { return std::find(wanted.begin(), wanted.end(), a) != wanted.end(); };
  if (wants("device_id") && !attrs.count("device_id")) attrs["device_id"] = device_id;
  if (wants("weather") && !attrs.count("weather")) {
    auto loc = attrs.find("location");
    attrs["weather"] = loc == attrs.end() ? weather::kUnknown : provider_->lookup(loc->second, timestamp);
  }
}

std::uint64_t Monitor::ingest_entry(DriftLogEntry entry) {
  enrich(entry.device_id, entry.timestamp, entry.attributes);
  config_.schema.validate(entry);
  const auto w = window_of(entry.timestamp);
  {
    std::lock_guard lock(mu_);
    if (closed_.count(w)) throw Conflict("window " + std::to_string(w) + " is closed");
  }
  return log_->append(entry);
}

std::size_t Monitor::ingest_sample(const std::string& device_id, std::int64_t timestamp, toy::Features x,
                                   AttributeMap attributes) {
  if (x.size() != static_cast<std::size_t>(clean_.dim())) {
    throw InvalidInput("sample has " + std::to_string(x.size()) + " features, expected " +
                       std::to_string(clean_.dim()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidInput("sample features must be finite");
  }
  enrich(device_id, timestamp, attributes);
  config_.schema.validate({timestamp, device_id, "", attributes, false});
  const auto w = window_of(timestamp);
  std::lock_guard lock(mu_);
  samples_.push_back({w, std::move(attributes), std::move(x)});
  return static_cast<std::size_t>(
      std::count_if(samples_.begin(), samples_.end(), [&](const Sample& s) { return s.window == w; }));
}

std::optional<rca::RootCauseReport> Monitor::close_window(std::int64_t window) {
  Mode mode;
  {
    std::lock_guard lock(mu_);
    if (!closed_.insert(window).second) return std::nullopt;
    mode = mode_;
  }
  audit("window_closed", {{"window", window}});
  {
    std::lock_guard lock(mu_);
    persist_state_locked();
  }
  if (mode != Mode::autopilot) return std::nullopt;
  return run_analysis(window);
}

rca::RootCauseReport Monitor::run_analysis(std::int64_t window) {
  {
    std::lock_guard lock(mu_);
    if (!closed_.count(window)) throw Conflict("window " + std::to_string(window) + " is still open");
    if (reports_.count(window)) throw Conflict("window " + std::to_string(window) + " was already analyzed");
    if (!analyzing_.insert(window).second) {
      throw Conflict("analysis of window " + std::to_string(window) + " is already running");
    }
  }
  rca::RootCauseReport report;
  try {
    const auto start = window_start(window);
    report = rca::analyze(log_->window(start, start + config_.window_seconds), config_.thresholds, config_.analysis,
                          "w" + std::to_string(window));
    persist_report(window, report);
  } catch (...) {
    std::lock_guard lock(mu_);
    analyzing_.erase(window);
    throw;
  }
  bool autopilot;
  {
    std::lock_guard lock(mu_);
    analyzing_.erase(window);
    reports_[window] = report;
    if (!report.causes.empty()) {
      Alert a{"alert-" + std::to_string(window), window, {}, window_start(window) + config_.window_seconds,
              AlertState::open};
      for (const auto& c : report.causes) a.causes.push_back(c.itemset.to_string());
      alerts_.push_back(std::move(a));
      persist_state_locked();
    }
    autopilot = mode_ == Mode::autopilot;
  }
  audit("analysis_completed",
        {{"window", window}, {"entries", report.entry_count}, {"causes", report.causes.size()}});
  if (autopilot && !report.causes.empty()) adapt(window, {}, true);
  return report;
}

std::vector<AdaptationOutcome> Monitor::adapt(std::int64_t window, const std::vector<std::string>& cause_ids,
                                              bool from_autopilot) {
  std::lock_guard writer(adapt_mu_);
  rca::RootCauseReport report;
  {
    std::lock_guard lock(mu_);
    if (!from_autopilot && mode_ == Mode::autopilot) {
      throw Conflict("adaptation is triggered automatically in autopilot mode; switch to manual first");
    }
    auto it = reports_.find(window);
    if (it == reports_.end()) throw NotFound("window " + std::to_string(window) + " has no analysis report");
    report = it->second;
  }
  std::vector<std::size_t> selected;
  if (cause_ids.empty()) {
    for (std::size_t i = 0; i < report.causes.size(); ++i) selected.push_back(i);
  } else {
    for (const auto& id : cause_ids) {
      const auto index = parse_cause_index(id, window);
      if (!index || *index >= report.causes.size()) throw NotFound("unknown cause id '" + id + "'");
      if (std::find(selected.begin(), selected.end(), *index) == selected.end()) selected.push_back(*index);
    }
  }

  const auto stamp = window_start(window) + config_.window_seconds;
  std::vector<AdaptationOutcome> outcomes;
  auto next_pool = std::make_shared<pool::ModelPool>(*this->pool());
  bool created = false;
  for (auto index : selected) {
    const auto& cause = report.causes[index];
    AdaptationOutcome out{cause_id(window, index), cause.itemset.to_string(), std::nullopt, 0, "", {}};
    std::vector<toy::Features> batch;
    std::vector<std::size_t> used;
    {
      std::lock_guard lock(mu_);
      for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (s.consumed || s.window > window || s.window <= window - config_.sample_retention_windows) continue;
        if (!cause.itemset.matches(s.attributes)) continue;
        batch.push_back(s.x);
        used.push_back(i);
      }
    }
    out.samples = batch.size();
    if (static_cast<int>(batch.size()) < config_.adaptation.batch_size) {
      out.skipped = "insufficient samples (" + std::to_string(batch.size()) + " < " +
                    std::to_string(config_.adaptation.batch_size) + ")";
      audit("adaptation_skipped", {{"cause_id", out.cause_id}, {"reason", out.skipped}});
      outcomes.push_back(std::move(out));
      continue;
    }
    const auto* existing = next_pool->find(cause.itemset);
    const toy::ToyClassifier& start = existing ? *existing->model : *next_pool->clean().model;
    auto adapted = adapt::adapt_tent(start, batch, config_.adaptation).model;
    adapted.parent_version = start.version_id;
    adapted.version_id = out.cause_id;
    adapted.cause = cause.itemset;
    auto shared = std::make_shared<const toy::ToyClassifier>(std::move(adapted));
    for (const auto& e : next_pool->insert({shared->version_id, cause.itemset, shared, stamp, stamp,
                                            cause.metrics.risk_ratio})) {
      out.evicted.push_back(e.version_id);
    }
    if (std::find(out.evicted.begin(), out.evicted.end(), shared->version_id) == out.evicted.end()) {
      out.version_id = shared->version_id;
      created = true;
    } else {
      out.skipped = "subsumed by a broader pooled cause";
    }
    {
      std::lock_guard lock(mu_);
      for (auto i : used) samples_[i].consumed = true;
    }
    audit("adaptation_completed", to_json(out));
    outcomes.push_back(std::move(out));
  }

  std::lock_guard lock(mu_);
  pool_ = std::move(next_pool);
  ++pool_generation_;
  if (created) {
    for (auto& a : alerts_) {
      if (a.window == window) a.state = AlertState::adapted;
    }
    persist_state_locked();
  }
  return outcomes;
}

std::vector<Alert> Monitor::alerts(std::optional<AlertState> state) const {
  std::lock_guard lock(mu_);
  std::vector<Alert> out;
  for (const auto& a : alerts_) {
    if (!state || a.state == *state) out.push_back(a);
  }
  return out;
}

Alert Monitor::acknowledge(const std::string& alert_id) {
  std::lock_guard lock(mu_);
  for (auto& a : alerts_) {
    if (a.id != alert_id) continue;
    if (a.state == AlertState::adapted) throw Conflict("alert " + alert_id + " was already handled by adaptation");
    a.state = AlertState::acknowledged;
    persist_state_locked();
    return a;
  }
  throw NotFound("no alert '" + alert_id + "'");
}

std::optional<rca::RootCauseReport> Monitor::report(std::int64_t window) const {
  std::lock_guard lock(mu_);
  auto it = reports_.find(window);
  if (it == reports_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json Monitor::report_json(const rca::RootCauseReport& r, std::int64_t window) {
  auto j = rca::to_json(r);
  for (std::size_t i = 0; i < j["causes"].size(); ++i) j["causes"][i]["id"] = cause_id(window, i);
  j["window"] = window;
  return j;
}

std::shared_ptr<const pool::ModelPool> Monitor::pool() const {
  std::lock_guard lock(mu_);
  return pool_;
}

std::uint64_t Monitor::pool_generation() const {
  std::lock_guard lock(mu_);
  return pool_generation_;
}

Mode Monitor::mode() const {
  std::lock_guard lock(mu_);
  return mode_;
}

void Monitor::set_mode(Mode m) {
  Mode previous;
  {
    std::lock_guard lock(mu_);
    previous = std::exchange(mode_, m);
    persist_state_locked();
  }
  if (previous != m) audit("mode_changed", {{"from", to_string(previous)}, {"to", to_string(m)}});
}

nlohmann::json Monitor::timeline(const std::string& metric) const {
  if (metric != "drift_rate" && metric != "entries") {
    throw InvalidInput("metric must be 'drift_rate' or 'entries'");
  }
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> per_window;
  for (const auto& e : log_->entries()) {
    auto& [n, drifted] = per_window[window_of(e.timestamp)];
    ++n;
    drifted += e.drift;
  }
  nlohmann::json points = nlohmann::json::array();
  for (const auto& [w, counts] : per_window) {
    const auto [n, drifted] = counts;
    const double value = metric == "entries" ? static_cast<double>(n) : static_cast<double>(drifted) / n;
    points.push_back({{"window", w},
                      {"start", window_start(w)},
                      {"end", window_start(w) + config_.window_seconds},
                      {"entries", n},
                      {"drifted", drifted},
                      {"value", value}});
  }
  return {{"metric", metric}, {"points", points}};
}

std::vector<WindowStatus> Monitor::windows() const {
  std::map<std::int64_t, WindowStatus> out;
  for (const auto& e : log_->entries()) {
    auto& s = out[window_of(e.timestamp)];
    ++s.entries;
  }
  std::lock_guard lock(mu_);
  for (const auto& s : samples_) ++out[s.window].samples;
  for (auto w : closed_) out[w].closed = true;
  for (const auto& [w, r] : reports_) out[w].analyzed = true;
  std::vector<WindowStatus> v;
  for (auto& [w, s] : out) {
    s.window = w;
    v.push_back(s);
  }
  return v;
}

}  // namespace driftwatch::monitor
