#include "driftwatch/fleet_sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "driftwatch/config.hpp"
#include "driftwatch/detect.hpp"
#include "driftwatch/drift_log.hpp"
#include "driftwatch/errors.hpp"
#include "driftwatch/hash.hpp"
#include "driftwatch/serialization.hpp"

namespace driftwatch::sim {

namespace {

const std::vector<std::string> kDefaultLocations{"New York", "Tibet", "Beijing", "New South Wales",
                                                 "United Kingdom", "Quebec"};
constexpr int kDefaultLocationCount = 7;
constexpr const char* kClean = "clean";

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  return out;
}

std::vector<double> zipf_probs(int classes, double alpha, std::mt19937_64& rng) {
  std::vector<int> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> p(classes);
  double total = 0.0;
  for (int r = 0; r < classes; ++r) total += std::pow(r + 1.0, -alpha);
  for (int r = 0; r < classes; ++r) p[order[r]] = std::pow(r + 1.0, -alpha) / total;
  return p;
}

double nan_if_empty(std::size_t num, std::size_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : std::nan("");
}

nlohmann::json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::vector<std::string> location_names(const SimConfig& c) {
  std::vector<std::string> out;
  for (const auto& l : c.locations) out.push_back(l.name);
  return out;
}

toy::CorruptionSpec spec_for(const std::string& cause, const SimConfig& config,
                             const toy::SyntheticTask& task) {
  auto spec = toy::corruption_for(cause, config.severity);
  spec.anchor = task.center();
  return spec;
}

double detection_rate(const toy::ToyClassifier& model, const std::vector<toy::Features>& xs,
                      double threshold) {
  std::size_t flagged = 0;
  for (const auto& x : xs) flagged += detect::detect_msp(toy::predict(model, x), threshold).drift;
  return static_cast<double>(flagged) / static_cast<double>(xs.size());
}

struct BufferedSample {
  int window;
  AttributeMap attributes;
  toy::Features x;
  bool consumed = false;
};

adapt::AdaptResult run_adaptation(const toy::ToyClassifier& start, const std::vector<toy::Features>& batch,
                                  const SimConfig& config) {
  return config.method == AdaptMethod::memo ? adapt::adapt_memo(start, batch, config.adaptation)
                                            : adapt::adapt_tent(start, batch, config.adaptation);
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::no_adapt:
      return "no-adapt";
    case Strategy::adapt_all:
      return "adapt-all";
    case Strategy::by_cause:
      return "by-cause";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "no-adapt") return Strategy::no_adapt;
  if (name == "adapt-all") return Strategy::adapt_all;
  if (name == "by-cause") return Strategy::by_cause;
  throw ConfigError("unknown strategy '" + name + "' (expected no-adapt, adapt-all or by-cause)");
}

SimConfig SimConfig::defaults() {
  SimConfig c;
  for (const auto& n : kDefaultLocations) c.locations.push_back({n, {}});
  while (static_cast<int>(c.locations.size()) < kDefaultLocationCount) {
    c.locations.push_back({"location-" + std::to_string(c.locations.size() + 1), {}});
  }
  c.adaptation.renormalize = true;
  c.adaptation.steps = 100;
  c.adaptation.learning_rate = 1.0;
  c.adaptation.batch_size = 48;
  return c;
}

void SimConfig::validate() const {
  if (locations.empty()) throw ConfigError("at least one location is required");
  for (const auto& l : locations) {
    if (l.name.empty()) throw ConfigError("location names must be non-empty");
    if (!l.class_probs.empty()) {
      if (l.class_probs.size() != static_cast<std::size_t>(task.classes)) {
        throw ConfigError("class_probs for " + l.name + " must have one entry per class");
      }
      double total = 0.0;
      for (double p : l.class_probs) {
        if (p < 0.0) throw ConfigError("negative class probability for " + l.name);
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6) throw ConfigError("class_probs for " + l.name + " must sum to 1");
    }
  }
  if (devices_per_location < 1) throw ConfigError("devices_per_location must be >= 1");
  if (!(arrivals_per_day > 0.0)) throw ConfigError("arrivals_per_device_per_day must be positive");
  if (days < 1) throw ConfigError("days must be >= 1");
  if (windows < 1 || windows > days * 24) throw ConfigError("windows out of range");
  if (severity < 1 || severity > 5) throw ConfigError("severity must be within 1..5");
  if (drift_probability < 0.0 || drift_probability > 1.0) throw ConfigError("drift_probability must lie in [0, 1]");
  if (zipf_alpha < 0.0) throw ConfigError("zipf_alpha must be >= 0");
  if (uplink_fraction < 0.0 || uplink_fraction > 1.0) throw ConfigError("sample_uplink_fraction must lie in [0, 1]");
  for (const auto& c : causes) toy::corruption_for(c, severity);
  if (!(msp_threshold > 0.0 && msp_threshold < 1.0)) throw ConfigError("msp_threshold must lie in (0, 1)");
  if (sample_retention_windows < 1) throw ConfigError("sample_retention_windows must be >= 1");
  if (evaluation_samples < 2) throw ConfigError("evaluation_samples must be >= 2");
  adaptation.validate();
  pool.validate();
}

SimConfig SimConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  config::check_keys(j,
                     {"seed", "start_date", "days", "windows", "locations", "location_count", "devices_per_location",
                      "arrivals_per_device_per_day", "severity", "drift_probability", "zipf_alpha",
                      "sample_uplink_fraction", "causes", "weather", "task", "task_seed", "detection", "thresholds",
                      "analysis", "adaptation", "pool", "evaluation_samples"},
                     "simulation config");
  SimConfig c = defaults();
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("start_date")) c.start = weather::parse_date(j.at("start_date").get<std::string>());
    c.days = j.value("days", c.days);
    c.windows = j.value("windows", c.windows);
    if (j.contains("locations")) {
      c.locations.clear();
      for (const auto& l : j.at("locations")) {
        if (l.is_string()) {
          c.locations.push_back({l.get<std::string>(), {}});
        } else {
          config::check_keys(l, {"name", "class_probs"}, "location");
          c.locations.push_back({l.at("name").get<std::string>(), l.value("class_probs", std::vector<double>{})});
        }
      }
    }
    const int count = j.value("location_count", static_cast<int>(c.locations.size()));
    if (count < static_cast<int>(c.locations.size())) c.locations.resize(count);
    while (static_cast<int>(c.locations.size()) < count) {
      c.locations.push_back({"location-" + std::to_string(c.locations.size() + 1), {}});
    }
    c.devices_per_location = j.value("devices_per_location", c.devices_per_location);
    c.arrivals_per_day = j.value("arrivals_per_device_per_day", c.arrivals_per_day);
    c.severity = j.value("severity", c.severity);
    c.drift_probability = j.value("drift_probability", c.drift_probability);
    c.zipf_alpha = j.value("zipf_alpha", c.zipf_alpha);
    c.uplink_fraction = j.value("sample_uplink_fraction", c.uplink_fraction);
    c.causes = j.value("causes", c.causes);
    if (j.contains("weather")) {
      const auto& w = j.at("weather");
      config::check_keys(w, {"file", "seed", "drifted_fraction"}, "weather");
      if (w.contains("file")) {
        std::filesystem::path p = w.at("file").get<std::string>();
        c.weather_file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      }
      c.weather_seed = w.value("seed", c.weather_seed);
      c.drifted_day_fraction = w.value("drifted_fraction", c.drifted_day_fraction);
    }
    if (j.contains("task")) c.task = config::task_config_from_json(j.at("task"));
    c.task_seed = j.value("task_seed", c.task_seed);
    if (j.contains("detection")) {
      config::check_keys(j.at("detection"), {"msp_threshold"}, "detection");
      c.msp_threshold = j.at("detection").value("msp_threshold", c.msp_threshold);
    }
    if (j.contains("thresholds")) c.thresholds = config::thresholds_from_json(j.at("thresholds"));
    if (j.contains("analysis")) c.analysis = config::analysis_options_from_json(j.at("analysis"));
    if (j.contains("adaptation")) {
      auto a = j.at("adaptation");
      const std::string method = a.value("method", "tent");
      if (method != "tent" && method != "memo") throw ConfigError("adaptation method must be tent or memo");
      c.method = method == "memo" ? AdaptMethod::memo : AdaptMethod::tent;
      c.adapt_clean = a.value("adapt_clean", c.adapt_clean);
      c.sample_retention_windows = a.value("sample_retention_windows", c.sample_retention_windows);
      a.erase("method");
      a.erase("adapt_clean");
      a.erase("sample_retention_windows");
      auto merged = config::to_json(c.adaptation);
      merged.update(a);
      c.adaptation = config::adapt_config_from_json(merged);
    }
    if (j.contains("pool")) c.pool = config::pool_config_from_json(j.at("pool"));
    c.evaluation_samples = j.value("evaluation_samples", c.evaluation_samples);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed simulation config: ") + e.what());
  }
  c.validate();
  return c;
}

SimConfig SimConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return from_json(j, path.parent_path());
}

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json locs = nlohmann::json::array();
  for (const auto& l : c.locations) {
    nlohmann::json o{{"name", l.name}};
    if (!l.class_probs.empty()) o["class_probs"] = l.class_probs;
    locs.push_back(o);
  }
  auto adaptation = config::to_json(c.adaptation);
  adaptation["method"] = c.method == AdaptMethod::memo ? "memo" : "tent";
  adaptation["adapt_clean"] = c.adapt_clean;
  adaptation["sample_retention_windows"] = c.sample_retention_windows;
  nlohmann::json weather{{"seed", c.weather_seed}, {"drifted_fraction", c.drifted_day_fraction}};
  if (!c.weather_file.empty()) weather["file"] = c.weather_file.filename().string();
  return {{"seed", c.seed},
          {"start_date", weather::format_date(c.start)},
          {"days", c.days},
          {"windows", c.windows},
          {"locations", locs},
          {"devices_per_location", c.devices_per_location},
          {"arrivals_per_device_per_day", c.arrivals_per_day},
          {"severity", c.severity},
          {"drift_probability", c.drift_probability},
          {"zipf_alpha", c.zipf_alpha},
          {"sample_uplink_fraction", c.uplink_fraction},
          {"causes", c.causes},
          {"weather", weather},
          {"task", config::to_json(c.task)},
          {"task_seed", c.task_seed},
          {"detection", {{"msp_threshold", c.msp_threshold}}},
          {"thresholds", config::to_json(c.thresholds)},
          {"analysis", config::to_json(c.analysis)},
          {"adaptation", adaptation},
          {"pool", config::to_json(c.pool)},
          {"evaluation_samples", c.evaluation_samples}};
}

AttributeMap Observation::attributes() const {
  return {{"weather", weather}, {"location", location}, {"device_id", device_id}};
}

weather::WeatherSchedule load_schedule(const SimConfig& config) {
  const auto names = location_names(config);
  weather::WeatherSchedule s =
      config.weather_file.empty()
          ? weather::WeatherSchedule::generate(names, config.start, config.days, config.weather_seed,
                                               config.drifted_day_fraction)
          : weather::WeatherSchedule::load_csv(config.weather_file);
  if (s.start() > config.start ||
      s.start() + static_cast<std::int64_t>(s.days()) * weather::kSecondsPerDay <
          config.start + static_cast<std::int64_t>(config.days) * weather::kSecondsPerDay) {
    throw ConfigError("weather schedule does not cover the simulated date range");
  }
  for (const auto& loc : names) {
    for (int day = 0; day < config.days; ++day) {
      if (!s.at(loc, config.start + day * weather::kSecondsPerDay)) {
        throw ConfigError("weather schedule has no entry for " + loc + " on " +
                          weather::format_date(config.start + day * weather::kSecondsPerDay));
      }
    }
  }
  return s;
}

Stream generate_stream(const SimConfig& config, const toy::SyntheticTask& task) {
  config.validate();
  Stream stream;
  stream.schedule = load_schedule(config);

  struct Pending {
    std::int64_t ts;
    std::size_t device;
    Observation obs;
    GroundTruth truth;
  };
  std::vector<Pending> pending;
  std::size_t device_index = 0;
  for (const auto& loc : config.locations) {
    std::mt19937_64 loc_rng(mix_seed(config.seed, fnv1a(loc.name)));
    const auto probs = loc.class_probs.empty() ? zipf_probs(task.classes, config.zipf_alpha, loc_rng)
                                               : loc.class_probs;
    std::discrete_distribution<int> pick_class(probs.begin(), probs.end());
    for (int d = 0; d < config.devices_per_location; ++d, ++device_index) {
      char id[16];
      std::snprintf(id, sizeof id, "-%02d", d);
      const std::string device_id = slug(loc.name) + id;
      std::mt19937_64 rng(mix_seed(config.seed, 0x10000 + device_index));
      std::poisson_distribution<int> arrivals(config.arrivals_per_day);
      std::uniform_int_distribution<std::int64_t> second(0, weather::kSecondsPerDay - 1);
      std::bernoulli_distribution drifts(config.drift_probability);
      std::uint64_t n = 0;
      for (int day = 0; day < config.days; ++day) {
        const std::int64_t day_start = config.start + day * weather::kSecondsPerDay;
        const auto& label_today = *stream.schedule.at(loc.name, day_start);
        const int count = arrivals(rng);
        std::vector<std::int64_t> times(count);
        for (auto& t : times) t = day_start + second(rng);
        std::sort(times.begin(), times.end());
        for (auto t : times) {
          Pending p{t, device_index, {t, device_id, loc.name, label_today, {}}, {pick_class(rng), kClean}};
          p.obs.x = toy::draw_features(task, p.truth.label, rng);
          const bool planted =
              std::find(config.causes.begin(), config.causes.end(), label_today) != config.causes.end();
          if (planted && drifts(rng)) {
            p.obs.x = toy::corrupt(p.obs.x, spec_for(label_today, config, task),
                                   mix_seed(config.seed ^ device_index, n));
            p.truth.cause = label_today;
          }
          ++n;
          pending.push_back(std::move(p));
        }
      }
    }
  }
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.ts != b.ts ? a.ts < b.ts : a.device < b.device;
  });
  stream.events.reserve(pending.size());
  stream.truth.reserve(pending.size());
  for (auto& p : pending) {
    stream.events.push_back(std::move(p.obs));
    stream.truth.push_back(std::move(p.truth));
  }
  return stream;
}

Prepared prepare(const SimConfig& config) {
  config.validate();
  auto task = toy::SyntheticTask::generate(config.task, config.task_seed);
  auto base = toy::train_clean(task, config.task_seed);
  auto stream = generate_stream(config, task);
  return {config, std::move(task), std::move(base), std::move(stream)};
}

double WindowStats::accuracy() const { return nan_if_empty(correct, events); }
double WindowStats::drifted_accuracy() const { return nan_if_empty(drifted_correct, drifted_events); }
double WindowStats::detection_rate() const { return nan_if_empty(flagged, events); }

SimReport run(const Prepared& prepared, Strategy strategy) {
  const auto wall_start = std::chrono::steady_clock::now();
  const auto& config = prepared.config;
  const auto& stream = prepared.stream;
  const auto& base = prepared.base;

  SimReport report;
  report.strategy = strategy;
  report.config = to_json(config);

  pool::ModelPool pool(config.pool, {"clean", {}, std::make_shared<toy::ToyClassifier>(base), config.start,
                                     config.start, 0.0});
  toy::ToyClassifier adapt_all_model = base;
  DriftLog log(Schema{{"weather", "location", "device_id"}});
  std::vector<BufferedSample> buffer;
  std::mt19937_64 uplink_rng(mix_seed(config.seed, 0x0b11));
  std::bernoulli_distribution uplink(config.uplink_fraction);
  // Latest adapted model per planted weather, for the detection evolution.
  std::map<std::string, std::pair<std::string, std::shared_ptr<const toy::ToyClassifier>>> latest;

  const std::int64_t total = static_cast<std::int64_t>(config.days) * weather::kSecondsPerDay;
  std::size_t next = 0;
  std::size_t cum_correct = 0, cum_events = 0;
  for (int w = 0; w < config.windows; ++w) {
    WindowStats stats;
    stats.index = w;
    stats.start = config.start + total * w / config.windows;
    stats.end = config.start + total * (w + 1) / config.windows;
    stats.versions_deployed = pool.adapted_count();

    for (; next < stream.events.size() && stream.events[next].timestamp < stats.end; ++next) {
      const auto& ev = stream.events[next];
      const auto& truth = stream.truth[next];
      const auto attrs = ev.attributes();
      const toy::ToyClassifier* model = &base;
      std::string version = "clean";
      if (strategy == Strategy::adapt_all) {
        model = &adapt_all_model;
        version = adapt_all_model.version_id;
      } else if (strategy == Strategy::by_cause) {
        const auto& v = pool.select(attrs);
        model = v.model.get();
        version = v.version_id;
      }
      const auto logits = toy::predict(*model, ev.x);
      const auto verdict = detect::detect_msp(logits, config.msp_threshold);
      log.append({ev.timestamp, ev.device_id, version, attrs, verdict.drift});
      if (uplink(uplink_rng)) buffer.push_back({w, attrs, ev.x});

      // Scoring only: the label never reaches detection, analysis or adaptation.
      const bool correct =
          std::max_element(logits.begin(), logits.end()) - logits.begin() == truth.label;
      ++stats.events;
      stats.flagged += verdict.drift;
      stats.correct += correct;
      if (truth.cause != kClean) {
        ++stats.drifted_events;
        stats.drifted_correct += correct;
      }
    }

    // Window boundary: the strategy acts on what this and earlier windows saw.
    buffer.erase(std::remove_if(buffer.begin(), buffer.end(),
                                [&](const BufferedSample& s) {
                                  return s.consumed || s.window <= w - config.sample_retention_windows;
                                }),
                 buffer.end());
    const std::string tag = "w" + std::to_string(w);
    if (strategy == Strategy::adapt_all) {
      std::vector<toy::Features> batch;
      for (auto& s : buffer) {
        if (s.window == w) batch.push_back(s.x);
      }
      if (static_cast<int>(batch.size()) >= config.adaptation.batch_size) {
        adapt_all_model = run_adaptation(adapt_all_model, batch, config).model;
        adapt_all_model.parent_version = adapt_all_model.version_id;
        adapt_all_model.version_id = tag + "-all";
        stats.adapted.push_back("*");
      } else {
        stats.deferred.push_back("* (" + std::to_string(batch.size()) + " samples)");
      }
      for (auto& s : buffer) s.consumed = s.consumed || s.window == w;
    } else if (strategy == Strategy::by_cause) {
      const auto window = log.window(stats.start, stats.end);
      const auto analysis = rca::analyze(window, config.thresholds, config.analysis, tag);
      // Overlapping causes may train on the same samples; a sample is spent
      // only once the window's adaptations are done.
      std::vector<BufferedSample*> spent;
      for (std::size_t i = 0; i < analysis.causes.size(); ++i) {
        const auto& cause = analysis.causes[i];
        stats.causes.push_back(cause.itemset.to_string());
        std::vector<BufferedSample*> matched;
        for (auto& s : buffer) {
          if (!s.consumed && cause.itemset.matches(s.attributes)) matched.push_back(&s);
        }
        if (static_cast<int>(matched.size()) < config.adaptation.batch_size) {
          stats.deferred.push_back(cause.itemset.to_string() + " (" + std::to_string(matched.size()) + " samples)");
          continue;
        }
        std::vector<toy::Features> batch;
        for (auto* s : matched) batch.push_back(s->x);
        spent.insert(spent.end(), matched.begin(), matched.end());
        const auto* existing = pool.find(cause.itemset);
        const toy::ToyClassifier& start = existing ? *existing->model : base;
        auto adapted = run_adaptation(start, batch, config).model;
        adapted.parent_version = start.version_id;
        adapted.version_id = tag + "-c" + std::to_string(i);
        adapted.cause = cause.itemset;
        auto shared = std::make_shared<const toy::ToyClassifier>(std::move(adapted));
        pool.insert({shared->version_id, cause.itemset, shared, stats.end, stats.end, cause.metrics.risk_ratio});
        stats.adapted.push_back(cause.itemset.to_string());
        for (const auto& item : cause.itemset.items()) {
          if (item.attribute == "weather") latest[item.value] = {shared->version_id, shared};
        }
      }
      for (auto* s : spent) s->consumed = true;
      if (config.adapt_clean) {
        std::vector<toy::Features> batch;
        for (auto& s : buffer) {
          if (s.consumed || s.window != w) continue;
          const bool explained = std::any_of(analysis.causes.begin(), analysis.causes.end(),
                                             [&](const rca::RootCause& c) { return c.itemset.matches(s.attributes); });
          if (!explained) batch.push_back(s.x);
        }
        if (static_cast<int>(batch.size()) >= config.adaptation.batch_size) {
          const auto& clean = *pool.clean().model;
          auto adapted = run_adaptation(clean, batch, config).model;
          adapted.parent_version = clean.version_id;
          adapted.version_id = tag + "-clean";
          auto shared = std::make_shared<const toy::ToyClassifier>(std::move(adapted));
          pool.insert({shared->version_id, {}, shared, stats.end, stats.end, 0.0});
          stats.adapted.push_back("{}");
        }
      }
    }

    cum_correct += stats.correct;
    cum_events += stats.events;
    report.cumulative_accuracy.push_back(nan_if_empty(cum_correct, cum_events));
    report.events += stats.events;
    report.drifted_events += stats.drifted_events;
    report.windows.push_back(std::move(stats));
  }

  std::size_t correct = 0, drifted_correct = 0;
  for (const auto& w : report.windows) {
    correct += w.correct;
    drifted_correct += w.drifted_correct;
  }
  report.accuracy = nan_if_empty(correct, report.events);
  report.drifted_accuracy = nan_if_empty(drifted_correct, report.drifted_events);

  if (strategy == Strategy::by_cause) {
    // Fresh evaluation inputs per cause, independent of the stream.
    std::mt19937_64 rng(mix_seed(config.seed, 0xde7));
    std::vector<toy::Features> clean_xs;
    for (int i = 0; i < config.evaluation_samples; ++i) {
      clean_xs.push_back(toy::draw_features(prepared.task, i % prepared.task.classes, rng));
    }
    const double clean_rate = detection_rate(base, clean_xs, config.msp_threshold);
    for (const auto& cause : config.causes) {
      const auto spec = spec_for(cause, config, prepared.task);
      std::vector<toy::Features> xs;
      for (std::size_t i = 0; i < clean_xs.size(); ++i) {
        xs.push_back(toy::corrupt(clean_xs[i], spec, mix_seed(config.seed, 0xe000 + i)));
      }
      CauseDetection d;
      d.cause = cause;
      d.clean = clean_rate;
      d.pre = detection_rate(base, xs, config.msp_threshold);
      d.post = d.pre;
      auto it = latest.find(cause);
      if (it != latest.end()) {
        d.adapted = true;
        d.version_id = it->second.first;
        d.post = detection_rate(*it->second.second, xs, config.msp_threshold);
      }
      report.detection.push_back(d);
    }
  }

  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

SimReport run(const SimConfig& config, Strategy strategy) { return run(prepare(config), strategy); }

std::vector<CauseDetection> detection_evolution(const SimConfig& config) {
  return run(config, Strategy::by_cause).detection;
}

nlohmann::json to_json(const SimReport& r) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : r.windows) {
    windows.push_back({{"index", w.index},
                       {"start", weather::format_date(w.start)},
                       {"start_ts", w.start},
                       {"end_ts", w.end},
                       {"events", w.events},
                       {"drifted_events", w.drifted_events},
                       {"flagged", w.flagged},
                       {"accuracy", number_or_null(w.accuracy())},
                       {"drifted_accuracy", number_or_null(w.drifted_accuracy())},
                       {"detection_rate", number_or_null(w.detection_rate())},
                       {"versions_deployed", w.versions_deployed},
                       {"causes", w.causes},
                       {"adapted", w.adapted},
                       {"deferred", w.deferred}});
  }
  nlohmann::json detection = nlohmann::json::array();
  for (const auto& d : r.detection) {
    detection.push_back({{"cause", d.cause},
                         {"pre", d.pre},
                         {"post", d.post},
                         {"clean", d.clean},
                         {"adapted", d.adapted},
                         {"version_id", d.version_id}});
  }
  nlohmann::json cumulative = nlohmann::json::array();
  for (double v : r.cumulative_accuracy) cumulative.push_back(number_or_null(v));
  return {{"strategy", to_string(r.strategy)},
          {"config", r.config},
          {"events", r.events},
          {"drifted_events", r.drifted_events},
          {"accuracy", number_or_null(r.accuracy)},
          {"drifted_accuracy", number_or_null(r.drifted_accuracy)},
          {"cumulative_accuracy", cumulative},
          {"windows", windows},
          {"detection", detection},
          {"wall_time_ms", r.wall_time_ms}};
}

std::string report_hash(const SimReport& r) {
  auto j = to_json(r);
  j.erase("wall_time_ms");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::string summary_table(const SimReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %-11s %7s %7s %8s %8s %8s %8s  %s\n", "window", "start", "events",
                "drifted", "acc", "acc_drift", "flagged", "versions", "causes");
  out << "strategy: " << to_string(r.strategy) << '\n' << line;
  for (const auto& w : r.windows) {
    std::string causes;
    for (const auto& c : w.causes) causes += (causes.empty() ? "" : "; ") + c;
    std::snprintf(line, sizeof line, "%-6d %-11s %7zu %7zu %8.3f %8.3f %8.3f %8zu  %s\n", w.index,
                  weather::format_date(w.start).c_str(), w.events, w.drifted_events, w.accuracy(),
                  w.drifted_accuracy(), w.detection_rate(), w.versions_deployed, causes.c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "total  %-11s %7zu %7zu %8.3f %8.3f\n", "", r.events, r.drifted_events,
                r.accuracy, r.drifted_accuracy);
  out << line;
  return out.str();
}

}  // namespace driftwatch::sim
