#pragma once

// Per-location daily weather labels and the lookup used to enrich log entries.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace driftwatch::weather {

inline constexpr const char* kClear = "clear-day";
inline constexpr const char* kUnknown = "unknown";
inline constexpr std::int64_t kSecondsPerDay = 86400;

// "2020-01-01" -> seconds since the epoch at 00:00 UTC. Throws ConfigError.
std::int64_t parse_date(const std::string& text);
std::string format_date(std::int64_t epoch_seconds);

class WeatherSchedule {
 public:
  WeatherSchedule() = default;
  WeatherSchedule(std::int64_t start, int days);

  // Seasonal Markov chain per location: drifted spells persist, snow is more
  // likely early in the year, rain later. About `drifted_fraction` of days get
  // rain, snow or fog.
  static WeatherSchedule generate(const std::vector<std::string>& locations, std::int64_t start,
                                  int days, std::uint64_t seed, double drifted_fraction = 0.3);
  // CSV with header "date,location,weather". Throws ConfigError on malformed rows.
  static WeatherSchedule load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;

  void set(const std::string& location, int day, std::string label);
  // Label for the day containing `timestamp`, or nullopt when not covered.
  std::optional<std::string> at(const std::string& location, std::int64_t timestamp) const;
  const std::string& on_day(const std::string& location, int day) const;

  // Throws ConfigError unless every (location, day) pair has a label.
  void require_coverage(const std::vector<std::string>& locations) const;
  double drifted_fraction() const;

  std::int64_t start() const noexcept { return start_; }
  int days() const noexcept { return days_; }
  std::vector<std::string> locations() const;

 private:
  std::int64_t start_ = 0;
  int days_ = 0;
  std::map<std::string, std::vector<std::string>> labels_;
};

// Enrichment hook for ingestion. The default looks labels up in a schedule.
class WeatherProvider {
 public:
  virtual ~WeatherProvider() = default;
  // Returns kUnknown when the location or day is not known.
  virtual std::string lookup(const std::string& location, std::int64_t timestamp) const = 0;
};

class ScheduleProvider : public WeatherProvider {
 public:
  explicit ScheduleProvider(WeatherSchedule schedule) : schedule_(std::move(schedule)) {}
  std::string lookup(const std::string& location, std::int64_t timestamp) const override;

 private:
  WeatherSchedule schedule_;
};

}  // namespace driftwatch::weather
