#include "driftwatch/weather.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "driftwatch/errors.hpp"
#include "driftwatch/hash.hpp"

namespace driftwatch::weather {

namespace {

// Probability that a drifted spell continues into the next day.
constexpr double kPersistence = 0.5;

struct MonthMix {
  double snow, rain, fog;
};

MonthMix mix_for_month(unsigned month) {
  switch (month) {
    case 1:
    case 2:
    case 12:
      return {0.5, 0.2, 0.3};
    case 3:
      return {0.3, 0.4, 0.3};
    default:
      return {0.1, 0.6, 0.3};
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  return out;
}

}  // namespace

std::int64_t parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw ConfigError("bad date '" + text + "', expected YYYY-MM-DD");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw ConfigError("invalid calendar date '" + text + "'");
  return std::chrono::sys_seconds{std::chrono::sys_days{ymd}}.time_since_epoch().count();
}

std::string format_date(std::int64_t epoch_seconds) {
  const auto days = std::chrono::floor<std::chrono::days>(std::chrono::sys_seconds{std::chrono::seconds{epoch_seconds}});
  const std::chrono::year_month_day ymd{days};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

WeatherSchedule::WeatherSchedule(std::int64_t start, int days) : start_(start), days_(days) {
  if (days < 1) throw ConfigError("schedule needs at least one day");
}

WeatherSchedule WeatherSchedule::generate(const std::vector<std::string>& locations,
                                          std::int64_t start, int days, std::uint64_t seed,
                                          double drifted_fraction) {
  if (!(drifted_fraction >= 0.0 && drifted_fraction < 1.0)) {
    throw ConfigError("drifted fraction must lie in [0, 1)");
  }
  WeatherSchedule s(start, days);
  // Stationary drifted share of the chain is q / (1 - c + c q); solve for q.
  const double p = drifted_fraction;
  const double q = p * (1.0 - kPersistence) / (1.0 - p * kPersistence);
  for (const auto& loc : locations) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a(loc)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::string previous = kClear;
    for (int day = 0; day < days; ++day) {
      std::string label;
      if (previous != kClear && u(rng) < kPersistence) {
        label = previous;
      } else if (u(rng) < q) {
        const auto ymd = std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(
            std::chrono::sys_seconds{std::chrono::seconds{start + day * kSecondsPerDay}})};
        const auto mix = mix_for_month(static_cast<unsigned>(ymd.month()));
        const double r = u(rng) * (mix.snow + mix.rain + mix.fog);
        label = r < mix.snow ? "snow" : (r < mix.snow + mix.rain ? "rain" : "fog");
      } else {
        label = kClear;
      }
      s.set(loc, day, label);
      previous = label;
    }
  }
  return s;
}

WeatherSchedule WeatherSchedule::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read weather schedule " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"date", "location", "weather"}) {
    throw ConfigError("weather schedule " + path.string() + " must start with 'date,location,weather'");
  }
  struct Row {
    std::int64_t day;
    std::string location, label;
  };
  std::vector<Row> rows;
  std::int64_t first = INT64_MAX, last = INT64_MIN;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 3 || f[1].empty() || f[2].empty()) {
      throw ConfigError("malformed weather row at line " + std::to_string(lineno));
    }
    const auto t = parse_date(f[0]);
    first = std::min(first, t);
    last = std::max(last, t);
    rows.push_back({t, f[1], f[2]});
  }
  if (rows.empty()) throw ConfigError("weather schedule " + path.string() + " has no rows");
  WeatherSchedule s(first, static_cast<int>((last - first) / kSecondsPerDay) + 1);
  for (auto& r : rows) s.set(r.location, static_cast<int>((r.day - first) / kSecondsPerDay), std::move(r.label));
  return s;
}

void WeatherSchedule::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write weather schedule " + path.string());
  out << "date,location,weather\n";
  for (int day = 0; day < days_; ++day) {
    const auto date = format_date(start_ + day * kSecondsPerDay);
    for (const auto& [loc, labels] : labels_) {
      if (!labels[day].empty()) out << date << ',' << loc << ',' << labels[day] << '\n';
    }
  }
}

void WeatherSchedule::set(const std::string& location, int day, std::string label) {
  if (day < 0 || day >= days_) throw InvalidInput("day outside the schedule");
  auto& v = labels_[location];
  v.resize(days_);
  v[day] = std::move(label);
}

std::optional<std::string> WeatherSchedule::at(const std::string& location, std::int64_t timestamp) const {
  auto it = labels_.find(location);
  if (it == labels_.end() || timestamp < start_) return std::nullopt;
  const auto day = (timestamp - start_) / kSecondsPerDay;
  if (day >= days_ || it->second[day].empty()) return std::nullopt;
  return it->second[day];
}

const std::string& WeatherSchedule::on_day(const std::string& location, int day) const {
  auto it = labels_.find(location);
  if (it == labels_.end() || day < 0 || day >= days_ || it->second[day].empty()) {
    throw ConfigError("no weather for " + location + " on day " + std::to_string(day));
  }
  return it->second[day];
}

void WeatherSchedule::require_coverage(const std::vector<std::string>& locations) const {
  for (const auto& loc : locations) {
    for (int day = 0; day < days_; ++day) on_day(loc, day);
  }
}

double WeatherSchedule::drifted_fraction() const {
  std::size_t total = 0, drifted = 0;
  for (const auto& [loc, labels] : labels_) {
    for (const auto& l : labels) {
      if (l.empty()) continue;
      ++total;
      drifted += l != kClear;
    }
  }
  return total ? static_cast<double>(drifted) / static_cast<double>(total) : 0.0;
}

std::vector<std::string> WeatherSchedule::locations() const {
  std::vector<std::string> out;
  for (const auto& [loc, labels] : labels_) out.push_back(loc);
  return out;
}

std::string ScheduleProvider::lookup(const std::string& location, std::int64_t timestamp) const {
  return schedule_.at(location, timestamp).value_or(kUnknown);
}

}  // namespace driftwatch::weather
