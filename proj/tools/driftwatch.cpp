#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "driftwatch/drift_log.hpp"
#include "driftwatch/errors.hpp"
#include "driftwatch/fleet_sim.hpp"
#include "driftwatch/monitor.hpp"
#include "driftwatch/monitor_http.hpp"
#include "driftwatch/rca.hpp"
#include "driftwatch/weather.hpp"

using namespace driftwatch;

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

monitor::MonitorServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift monitoring, root cause analysis and by-cause adaptation for a simulated fleet"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Replay the fleet simulation under one strategy");
  std::string sim_config, strategy = "by-cause", sim_out;
  std::optional<std::uint64_t> seed;
  simulate->add_option("--config", sim_config, "Simulation config (JSON); defaults when omitted")
      ->check(CLI::ExistingFile);
  simulate->add_option("--strategy", strategy, "no-adapt, adapt-all or by-cause")
      ->check(CLI::IsMember({"no-adapt", "adapt-all", "by-cause"}));
  simulate->add_option("--out", sim_out, "Report path (JSON)")->required();
  simulate->add_option("--seed", seed, "Override the config seed");

  auto* serve = app.add_subcommand("serve", "Run the monitor service");
  std::string serve_config;
  std::optional<int> port;
  serve->add_option("--config", serve_config, "Service config (JSON)")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Override the configured port");

  auto* analyze = app.add_subcommand("analyze", "Root cause analysis over a stored drift log");
  std::string log_path, from, to, analyze_out;
  analyze->add_option("--log", log_path, "Drift log (NDJSON)")->required()->check(CLI::ExistingFile);
  analyze->add_option("--from", from, "First day, YYYY-MM-DD (default: first entry)");
  analyze->add_option("--to", to, "Day after the last, YYYY-MM-DD (default: after last entry)");
  analyze->add_option("--out", analyze_out, "Report path; stdout when omitted");

  auto* weather_cmd = app.add_subcommand("weather", "Generate a weather schedule CSV");
  std::string weather_out, weather_start = "2020-01-01";
  int weather_days = 366;
  std::uint64_t weather_seed = 2020;
  double drifted = 0.3;
  std::vector<std::string> locations = monitor::MonitorConfig{}.weather_locations;
  weather_cmd->add_option("--out", weather_out, "CSV path")->required();
  weather_cmd->add_option("--start", weather_start, "First day");
  weather_cmd->add_option("--days", weather_days, "Number of days")->check(CLI::PositiveNumber);
  weather_cmd->add_option("--seed", weather_seed, "Generator seed");
  weather_cmd->add_option("--drifted-fraction", drifted, "Share of non-clear days")->check(CLI::Range(0.0, 0.95));
  weather_cmd->add_option("--locations", locations, "Location names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      auto config = sim_config.empty() ? sim::SimConfig::defaults() : sim::SimConfig::load(sim_config);
      if (seed) config.seed = *seed;
      const auto report = sim::run(config, sim::strategy_from_string(strategy));
      auto j = sim::to_json(report);
      j["hash"] = sim::report_hash(report);
      write_json(sim_out, j);
      std::cout << sim::summary_table(report) << "report hash " << j["hash"].get<std::string>() << '\n';
    } else if (*serve) {
      auto config = serve_config.empty() ? monitor::MonitorConfig{} : monitor::MonitorConfig::load(serve_config);
      if (port) config.port = *port;
      monitor::Monitor m(config);
      monitor::MonitorServer server(m);
      const int bound = server.bind(config.host, config.port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << config.host << ":" << bound << " (" << monitor::to_string(m.mode())
                << ")\n";
      server.listen();
      g_server = nullptr;
    } else if (*analyze) {
      const auto log = DriftLog::open(log_path);
      const auto entries = log->entries();
      if (entries.empty()) throw InvalidInput("drift log is empty");
      std::int64_t lo = entries.front().timestamp, hi = lo;
      for (const auto& e : entries) {
        lo = std::min(lo, e.timestamp);
        hi = std::max(hi, e.timestamp);
      }
      const auto start = from.empty() ? lo : weather::parse_date(from);
      const auto end = to.empty() ? hi + 1 : weather::parse_date(to);
      const auto report = rca::analyze(log->window(start, end), rca::Thresholds{}, rca::AnalysisOptions{});
      const auto j = rca::to_json(report);
      if (analyze_out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        write_json(analyze_out, j);
        for (const auto& c : report.causes) std::cout << c.itemset.to_string() << '\n';
      }
    } else if (*weather_cmd) {
      const auto s = weather::WeatherSchedule::generate(locations, weather::parse_date(weather_start), weather_days,
                                                        weather_seed, drifted);
      if (std::filesystem::path(weather_out).has_parent_path()) {
        std::filesystem::create_directories(std::filesystem::path(weather_out).parent_path());
      }
      s.save_csv(weather_out);
      std::cout << "wrote " << weather_out << " (drifted share " << s.drifted_fraction() << ")\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
