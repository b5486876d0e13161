#pragma once

// JSON-over-HTTP front end for a Monitor. Routes and payloads are listed in
// docs/api.md. Errors map to 400 (bad input, with the offending field when
// known), 404 (unknown window, cause or alert) and 409 (state conflicts).

#include <memory>
#include <string>
#include <thread>

#include "driftwatch/monitor.hpp"

namespace httplib {
class Server;
}

namespace driftwatch::monitor {

class MonitorServer {
 public:
  explicit MonitorServer(Monitor& monitor);
  ~MonitorServer();

  MonitorServer(const MonitorServer&) = delete;
  MonitorServer& operator=(const MonitorServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen();
  // Serves on a background thread.
  void start();
  void stop();

 private:
  Monitor& monitor_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace driftwatch::monitor
