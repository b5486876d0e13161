#include "driftwatch/monitor_http.hpp"

#include <httplib.h>

#include "driftwatch/errors.hpp"
#include "driftwatch/model_pool.hpp"
#include "driftwatch/serialization.hpp"

namespace driftwatch::monitor {

namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const char* code, const std::string& message,
          const std::string& field = "") {
  json err{{"code", code}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  reply(res, status, {{"error", err}});
}

json parse_body(const httplib::Request& req) {
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw InvalidInput("request body is not valid JSON");
  return j;
}

std::int64_t path_int(const httplib::Request& req, std::size_t i) {
  try {
    return std::stoll(req.matches[i].str());
  } catch (const std::exception&) {
    throw InvalidInput("path parameter is not an integer");
  }
}

std::int64_t body_window(const json& body) {
  if (!body.is_object() || !body.contains("window") || !body["window"].is_number_integer()) {
    throw SchemaError("window", "field 'window' must be an integer");
  }
  return body["window"].get<std::int64_t>();
}

// Every handler runs through here so library errors get one mapping.
httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const SchemaError& e) {
      fail(res, 400, "schema_error", e.what(), e.field());
    } catch (const InvalidInput& e) {
      fail(res, 400, "invalid_input", e.what());
    } catch (const ConfigError& e) {
      fail(res, 400, "invalid_input", e.what());
    } catch (const NotFound& e) {
      fail(res, 404, "not_found", e.what());
    } catch (const Conflict& e) {
      fail(res, 409, "conflict", e.what());
    } catch (const json::exception& e) {
      fail(res, 400, "invalid_input", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    }
  };
}

json window_json(const WindowStatus& w, const Monitor& m) {
  return {{"window", w.window},
          {"start", m.window_start(w.window)},
          {"end", m.window_start(w.window + 1)},
          {"closed", w.closed},
          {"analyzed", w.analyzed},
          {"entries", w.entries},
          {"samples", w.samples}};
}

json pool_json(const Monitor& m) {
  auto j = pool::to_json(*m.pool());
  j["generation"] = m.pool_generation();
  return j;
}

void routes(httplib::Server& s, Monitor& m) {
  s.Get("/v1/health", guarded([&](const httplib::Request&, httplib::Response& res) {
          reply(res, 200, {{"status", "ok"}, {"mode", to_string(m.mode())}, {"entries", m.log().size()}});
        }));

  s.Post("/v1/entries", guarded([&](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           const json items = body.is_array() ? body : json::array({body});
           // Shape-check the whole batch before touching the log.
           std::vector<DriftLogEntry> entries;
           for (const auto& item : items) entries.push_back(item.get<DriftLogEntry>());
           json ids = json::array();
           for (auto& e : entries) ids.push_back(m.ingest_entry(std::move(e)));
           reply(res, 201, {{"accepted", ids.size()}, {"ids", ids}});
         }));

  s.Post("/v1/samples", guarded([&](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           const json items = body.is_array() ? body : json::array({body});
           json buffered = json::array();
           for (const auto& item : items) {
             if (!item.is_object()) throw SchemaError("", "sample must be a JSON object");
             if (!item.contains("device_id") || !item["device_id"].is_string()) {
               throw SchemaError("device_id", "field 'device_id' must be a string");
             }
             if (!item.contains("ts") || !item["ts"].is_number_integer()) {
               throw SchemaError("ts", "field 'ts' must be an integer");
             }
             if (!item.contains("x") || !item["x"].is_array()) throw SchemaError("x", "field 'x' must be an array");
             AttributeMap attrs;
             if (item.contains("attributes")) attrs = item["attributes"].get<AttributeMap>();
             buffered.push_back(m.ingest_sample(item["device_id"], item["ts"], item["x"].get<toy::Features>(),
                                                std::move(attrs)));
           }
           reply(res, 201, {{"accepted", buffered.size()}, {"buffered", buffered}});
         }));

  s.Get("/v1/windows", guarded([&](const httplib::Request&, httplib::Response& res) {
          json out = json::array();
          for (const auto& w : m.windows()) out.push_back(window_json(w, m));
          reply(res, 200, {{"windows", out}});
        }));

  s.Post(R"(/v1/windows/(-?\d+)/close)", guarded([&](const httplib::Request& req, httplib::Response& res) {
           const auto w = path_int(req, 1);
           const auto report = m.close_window(w);
           reply(res, 200,
                 {{"window", w},
                  {"closed", true},
                  {"report", report ? Monitor::report_json(*report, w) : json(nullptr)}});
         }));

  s.Post("/v1/analysis", guarded([&](const httplib::Request& req, httplib::Response& res) {
           const auto w = body_window(parse_body(req));
           reply(res, 200, Monitor::report_json(m.run_analysis(w), w));
         }));

  s.Post("/v1/adaptation", guarded([&](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           const auto w = body_window(body);
           std::vector<std::string> causes;
           if (body.contains("causes")) {
             if (!body["causes"].is_array()) throw SchemaError("causes", "field 'causes' must be an array of ids");
             causes = body["causes"].get<std::vector<std::string>>();
           }
           json outcomes = json::array();
           for (const auto& o : m.adapt(w, causes)) outcomes.push_back(to_json(o));
           reply(res, 200, {{"window", w}, {"outcomes", outcomes}, {"pool_generation", m.pool_generation()}});
         }));

  s.Get("/v1/alerts", guarded([&](const httplib::Request& req, httplib::Response& res) {
          std::optional<AlertState> state;
          if (req.has_param("state")) {
            const auto s = req.get_param_value("state");
            if (s == "open") state = AlertState::open;
            else if (s == "acknowledged") state = AlertState::acknowledged;
            else if (s == "adapted") state = AlertState::adapted;
            else throw InvalidInput("state must be open, acknowledged or adapted");
          }
          json out = json::array();
          for (const auto& a : m.alerts(state)) out.push_back(to_json(a));
          reply(res, 200, {{"alerts", out}});
        }));

  s.Post(R"(/v1/alerts/([^/]+)/ack)", guarded([&](const httplib::Request& req, httplib::Response& res) {
           reply(res, 200, to_json(m.acknowledge(req.matches[1].str())));
         }));

  s.Get(R"(/v1/reports/(-?\d+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
          const auto w = path_int(req, 1);
          const auto r = m.report(w);
          if (!r) throw NotFound("window " + std::to_string(w) + " has no report");
          reply(res, 200, Monitor::report_json(*r, w));
        }));

  s.Get("/v1/pool", guarded([&](const httplib::Request&, httplib::Response& res) { reply(res, 200, pool_json(m)); }));

  s.Get("/v1/mode", guarded([&](const httplib::Request&, httplib::Response& res) {
          reply(res, 200, {{"mode", to_string(m.mode())}});
        }));

  s.Put("/v1/mode", guarded([&](const httplib::Request& req, httplib::Response& res) {
          const auto body = parse_body(req);
          if (!body.is_object() || !body.contains("mode") || !body["mode"].is_string()) {
            throw SchemaError("mode", "field 'mode' must be a string");
          }
          m.set_mode(mode_from_string(body["mode"]));
          reply(res, 200, {{"mode", to_string(m.mode())}});
        }));

  s.Get("/v1/timeline", guarded([&](const httplib::Request& req, httplib::Response& res) {
          reply(res, 200, m.timeline(req.has_param("metric") ? req.get_param_value("metric") : "drift_rate"));
        }));
}

}  // namespace

MonitorServer::MonitorServer(Monitor& monitor) : monitor_(monitor), server_(std::make_unique<httplib::Server>()) {
  routes(*server_, monitor_);
}

MonitorServer::~MonitorServer() { stop(); }

int MonitorServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void MonitorServer::listen() { server_->listen_after_bind(); }

void MonitorServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MonitorServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace driftwatch::monitor
