#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "fewshot/service/service.hpp"

namespace fewshot::service {

inline int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownSession: return 404;
    case Errc::OutOfOrder: return 409;
    case Errc::CapacityExceeded: return 503;
    case Errc::BadRequest:
    case Errc::Format:
    case Errc::UnknownWord:
    case Errc::MalformedInstruction:
      return 400;
    default: return 500;
  }
}

inline constexpr std::string_view kFallbackPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>fewshot</title></head>
<body>
<h1>fewshot experiment service</h1>
<p>No UI bundle is configured (set <code>static_dir</code>). The JSON API is available:</p>
<ul>
<li>POST /api/session {"kind": "exp1"}</li>
<li>GET /api/session/{id}/next</li>
<li>POST /api/session/{id}/response {"item_id": ..., "symbols": [...]}</li>
<li>POST /api/session/{id}/survey {"external_aid": false}</li>
<li>GET /api/export?kind=exp1</li>
</ul>
</body></html>
)";

/// Registers the API and UI routes on server. service must outlive it.
inline void install_routes(httplib::Server& server, SessionService& service) {
  auto reply = [](httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [reply](auto&& fn) {
    return [fn, reply](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        reply(res, error_json(e.code(), e.what()), http_status(e.code()));
      } catch (const nlohmann::json::exception& e) {
        reply(res, error_json(Errc::BadRequest, e.what()), 400);
      }
    };
  };
  auto body_json = [](const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(Errc::BadRequest, "request body must be a JSON object");
    return j;
  };

  server.Post("/api/session", guarded([&service, reply, body_json](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_json(req);
    std::optional<std::string> kind;
    if (body.contains("kind")) kind = body.at("kind").get<std::string>();
    reply(res, service.create_session(kind), 201);
  }));

  server.Get(R"(/api/session/([^/]+)/next)", guarded([&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.next_item(req.matches[1]));
  }));

  server.Post(R"(/api/session/([^/]+)/response)",
              guarded([&service, reply, body_json](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_json(req);
                reply(res, service.submit_response(req.matches[1], body.at("item_id").get<std::string>(),
                                                   body.at("symbols").get<std::vector<std::string>>()));
              }));

  server.Post(R"(/api/session/([^/]+)/survey)",
              guarded([&service, reply, body_json](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_json(req);
                reply(res, service.submit_survey(req.matches[1], body.at("external_aid").get<bool>()));
              }));

  server.Get("/api/export", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    std::optional<ExperimentKind> kind;
    if (req.has_param("kind")) kind = SessionService::parse_kind(req.get_param_value("kind"));
    const bool complete = req.has_param("complete") && req.get_param_value("complete") != "0";
    res.set_content(service.export_sessions(kind, complete), "application/x-ndjson");
  }));

  const std::string static_dir = service.config().static_dir;
  server.Get("/", [static_dir](const httplib::Request&, httplib::Response& res) {
    if (!static_dir.empty()) {
      std::ifstream in(std::filesystem::path(static_dir) / "index.html", std::ios::binary);
      if (in) {
        std::stringstream buf;
        buf << in.rdbuf();
        res.set_content(buf.str(), "text/html; charset=utf-8");
        return;
      }
    }
    res.set_content(std::string(kFallbackPage), "text/html; charset=utf-8");
  });
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) server.set_mount_point("/static", static_dir);
}

/// Serves until the process is stopped.
inline void serve(SessionService& service) {
  httplib::Server server;
  install_routes(server, service);
  const auto& cfg = service.config();
  if (!server.listen(cfg.host, cfg.port))
    throw Error(Errc::Io, "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
}

}  // namespace fewshot::service
