#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hitlor/service.hpp"

namespace hitlor {

inline std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

// Registers the JSON API routes of `service` on `server`.
inline void bind_routes(httplib::Server& server, SessionService& service) {
  const auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  const auto parse_body = [](const httplib::Request& req) -> std::optional<nlohmann::json> {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  };
  const auto malformed = [reply](httplib::Response& res) {
    reply(res, {400, error_body("malformed_json", "request body is not valid JSON")});
  };

  server.Post("/api/sessions", [&service, reply, parse_body, malformed](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body) return malformed(res);
    reply(res, service.create_session(*body));
  });
  server.Get(R"(/api/sessions/([^/]+))", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.get_session(req.matches[1]));
  });
  server.Get(R"(/api/sessions/([^/]+)/batch)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.get_batch(req.matches[1]));
  });
  server.Post(R"(/api/sessions/([^/]+)/feedback)",
              [&service, reply, parse_body, malformed](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                if (!body) return malformed(res);
                reply(res, service.submit_feedback(req.matches[1], *body));
              });
  server.Get(R"(/api/sessions/([^/]+)/ranking)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    std::optional<long long> limit;
    if (req.has_param("limit")) {
      const auto text = req.get_param_value("limit");
      char* end = nullptr;
      errno = 0;
      const long long v = std::strtoll(text.c_str(), &end, 10);
      if (text.empty() || *end != '\0' || errno != 0) {
        return reply(res, {400, error_body("invalid_request", "limit must be an integer", "limit")});
      }
      limit = v;
    }
    reply(res, service.get_ranking(req.matches[1], limit));
  });
  server.Post(R"(/api/sessions/([^/]+)/stop)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.stop(req.matches[1]));
  });
  server.Get("/api/datasets", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.datasets());
  });
  server.Get(R"(/api/images/([^/]+)/file)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto path = service.image_file(req.matches[1]);
      std::ifstream in(path, std::ios::binary);
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      res.status = 200;
      res.set_content(std::move(bytes), content_type_for(path));
    } catch (const ApiError& e) {
      reply(res, {e.status(), error_body(e.code(), e.what(), e.field())});
    }
  });
  server.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "unhandled error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    reply(res, {500, error_body("internal", message)});
  });
  server.set_error_handler([reply](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) reply(res, {404, error_body("not_found", "no such endpoint")});
  });
}

}  // namespace hitlor
