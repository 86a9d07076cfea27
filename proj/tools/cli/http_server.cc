#include "cli/http_server.h"

#include <httplib.h>

namespace cfx::cli {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void ReplyError(httplib::Response& res, int status, std::string_view code,
                const std::string& message, json details = json::object()) {
  Reply(res, status,
        {{"code", code}, {"message", message}, {"details", std::move(details)}});
}

json ParseBody(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ServiceError(ErrorCode::kParse, "request body is not valid JSON",
                       {{"reason", e.what()}});
  }
}

template <typename Fn>
httplib::Server::Handler Guard(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      ReplyError(res, HttpStatus(e.code()), ErrorCodeName(e.code()), e.what(),
                 e.details());
    } catch (const Error& e) {
      ReplyError(res, HttpStatus(e.code()), ErrorCodeName(e.code()), e.what());
    } catch (const std::exception& e) {
      ReplyError(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

int HttpStatus(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse:
    case ErrorCode::kSchemaMismatch:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kNothingToExplain:
      return 409;
    case ErrorCode::kIllConditioned:
    case ErrorCode::kNonFinite:
    case ErrorCode::kDegenerateLabels:
      return 422;
    case ErrorCode::kIo:
      return 500;
  }
  return 500;
}

HttpServer::HttpServer(SessionService& service, ServerOptions options)
    : service_(service),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  Routes();
}

HttpServer::~HttpServer() { Stop(); }

void HttpServer::Routes() {
  httplib::Server& s = *server_;
  // The library default adds SO_REUSEPORT, which lets a second server share
  // a port silently; a taken port must fail Bind instead.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
               sizeof(yes));
  });
  if (!options_.cors_origin.empty()) {
    s.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                           {"Vary", "Origin"}});
    s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }

  s.Post("/sessions", Guard([this](const httplib::Request& req,
                                   httplib::Response& res) {
           const std::string id = service_.CreateSession(ParseBody(req));
           Reply(res, 201, service_.GetSession(id));
         }));

  s.Get("/sessions/:id", Guard([this](const httplib::Request& req,
                                      httplib::Response& res) {
          Reply(res, 200, service_.GetSession(req.path_params.at("id")));
        }));

  s.Put("/sessions/:id/gamma", Guard([this](const httplib::Request& req,
                                            httplib::Response& res) {
          json body = ParseBody(req);
          if (body.is_object() && body.contains("gamma") && body.size() == 1 &&
              body.at("gamma").is_object()) {
            body = body.at("gamma");
          }
          Reply(res, 200, service_.SetGamma(req.path_params.at("id"), body));
        }));

  s.Post("/sessions/:id/cfs", Guard([this](const httplib::Request& req,
                                           httplib::Response& res) {
           const json body = ParseBody(req);
           int k = service_.context().engine.k;
           Condition condition = Condition::kC2Global;
           if (body.contains("k")) {
             if (!body.at("k").is_number_integer()) {
               throw ServiceError(ErrorCode::kInvalidArgument, "k must be an integer");
             }
             k = body.at("k").get<int>();
           }
           if (body.contains("condition")) {
             if (!body.at("condition").is_string()) {
               throw ServiceError(ErrorCode::kInvalidArgument,
                                  "condition must be c1, c2 or c3");
             }
             condition = ParseCondition(body.at("condition").get<std::string>());
           } else {
             condition = ParseCondition(
                 service_.GetSession(req.path_params.at("id")).at("condition").get<std::string>());
           }
           Reply(res, 200, service_.GenerateCfs(req.path_params.at("id"), k, condition));
         }));

  s.Post("/sessions/:id/ranks", Guard([this](const httplib::Request& req,
                                             httplib::Response& res) {
           Reply(res, 200, service_.SubmitRanks(req.path_params.at("id"), ParseBody(req)));
         }));
}

bool HttpServer::Bind() {
  if (!server_->bind_to_port(options_.host, options_.port)) return false;
  port_ = options_.port;
  return true;
}

int HttpServer::BindAnyPort() {
  port_ = server_->bind_to_any_port(options_.host);
  return port_;
}

bool HttpServer::Listen() { return server_->listen_after_bind(); }

void HttpServer::Stop() {
  if (server_) server_->stop();
}

bool HttpServer::running() const { return server_->is_running(); }

}  // namespace cfx::cli
