#pragma once

#include <memory>
#include <string>

#include "cfx/session.h"

namespace httplib {
class Server;
}

namespace cfx::cli {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  // Empty: no CORS headers are sent.
  std::string cors_origin;
};

// JSON-over-HTTP front end for a SessionService:
//   POST /sessions                create a session
//   GET  /sessions/{id}           session state
//   PUT  /sessions/{id}/gamma     merge perturbation difficulties
//   POST /sessions/{id}/cfs       generate counterfactuals
//   POST /sessions/{id}/ranks     submit a ranking of the shown list
// Errors are returned as {code, message, details}.
class HttpServer {
 public:
  HttpServer(SessionService& service, ServerOptions options);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // False if the address is unavailable (e.g. port in use).
  bool Bind();
  // Binds to a free port and returns it; -1 on failure.
  int BindAnyPort();
  // Blocks until Stop().
  bool Listen();
  void Stop();
  bool running() const;
  int port() const { return port_; }

 private:
  void Routes();

  SessionService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = -1;
};

// HTTP status for a library error code.
int HttpStatus(ErrorCode code);

}  // namespace cfx::cli
