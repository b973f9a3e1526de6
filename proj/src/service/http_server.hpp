#pragma once

#include "session.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace avf::service {

/// HTTP + JSON control plane over an AvatarService.
///
///   GET    /assets                        library catalogue
///   GET    /layout                        geometry payload layout description
///   POST   /sessions                      201 {"id", "revision", ...}
///   GET    /sessions/{id}                 session state
///   DELETE /sessions/{id}
///   PUT    /sessions/{id}/shape           {"weights": {name: value} | [values]}
///   POST   /sessions/{id}/garments/{gid}
///   DELETE /sessions/{id}/garments/{gid}
///   POST   /sessions/{id}/motion          {"asset": id}
///   PUT    /sessions/{id}/frame           {"index": k}
///   GET    /sessions/{id}/geometry        application/octet-stream (see session.hpp)
///   GET    /sessions/{id}/layout          section table of the current geometry as JSON
///
/// Errors are JSON {"error": code, "message": text}: 404 unknown session or
/// asset, 422 invalid input (shape errors add "fields": {name: reason}),
/// 409 conflicts and unmapped bones (adds "missing": [keys]), 400 bad JSON.
/// Everything else under GET is served from the static bundle directory.
class HttpServer {
 public:
  HttpServer(AvatarService& service, std::optional<std::filesystem::path> staticDir = {});
  ~HttpServer();

  /// Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace avf::service
