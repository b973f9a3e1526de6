#include "http_server.hpp"

#include "error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace avf::service {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

const char* kFallbackIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>avatar-forge</title></head>
<body><h1>avatar-forge</h1>
<p>No studio bundle is installed. Start the server with <code>--web &lt;dir&gt;</code>
to serve one. The API is available under <code>/assets</code>, <code>/layout</code> and
<code>/sessions</code>.</p></body></html>
)";

int statusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::UnmappedBone:
    case ErrorCode::Conflict:
      return 409;
    case ErrorCode::InvalidArgument:
    case ErrorCode::Dimension:
    case ErrorCode::Index:
    case ErrorCode::Degenerate:
    case ErrorCode::Geometry:
      return 422;
    default:
      return 500;
  }
}

void sendJson(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void sendError(httplib::Response& res, const std::exception& e) {
  if (const auto* w = dynamic_cast<const InvalidWeightsError*>(&e)) {
    sendJson(res, {{"error", "invalid-weights"}, {"message", w->what()}, {"fields", w->fields()}},
             422);
  } else if (const auto* u = dynamic_cast<const retarget::UnmappedBonesError*>(&e)) {
    sendJson(res,
             {{"error", errorCodeName(u->code())}, {"message", u->what()}, {"missing", u->missing()}},
             409);
  } else if (const auto* err = dynamic_cast<const Error*>(&e)) {
    sendJson(res, {{"error", errorCodeName(err->code())}, {"message", err->what()}},
             statusFor(err->code()));
  } else {
    sendJson(res, {{"error", "internal"}, {"message", e.what()}}, 500);
  }
}

json parseBody(const httplib::Request& req) {
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) {
      throw Error(ErrorCode::Parse, "request body must be a JSON object");
    }
    return body;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("request body: ") + e.what());
  }
}

json layoutDescription() {
  return {{"magic", "AVGEOM\\0\\0"},
          {"version", kGeometryLayoutVersion},
          {"endianness", "little"},
          {"header",
           {{{"offset", 0}, {"name", "magic"}, {"type", "u8[8]"}},
            {{"offset", 8}, {"name", "version"}, {"type", "u32"}},
            {{"offset", 12}, {"name", "section_count"}, {"type", "u32"}},
            {{"offset", 16}, {"name", "revision"}, {"type", "u64"}},
            {{"offset", 24}, {"name", "frame"}, {"type", "i32"}, {"note", "-1 when no motion"}},
            {{"offset", 28}, {"name", "reserved"}, {"type", "u32"}}}},
          {"section_table_offset", 32},
          {"section_entry",
           {{{"offset", 0}, {"name", "kind"}, {"type", "u32"}},
            {{"offset", 4}, {"name", "count"}, {"type", "u32"}},
            {{"offset", 8}, {"name", "components"}, {"type", "u32"}},
            {{"offset", 12}, {"name", "component_type"}, {"type", "u32"}},
            {{"offset", 16}, {"name", "byte_offset"}, {"type", "u32"}},
            {{"offset", 20}, {"name", "byte_length"}, {"type", "u32"}},
            {{"offset", 24}, {"name", "name_offset"}, {"type", "u32"}},
            {{"offset", 28}, {"name", "name_length"}, {"type", "u32"}}}},
          {"section_entry_size", 32},
          {"kinds",
           {{{"value", 1}, {"name", "vertices"}, {"layout", "px py pz nx ny nz"}},
            {{"value", 2}, {"name", "triangles"}, {"layout", "a b c"}},
            {{"value", 3}, {"name", "joints"}, {"layout", "x y z"}}}},
          {"component_types", {{{"value", 0}, {"name", "f32"}}, {{"value", 1}, {"name", "u32"}}}}};
}

json sectionsJson(const GeometryPayload& payload) {
  json sections = json::array();
  for (const auto& s : payload.sections) {
    sections.push_back({{"kind", sectionKindName(s.kind)},
                        {"name", s.name},
                        {"count", s.count},
                        {"components", s.components},
                        {"component_type", s.componentType == ComponentType::Float32 ? "f32" : "u32"},
                        {"byte_offset", s.byteOffset},
                        {"byte_length", s.byteLength}});
  }
  return {{"version", kGeometryLayoutVersion},
          {"revision", payload.revision},
          {"frame", payload.frame},
          {"bytes", payload.bytes.size()},
          {"sections", sections}};
}

json stateJson(const std::string& id, const SessionState& s, const assets::BodyAsset& body) {
  json attributes = json::array();
  const auto& basis = body.basis;
  for (std::size_t a = 0; a < basis.attributeNames.size(); ++a) {
    attributes.push_back({{"name", basis.attributeNames[a]},
                          {"min", basis.weightBounds[a].min},
                          {"max", basis.weightBounds[a].max},
                          {"value", s.weights.values()[a]}});
  }
  json joints = json::array();
  for (std::size_t j = 0; j < body.skeleton.size(); ++j) {
    joints.push_back(body.skeleton.joint(j).name);
  }
  json motion = nullptr;
  if (s.clip) {
    motion = {{"asset", *s.motion},
              {"frames", s.clip->poses.size()},
              {"frame_time", s.clip->frameTime},
              {"warnings", s.motionWarnings}};
  }
  return {{"id", id},
          {"revision", s.revision},
          {"body", body.id},
          {"attributes", attributes},
          {"joints", joints},
          {"garments", s.garments},
          {"motion", motion},
          {"frame", s.frame}};
}

} // namespace

struct HttpServer::Impl {
  AvatarService& service;
  httplib::Server server;
  std::atomic<bool> runEntered{false};
  std::atomic<bool> runExited{false};
  std::atomic<bool> stopRequested{false};

  explicit Impl(AvatarService& s) : service(s) {}

  // Runs `f`, turning exceptions into JSON error responses.
  template <typename F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      try {
        f(req, res);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Parse) {
          sendJson(res, {{"error", "parse"}, {"message", e.what()}}, 400);
        } else {
          sendError(res, e);
        }
      } catch (const std::exception& e) {
        sendError(res, e);
      }
    };
  }

  void routes() {
    server.Get("/assets", wrap([this](const httplib::Request&, httplib::Response& res) {
      res.set_content(assets::libraryToJson(service.library()), kJson);
    }));
    server.Get("/layout", wrap([](const httplib::Request&, httplib::Response& res) {
      sendJson(res, layoutDescription());
    }));
    server.Post("/sessions", wrap([this](const httplib::Request&, httplib::Response& res) {
      const std::string id = service.createSession();
      sendJson(res, stateJson(id, *service.state(id), service.body()), 201);
    }));
    server.Get(R"(/sessions/([0-9a-zA-Z]+))",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 sendJson(res, stateJson(id, *service.state(id), service.body()));
               }));
    server.Delete(R"(/sessions/([0-9a-zA-Z]+))",
                  wrap([this](const httplib::Request& req, httplib::Response& res) {
                    service.deleteSession(req.matches[1]);
                    res.status = 204;
                  }));
    server.Put(R"(/sessions/([0-9a-zA-Z]+)/shape)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 shape(req, res);
               }));
    server.Post(R"(/sessions/([0-9a-zA-Z]+)/garments/([^/]+))",
                wrap([this](const httplib::Request& req, httplib::Response& res) {
                  const auto revision = service.attachGarment(req.matches[1], req.matches[2]);
                  sendJson(res, {{"revision", revision},
                                 {"garments", service.state(req.matches[1])->garments}});
                }));
    server.Delete(R"(/sessions/([0-9a-zA-Z]+)/garments/([^/]+))",
                  wrap([this](const httplib::Request& req, httplib::Response& res) {
                    const auto revision = service.detachGarment(req.matches[1], req.matches[2]);
                    sendJson(res, {{"revision", revision},
                                   {"garments", service.state(req.matches[1])->garments}});
                  }));
    server.Post(R"(/sessions/([0-9a-zA-Z]+)/motion)",
                wrap([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parseBody(req);
                  if (!body.contains("asset") || !body["asset"].is_string()) {
                    throw Error(ErrorCode::InvalidArgument, "expected {\"asset\": id}");
                  }
                  const auto info = service.setMotion(req.matches[1], body["asset"]);
                  sendJson(res, {{"revision", info.revision},
                                 {"frames", info.frames},
                                 {"frame_time", info.frameTime},
                                 {"warnings", info.warnings}});
                }));
    server.Put(R"(/sessions/([0-9a-zA-Z]+)/frame)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const json body = parseBody(req);
                 if (!body.contains("index") || !body["index"].is_number_unsigned()) {
                   throw Error(ErrorCode::InvalidArgument,
                               "expected {\"index\": non-negative integer}");
                 }
                 const auto revision =
                     service.setFrame(req.matches[1], body["index"].get<std::size_t>());
                 sendJson(res, {{"revision", revision}, {"frame", body["index"]}});
               }));
    server.Get(R"(/sessions/([0-9a-zA-Z]+)/geometry)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const auto payload = service.geometry(req.matches[1]);
                 res.set_header("X-Avf-Revision", std::to_string(payload.revision));
                 res.set_content(reinterpret_cast<const char*>(payload.bytes.data()),
                                 payload.bytes.size(), "application/octet-stream");
               }));
    server.Get(R"(/sessions/([0-9a-zA-Z]+)/layout)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 sendJson(res, sectionsJson(service.geometry(req.matches[1])));
               }));
  }

  void shape(const httplib::Request& req, httplib::Response& res) {
    const json body = parseBody(req);
    const auto& names = service.body().basis.attributeNames;
    std::map<std::string, double> values;
    FieldErrors fields;
    const json& w = body.contains("weights") ? body["weights"] : json();
    if (w.is_object()) {
      for (const auto& [name, v] : w.items()) {
        if (v.is_number()) {
          values[name] = v.get<double>();
        } else {
          fields[name] = "expected a number";
        }
      }
    } else if (w.is_array()) {
      if (w.size() != names.size()) {
        fields["weights"] = "expected " + std::to_string(names.size()) + " values, got " +
                            std::to_string(w.size());
      } else {
        for (std::size_t a = 0; a < names.size(); ++a) {
          if (w[a].is_number()) {
            values[names[a]] = w[a].get<double>();
          } else {
            fields[names[a]] = "expected a number";
          }
        }
      }
    } else {
      fields["weights"] = "expected an object of name: value or an array";
    }
    for (auto& [name, reason] : service.checkWeights(values)) {
      fields.emplace(name, reason);
    }
    if (!fields.empty()) {
      throw InvalidWeightsError(std::move(fields));
    }
    const auto update = service.setShape(req.matches[1], values);
    json requested, applied, clamped = json::array();
    for (std::size_t a = 0; a < names.size(); ++a) {
      requested[names[a]] = update.requested[a];
      applied[names[a]] = update.applied[a];
      if (update.requested[a] != update.applied[a]) {
        clamped.push_back(names[a]);
      }
    }
    sendJson(res, {{"revision", update.revision},
                   {"applied", applied},
                   {"requested", requested},
                   {"clamped", clamped}});
  }
};

HttpServer::HttpServer(AvatarService& service, std::optional<std::filesystem::path> staticDir)
    : impl_(std::make_unique<Impl>(service)) {
  impl_->routes();
  if (staticDir) {
    if (!impl_->server.set_mount_point("/", staticDir->string())) {
      throw Error(ErrorCode::Io, "static bundle directory not found: " + staticDir->string());
    }
  } else {
    impl_->server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackIndex, "text/html");
    });
  }
}

HttpServer::~HttpServer() {
  stop();
}

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) {
      throw Error(ErrorCode::Io, "cannot bind " + host);
    }
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::run() {
  impl_->runEntered = true;
  if (!impl_->stopRequested) {
    impl_->server.listen_after_bind();
  }
  impl_->runExited = true;
}

void HttpServer::stop() {
  impl_->stopRequested = true;
  if (!impl_->runEntered) {
    return;
  }
  // The listener may still be starting; it cannot be stopped before it runs.
  while (!impl_->server.is_running() && !impl_->runExited) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  impl_->server.stop();
}

} // namespace avf::service
