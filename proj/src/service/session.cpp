#include "session.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace avf::service {

InvalidWeightsError::InvalidWeightsError(FieldErrors fields)
    : Error(ErrorCode::InvalidArgument, "invalid shape weights"), fields_(std::move(fields)) {}

const char* sectionKindName(SectionKind kind) {
  switch (kind) {
    case SectionKind::Vertices:
      return "vertices";
    case SectionKind::Triangles:
      return "triangles";
    case SectionKind::Joints:
      return "joints";
  }
  return "unknown";
}

pipeline::PosedAvatar evaluate(const SessionState& state, const assets::BodyAsset& body) {
  if (state.clip) {
    return pipeline::pose(*state.dressed, body.binding, state.clip->poses.at(state.frame));
  }
  pipeline::PosedAvatar out;
  out.body = state.dressed->body;
  for (const auto& g : state.dressed->garments) {
    out.garments.push_back(g.mesh);
  }
  for (const Transform& t :
       forwardKinematics(body.skeleton, Pose::identity(body.skeleton.size()))) {
    out.joints.push_back(t.translation);
  }
  return out;
}

GeometryPayload encodeGeometry(const SessionState& state, const pipeline::PosedAvatar& posed) {
  struct Pending {
    SectionInfo info;
    const Mesh* mesh = nullptr;
    std::vector<std::array<std::uint32_t, 3>> triangles;
  };
  std::vector<Pending> pending;
  auto addMesh = [&](const std::string& name, const Mesh& m) {
    if (m.normals.size() != m.vertices.size()) {
      throw Error(ErrorCode::Dimension, "mesh '" + name + "' has no per-vertex normals");
    }
    pending.push_back({{SectionKind::Vertices, name, static_cast<std::uint32_t>(m.vertexCount()), 6,
                        ComponentType::Float32, 0, 0},
                       &m,
                       {}});
    auto tris = triangulate(m);
    const auto count = static_cast<std::uint32_t>(tris.size());
    pending.push_back({{SectionKind::Triangles, name, count, 3, ComponentType::Uint32, 0, 0},
                       &m,
                       std::move(tris)});
  };
  addMesh("body", posed.body);
  if (posed.garments.size() != state.garments.size()) {
    throw Error(ErrorCode::Dimension, "garment count does not match the session");
  }
  for (std::size_t k = 0; k < posed.garments.size(); ++k) {
    addMesh(state.garments[k], posed.garments[k]);
  }
  pending.push_back({{SectionKind::Joints, "joints", static_cast<std::uint32_t>(posed.joints.size()),
                      3, ComponentType::Float32, 0, 0},
                     nullptr,
                     {}});

  ByteWriter w;
  w.fixedString("AVGEOM", 8);
  w.u32(kGeometryLayoutVersion);
  w.u32(static_cast<std::uint32_t>(pending.size()));
  w.u64(state.revision);
  const std::int32_t frame = state.clip ? static_cast<std::int32_t>(state.frame) : -1;
  w.i32(frame);
  w.u32(0);

  const std::size_t tableAt = w.size();
  for (std::size_t i = 0; i < pending.size() * 8; ++i) {
    w.u32(0);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> names;
  for (const auto& p : pending) {
    names.emplace_back(static_cast<std::uint32_t>(w.size()),
                       static_cast<std::uint32_t>(p.info.name.size()));
    w.raw(p.info.name);
    w.padTo(4);
  }

  GeometryPayload out;
  for (std::size_t s = 0; s < pending.size(); ++s) {
    SectionInfo info = pending[s].info;
    info.byteOffset = static_cast<std::uint32_t>(w.size());
    if (info.kind == SectionKind::Vertices) {
      const Mesh& m = *pending[s].mesh;
      for (std::size_t v = 0; v < m.vertexCount(); ++v) {
        for (int c = 0; c < 3; ++c) {
          w.f32(static_cast<float>(m.vertices[v][c]));
        }
        for (int c = 0; c < 3; ++c) {
          w.f32(static_cast<float>(m.normals[v][c]));
        }
      }
    } else if (info.kind == SectionKind::Triangles) {
      for (const auto& t : pending[s].triangles) {
        for (std::uint32_t i : t) {
          w.u32(i);
        }
      }
    } else {
      for (const Vec3& j : posed.joints) {
        for (int c = 0; c < 3; ++c) {
          w.f32(static_cast<float>(j[c]));
        }
      }
    }
    info.byteLength = static_cast<std::uint32_t>(w.size()) - info.byteOffset;
    const std::size_t at = tableAt + 32 * s;
    w.patchU32(at, static_cast<std::uint32_t>(info.kind));
    w.patchU32(at + 4, info.count);
    w.patchU32(at + 8, info.components);
    w.patchU32(at + 12, static_cast<std::uint32_t>(info.componentType));
    w.patchU32(at + 16, info.byteOffset);
    w.patchU32(at + 20, info.byteLength);
    w.patchU32(at + 24, names[s].first);
    w.patchU32(at + 28, names[s].second);
    out.sections.push_back(std::move(info));
  }
  out.bytes = w.take();
  out.revision = state.revision;
  out.frame = frame;
  return out;
}

namespace {

struct LoadedMotion {
  std::shared_ptr<const retarget::RetargetedClip> clip;
  std::vector<std::string> warnings;
};

struct Session {
  std::mutex write; // held for a whole mutation
  std::mutex read; // guards `current`
  std::shared_ptr<const SessionState> current;
  AvatarService::Clock::time_point lastUsed;

  std::shared_ptr<const SessionState> snapshot() {
    std::lock_guard lock(read);
    return current;
  }
  void publish(std::shared_ptr<const SessionState> next) {
    std::lock_guard lock(read);
    current = std::move(next);
  }
};

std::string newToken() {
  static std::mutex mutex;
  static std::random_device device;
  std::lock_guard lock(mutex);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 4; ++i) {
    std::uint32_t r = device();
    for (int k = 0; k < 8; ++k) {
      out += hex[r & 0xF];
      r >>= 4;
    }
  }
  return out;
}

} // namespace

struct AvatarService::Impl {
  ServiceOptions options;
  assets::AssetLibrary library;
  assets::BodyAsset body;

  std::mutex assetMutex;
  std::map<std::string, std::shared_ptr<const skin::GarmentAsset>> garments;
  std::map<std::string, LoadedMotion> motions;

  mutable std::mutex storeMutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;

  const assets::AssetEntry& entry(const std::string& id, assets::AssetKind kind) const {
    const auto* e = library.find(id);
    if (e == nullptr || e->kind != kind) {
      throw Error(ErrorCode::NotFound,
                  std::string("no ") + assets::assetKindName(kind) + " asset '" + id + "'");
    }
    return *e;
  }

  std::shared_ptr<const skin::GarmentAsset> garment(const std::string& id) {
    const auto& e = entry(id, assets::AssetKind::Garment);
    std::lock_guard lock(assetMutex);
    auto it = garments.find(id);
    if (it == garments.end()) {
      auto g = std::make_shared<const skin::GarmentAsset>(assets::loadGarment(e, &body.skeleton));
      it = garments.emplace(id, std::move(g)).first;
    }
    return it->second;
  }

  LoadedMotion motion(const std::string& id) {
    const auto& e = entry(id, assets::AssetKind::Motion);
    std::lock_guard lock(assetMutex);
    auto it = motions.find(id);
    if (it == motions.end()) {
      const auto asset = assets::loadMotion(e);
      const auto map = retarget::buildRetargetMap(asset.clip.skeleton, body.skeleton, asset.map);
      LoadedMotion m{std::make_shared<const retarget::RetargetedClip>(
                         retarget::retargetClip(asset.clip, body.skeleton, map)),
                     map.warnings};
      it = motions.emplace(id, std::move(m)).first;
    }
    return it->second;
  }

  std::shared_ptr<const pipeline::DressedAvatar> dress(const shape::ShapeWeights& weights,
                                                       const std::vector<std::string>& ids) {
    std::vector<std::shared_ptr<const skin::GarmentAsset>> held;
    std::vector<const skin::GarmentAsset*> parts;
    for (const auto& id : ids) {
      held.push_back(garment(id));
      parts.push_back(held.back().get());
    }
    return std::make_shared<const pipeline::DressedAvatar>(pipeline::dress(body, weights, parts));
  }

  std::size_t evictLocked(Clock::time_point now) {
    std::size_t dropped = 0;
    for (auto it = sessions.begin(); it != sessions.end();) {
      if (now - it->second->lastUsed > options.idleTimeout) {
        it = sessions.erase(it);
        ++dropped;
      } else {
        ++it;
      }
    }
    return dropped;
  }

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(storeMutex);
    const auto now = Clock::now();
    evictLocked(now);
    auto it = sessions.find(id);
    if (it == sessions.end()) {
      throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
    }
    it->second->lastUsed = now;
    return it->second;
  }

  template <typename F>
  std::shared_ptr<const SessionState> mutate(const std::string& id, F&& change) {
    const auto s = session(id);
    std::lock_guard lock(s->write);
    const auto current = s->snapshot();
    SessionState next = *current;
    change(next);
    next.revision = current->revision + 1;
    auto published = std::make_shared<const SessionState>(std::move(next));
    s->publish(published);
    return published;
  }
};

AvatarService::AvatarService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->library = assets::scanLibrary(impl_->options.library);
  const assets::AssetEntry* bodyEntry = nullptr;
  if (impl_->options.bodyId.empty()) {
    const auto bodies = impl_->library.ofKind(assets::AssetKind::BodyBasis);
    if (bodies.empty()) {
      throw Error(ErrorCode::NotFound, "asset library has no body-basis asset");
    }
    bodyEntry = bodies.front();
  } else {
    bodyEntry = &impl_->entry(impl_->options.bodyId, assets::AssetKind::BodyBasis);
  }
  impl_->body = assets::loadBody(*bodyEntry);
}

AvatarService::~AvatarService() = default;

const assets::AssetLibrary& AvatarService::library() const {
  return impl_->library;
}

const assets::BodyAsset& AvatarService::body() const {
  return impl_->body;
}

const ServiceOptions& AvatarService::options() const {
  return impl_->options;
}

std::string AvatarService::createSession() {
  SessionState initial;
  initial.weights = shape::ShapeWeights::zero(impl_->body.basis);
  initial.dressed = impl_->dress(initial.weights, {});
  auto s = std::make_shared<Session>();
  s->current = std::make_shared<const SessionState>(std::move(initial));
  std::lock_guard lock(impl_->storeMutex);
  const auto now = Clock::now();
  impl_->evictLocked(now);
  s->lastUsed = now;
  std::string id;
  do {
    id = newToken();
  } while (impl_->sessions.count(id));
  impl_->sessions.emplace(id, std::move(s));
  return id;
}

std::shared_ptr<const SessionState> AvatarService::state(const std::string& id) {
  return impl_->session(id)->snapshot();
}

void AvatarService::deleteSession(const std::string& id) {
  std::lock_guard lock(impl_->storeMutex);
  if (impl_->sessions.erase(id) == 0) {
    throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
  }
}

std::size_t AvatarService::sessionCount() const {
  std::lock_guard lock(impl_->storeMutex);
  return impl_->sessions.size();
}

FieldErrors AvatarService::checkWeights(const std::map<std::string, double>& values) const {
  FieldErrors errors;
  const auto& names = impl_->body.basis.attributeNames;
  for (const auto& [name, value] : values) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      errors[name] = "unknown attribute";
    } else if (!std::isfinite(value)) {
      errors[name] = "not a finite number";
    }
  }
  return errors;
}

ShapeUpdate AvatarService::setShape(const std::string& id,
                                    const std::map<std::string, double>& values) {
  if (auto errors = checkWeights(values); !errors.empty()) {
    throw InvalidWeightsError(std::move(errors));
  }
  const auto& basis = impl_->body.basis;
  ShapeUpdate update;
  const auto next = impl_->mutate(id, [&](SessionState& s) {
    update.requested = s.weights.values();
    for (std::size_t a = 0; a < basis.attributeNames.size(); ++a) {
      if (auto it = values.find(basis.attributeNames[a]); it != values.end()) {
        update.requested[a] = it->second;
      }
    }
    s.weights = shape::ShapeWeights::clamped(basis, update.requested);
    s.dressed = impl_->dress(s.weights, s.garments);
  });
  update.applied = next->weights.values();
  update.revision = next->revision;
  return update;
}

std::uint64_t AvatarService::attachGarment(const std::string& id, const std::string& garmentId) {
  impl_->entry(garmentId, assets::AssetKind::Garment);
  return impl_
      ->mutate(id,
               [&](SessionState& s) {
                 if (std::find(s.garments.begin(), s.garments.end(), garmentId) !=
                     s.garments.end()) {
                   throw Error(ErrorCode::Conflict, "garment '" + garmentId + "' already attached");
                 }
                 s.garments.push_back(garmentId);
                 s.dressed = impl_->dress(s.weights, s.garments);
               })
      ->revision;
}

std::uint64_t AvatarService::detachGarment(const std::string& id, const std::string& garmentId) {
  return impl_
      ->mutate(id,
               [&](SessionState& s) {
                 const auto it = std::find(s.garments.begin(), s.garments.end(), garmentId);
                 if (it == s.garments.end()) {
                   throw Error(ErrorCode::NotFound, "garment '" + garmentId + "' is not attached");
                 }
                 s.garments.erase(it);
                 s.dressed = impl_->dress(s.weights, s.garments);
               })
      ->revision;
}

MotionInfo AvatarService::setMotion(const std::string& id, const std::string& motionId) {
  impl_->session(id);
  const LoadedMotion loaded = impl_->motion(motionId);
  if (loaded.clip->poses.empty()) {
    throw Error(ErrorCode::InvalidArgument, "motion '" + motionId + "' has no frames");
  }
  const auto next = impl_->mutate(id, [&](SessionState& s) {
    s.motion = motionId;
    s.clip = loaded.clip;
    s.motionWarnings = loaded.warnings;
    s.frame = 0;
  });
  return {loaded.clip->poses.size(), loaded.clip->frameTime, loaded.warnings, next->revision};
}

std::uint64_t AvatarService::setFrame(const std::string& id, std::size_t frame) {
  return impl_
      ->mutate(id,
               [&](SessionState& s) {
                 if (!s.clip) {
                   throw Error(ErrorCode::InvalidArgument, "no motion loaded");
                 }
                 if (frame >= s.clip->poses.size()) {
                   throw Error(ErrorCode::Index,
                               "frame " + std::to_string(frame) + " out of range (clip has " +
                                   std::to_string(s.clip->poses.size()) + " frames)");
                 }
                 s.frame = frame;
               })
      ->revision;
}

GeometryPayload AvatarService::geometry(const std::string& id) {
  const auto s = state(id);
  return encodeGeometry(*s, evaluate(*s, impl_->body));
}

std::size_t AvatarService::evictIdle(Clock::time_point now) {
  std::lock_guard lock(impl_->storeMutex);
  return impl_->evictLocked(now);
}

} // namespace avf::service
