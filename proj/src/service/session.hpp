#pragma once

#include "library.hpp"
#include "pipeline.hpp"
#include "retarget.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace avf::service {

/// One complete revision of a session. Never mutated once published.
struct SessionState {
  std::uint64_t revision = 0;
  shape::ShapeWeights weights = shape::ShapeWeights::unbounded({});
  std::vector<std::string> garments; // attach order
  std::shared_ptr<const pipeline::DressedAvatar> dressed;
  std::optional<std::string> motion;
  std::shared_ptr<const retarget::RetargetedClip> clip;
  std::vector<std::string> motionWarnings;
  std::size_t frame = 0;
};

/// Field name -> reason.
using FieldErrors = std::map<std::string, std::string>;

/// Rejected shape update; every offending field is listed.
class InvalidWeightsError : public Error {
 public:
  explicit InvalidWeightsError(FieldErrors fields);
  const FieldErrors& fields() const noexcept {
    return fields_;
  }

 private:
  FieldErrors fields_;
};

struct ShapeUpdate {
  std::vector<double> requested;
  std::vector<double> applied;
  std::uint64_t revision = 0;
};

struct MotionInfo {
  std::size_t frames = 0;
  double frameTime = 0.0;
  std::vector<std::string> warnings;
  std::uint64_t revision = 0;
};

// Geometry payload, all little-endian:
//   0  "AVGEOM\0\0"
//   8  u32 layout version
//   12 u32 section count
//   16 u64 revision
//   24 i32 frame (-1: rest pose, no motion loaded)
//   28 u32 reserved (0)
//   32 section table, 32 bytes per entry:
//        u32 kind, u32 count, u32 components, u32 component type,
//        u32 byte offset, u32 byte length, u32 name offset, u32 name length
//      name bytes (UTF-8, 4-byte aligned), then section data (4-byte aligned)
// Offsets are from the start of the payload. Sections: body vertices, body
// triangles, then vertices and triangles per attached garment, then joints.
inline constexpr std::uint32_t kGeometryLayoutVersion = 1;

enum class SectionKind : std::uint32_t {
  Vertices = 1, // f32 px py pz nx ny nz
  Triangles = 2, // u32 a b c
  Joints = 3, // f32 x y z, skeleton order
};

enum class ComponentType : std::uint32_t { Float32 = 0, Uint32 = 1 };

struct SectionInfo {
  SectionKind kind;
  std::string name;
  std::uint32_t count = 0;
  std::uint32_t components = 0;
  ComponentType componentType = ComponentType::Float32;
  std::uint32_t byteOffset = 0;
  std::uint32_t byteLength = 0;
};

struct GeometryPayload {
  std::vector<std::uint8_t> bytes;
  std::vector<SectionInfo> sections;
  std::uint64_t revision = 0;
  std::int32_t frame = -1;
};

/// Evaluated meshes for a state: posed at the current frame, or the dressed
/// rest meshes when no motion is loaded.
pipeline::PosedAvatar evaluate(const SessionState& state, const assets::BodyAsset& body);

GeometryPayload encodeGeometry(const SessionState& state, const pipeline::PosedAvatar& posed);

const char* sectionKindName(SectionKind kind);

struct ServiceOptions {
  std::filesystem::path library;
  std::string bodyId; // empty: the first body-basis asset by id
  std::chrono::seconds idleTimeout{30 * 60};
};

/// Session store over one asset library. Every method is thread safe.
/// Mutations on one session serialize; each success publishes a new state
/// whose revision is exactly one more than the last.
class AvatarService {
 public:
  using Clock = std::chrono::steady_clock;

  explicit AvatarService(ServiceOptions options);
  ~AvatarService();

  const assets::AssetLibrary& library() const;
  const assets::BodyAsset& body() const;
  const ServiceOptions& options() const;

  std::string createSession();
  /// NotFound for unknown or evicted ids.
  std::shared_ptr<const SessionState> state(const std::string& id);
  void deleteSession(const std::string& id);
  std::size_t sessionCount() const;

  /// Problems with a set of named values (unknown names, non-finite values).
  FieldErrors checkWeights(const std::map<std::string, double>& values) const;
  /// Unlisted attributes keep their current value; listed ones are clamped.
  ShapeUpdate setShape(const std::string& id, const std::map<std::string, double>& values);
  std::uint64_t attachGarment(const std::string& id, const std::string& garmentId);
  std::uint64_t detachGarment(const std::string& id, const std::string& garmentId);
  MotionInfo setMotion(const std::string& id, const std::string& motionId);
  std::uint64_t setFrame(const std::string& id, std::size_t frame);

  GeometryPayload geometry(const std::string& id);

  /// Drops sessions idle since before `now - idleTimeout`; returns how many.
  std::size_t evictIdle(Clock::time_point now);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace avf::service
