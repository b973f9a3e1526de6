#pragma once

#include "geometry.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace avf::bvh {

enum class Channel : std::uint8_t {
  Xposition,
  Yposition,
  Zposition,
  Xrotation,
  Yrotation,
  Zrotation,
};

const char* channelName(Channel c);
bool isRotation(Channel c);

/// Parsed Biovision Hierarchy file. Rotations are stored in degrees,
/// positions in file units, exactly as they appear in the MOTION rows.
struct MotionClip {
  Skeleton skeleton;
  std::vector<std::vector<Channel>> channels; // per joint, file order
  double frameTime = 1.0 / 30.0;
  std::vector<std::vector<double>> frames;

  std::size_t channelCount() const;
  std::size_t frameCount() const {
    return frames.size();
  }
  /// Throws Error(Dimension) on a broken invariant.
  void validate() const;
};

/// Keywords are case-insensitive; LF and CRLF are accepted. Every failure is
/// a ParseError carrying the offending line.
MotionClip parseBvh(std::string_view text);

/// Canonical form: tab indentation, LF line ends, 6-decimal values.
std::string writeBvh(const MotionClip& clip);

MotionClip loadBvh(const std::filesystem::path& path);
void saveBvh(const MotionClip& clip, const std::filesystem::path& path);

/// Local rotations compose the listed axis rotations intrinsically in channel
/// order. Only the root's position channels feed root_translation.
Pose poseAtFrame(const MotionClip& clip, std::size_t frame);

/// Builds a clip whose root carries Xposition Yposition Zposition Zrotation
/// Xrotation Yrotation and every other joint Zrotation Xrotation Yrotation.
MotionClip clipFromPoses(const Skeleton& skeleton, const std::vector<Pose>& poses,
                         double frameTime);

/// Intrinsic Z, X, Y angles in radians such that q = Rz * Rx * Ry.
Vec3 quatToEulerZXY(const Quat& q);

/// Joint tree, channel count, frame count and frame time.
std::string describeClip(const MotionClip& clip);

} // namespace avf::bvh
