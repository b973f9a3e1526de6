#pragma once

#include "bvh.hpp"
#include "support.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace avf::test {

inline std::filesystem::path fixtureDir() {
  return std::filesystem::path(AVF_FIXTURE_DIR);
}

inline std::string readText(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every hand-written BVH fixture, sorted by file name.
inline std::vector<std::pair<std::string, std::string>> bvhFixtures() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::directory_iterator(fixtureDir() / "bvh")) {
    if (e.path().extension() == ".bvh") {
      out.emplace_back(e.path().filename().string(), readText(e.path()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Random hierarchy of at most 20 joints with random channel layouts and at
// most 50 frames of values.
inline bvh::MotionClip randomClip(std::mt19937_64& rng) {
  using bvh::Channel;
  const std::size_t joints = 1 + rng() % 20;
  Skeleton s = randomTree(joints, rng);
  bvh::MotionClip clip;
  clip.skeleton = s;
  for (std::size_t k = 0; k < joints; ++k) {
    std::vector<Channel> ch;
    const auto mode = rng() % 6;
    if (k == 0 || mode == 0) {
      ch = {Channel::Xposition, Channel::Yposition, Channel::Zposition};
      std::shuffle(ch.begin(), ch.end(), rng);
    }
    if (mode != 1 || k == 0) {
      std::vector<Channel> rot = {Channel::Xrotation, Channel::Yrotation, Channel::Zrotation};
      std::shuffle(rot.begin(), rot.end(), rng);
      ch.insert(ch.end(), rot.begin(), rot.end());
    }
    clip.channels.push_back(ch);
  }
  clip.frameTime = std::uniform_real_distribution<double>(0.001, 0.1)(rng);
  const std::size_t frames = rng() % 51;
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  std::uniform_real_distribution<double> pos(-100.0, 100.0);
  for (std::size_t f = 0; f < frames; ++f) {
    std::vector<double> row;
    for (const auto& ch : clip.channels) {
      for (Channel c : ch) {
        row.push_back(bvh::isRotation(c) ? angle(rng) : pos(rng));
      }
    }
    clip.frames.push_back(row);
  }
  return clip;
}

// Byte-level mutation: replace, delete, insert or duplicate a span.
inline std::string mutate(const std::string& seed, std::mt19937_64& rng) {
  static const std::string alphabet = "{}\n\r\t :-.0123456789eE+ROOTJOINTEndSiteOFFSETCHANNELSMOTIONFrames";
  std::string s = seed;
  const int edits = 1 + static_cast<int>(rng() % 4);
  for (int e = 0; e < edits; ++e) {
    if (s.empty()) {
      s.push_back(alphabet[rng() % alphabet.size()]);
      continue;
    }
    const std::size_t at = rng() % s.size();
    switch (rng() % 5) {
      case 0:
        s[at] = alphabet[rng() % alphabet.size()];
        break;
      case 1:
        s.erase(at, 1 + rng() % 16);
        break;
      case 2:
        s.insert(at, 1, alphabet[rng() % alphabet.size()]);
        break;
      case 3: {
        const std::size_t len = std::min<std::size_t>(s.size() - at, 1 + rng() % 64);
        s.insert(at, s.substr(at, len));
        break;
      }
      default:
        s[at] = static_cast<char>(rng() & 0xff);
    }
  }
  return s;
}

inline bool clipsClose(const bvh::MotionClip& a, const bvh::MotionClip& b, double tol, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) {
      *why = m;
    }
    return false;
  };
  if (a.skeleton.size() != b.skeleton.size()) {
    return fail("joint count");
  }
  for (std::size_t k = 0; k < a.skeleton.size(); ++k) {
    const Joint& x = a.skeleton.joint(k);
    const Joint& y = b.skeleton.joint(k);
    if (x.name != y.name || x.parent != y.parent || (x.restOffset - y.restOffset).cwiseAbs().maxCoeff() > tol ||
        x.endSite.has_value() != y.endSite.has_value() ||
        (x.endSite && (*x.endSite - *y.endSite).cwiseAbs().maxCoeff() > tol)) {
      return fail("joint " + x.name);
    }
  }
  if (a.channels != b.channels) {
    return fail("channels");
  }
  if (std::abs(a.frameTime - b.frameTime) > 1e-6) {
    return fail("frame time");
  }
  if (a.frames.size() != b.frames.size()) {
    return fail("frame count");
  }
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    for (std::size_t i = 0; i < a.frames[f].size(); ++i) {
      if (std::abs(a.frames[f][i] - b.frames[f][i]) > tol) {
        return fail("value at frame " + std::to_string(f));
      }
    }
  }
  return true;
}

} // namespace avf::test
