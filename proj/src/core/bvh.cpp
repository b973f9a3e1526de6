#include "bvh.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <sstream>

namespace avf::bvh {

const char* channelName(Channel c) {
  switch (c) {
    case Channel::Xposition:
      return "Xposition";
    case Channel::Yposition:
      return "Yposition";
    case Channel::Zposition:
      return "Zposition";
    case Channel::Xrotation:
      return "Xrotation";
    case Channel::Yrotation:
      return "Yrotation";
    case Channel::Zrotation:
      return "Zrotation";
  }
  return "?";
}

bool isRotation(Channel c) {
  return c == Channel::Xrotation || c == Channel::Yrotation || c == Channel::Zrotation;
}

std::size_t MotionClip::channelCount() const {
  std::size_t n = 0;
  for (const auto& c : channels) {
    n += c.size();
  }
  return n;
}

void MotionClip::validate() const {
  if (channels.size() != skeleton.size()) {
    throw Error(ErrorCode::Dimension, "channel lists do not match joint count");
  }
  if (!(frameTime > 0.0) || !std::isfinite(frameTime)) {
    throw Error(ErrorCode::Dimension, "frame time must be positive");
  }
  const std::size_t width = channelCount();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].size() != width) {
      throw Error(ErrorCode::Dimension, "frame " + std::to_string(f) + " has " +
                                            std::to_string(frames[f].size()) + " values, expected " +
                                            std::to_string(width));
    }
  }
}

namespace {

using Kind = ParseError::Kind;

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<Line> splitLines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  std::size_t lineNo = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      eol = text.size();
    }
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineNo;
    Line l{lineNo, {}};
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
      }
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
      }
      if (i > start) {
        l.tokens.push_back(line.substr(start, i - start));
      }
    }
    if (!l.tokens.empty()) {
      lines.push_back(std::move(l));
    }
  }
  return lines;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

double parseNumber(std::string_view tok, std::size_t line) {
  // from_chars rejects a leading '+', which some exporters emit.
  if (!tok.empty() && tok.front() == '+') {
    tok.remove_prefix(1);
  }
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(Kind::BadNumber, line, "invalid number '" + std::string(tok) + "'");
  }
  return v;
}

std::optional<Channel> channelFromName(std::string_view s) {
  static constexpr Channel all[] = {Channel::Xposition, Channel::Yposition, Channel::Zposition,
                                    Channel::Xrotation, Channel::Yrotation, Channel::Zrotation};
  for (Channel c : all) {
    if (iequals(s, channelName(c))) {
      return c;
    }
  }
  return std::nullopt;
}

/// Token cursor over the hierarchy section.
class Cursor {
 public:
  explicit Cursor(const std::vector<Line>& lines) : lines_(lines) {}

  bool atEnd() const {
    return line_ >= lines_.size();
  }
  std::size_t lineNumber() const {
    return atEnd() ? 0 : lines_[line_].number;
  }
  std::string_view peek() const {
    return lines_[line_].tokens[tok_];
  }
  std::string_view next() {
    std::string_view t = peek();
    advance();
    return t;
  }
  bool atLineStart() const {
    return tok_ == 0;
  }
  std::size_t lineIndex() const {
    return line_;
  }
  /// Tokens remaining on the current line, not consuming a trailing "{".
  std::vector<std::string_view> restOfLine() {
    std::vector<std::string_view> out;
    const std::size_t current = line_;
    while (!atEnd() && line_ == current && peek() != "{") {
      out.push_back(next());
    }
    return out;
  }
  std::string_view expectToken(const char* what) {
    if (atEnd()) {
      throw ParseError(Kind::UnbalancedBraces, 0, std::string("unexpected end of file, expected ") +
                                                     what);
    }
    return next();
  }

 private:
  void advance() {
    if (++tok_ >= lines_[line_].tokens.size()) {
      tok_ = 0;
      ++line_;
    }
  }

  const std::vector<Line>& lines_;
  std::size_t line_ = 0;
  std::size_t tok_ = 0;
};

struct OpenJoint {
  std::size_t index; // into joints, or npos for an End Site block
  bool endSite;
  std::size_t owner; // joint owning the End Site
  bool sawOffset = false;
};

constexpr std::size_t kMaxDepth = 4096;

} // namespace

MotionClip parseBvh(std::string_view text) {
  const std::vector<Line> lines = splitLines(text);
  Cursor cur(lines);

  if (cur.atEnd() || !iequals(cur.peek(), "HIERARCHY")) {
    throw ParseError(Kind::MissingKeyword, cur.lineNumber(), "expected HIERARCHY");
  }
  cur.next();

  std::vector<Joint> joints;
  std::vector<std::vector<Channel>> channels;
  std::vector<OpenJoint> stack;
  bool rootSeen = false;

  auto readVec3 = [&](const char* what) {
    Vec3 v;
    for (int c = 0; c < 3; ++c) {
      const std::size_t line = cur.lineNumber();
      if (cur.atEnd()) {
        throw ParseError(Kind::UnbalancedBraces, 0, std::string("unexpected end of file in ") + what);
      }
      v[c] = parseNumber(cur.next(), line);
    }
    return v;
  };

  auto openBrace = [&]() {
    const std::size_t line = cur.lineNumber();
    const std::string_view t = cur.expectToken("'{'");
    if (t != "{") {
      throw ParseError(Kind::UnbalancedBraces, line, "expected '{', found '" + std::string(t) + "'");
    }
  };

  while (true) {
    if (cur.atEnd()) {
      throw ParseError(Kind::UnbalancedBraces, 0,
                       rootSeen ? "unclosed joint block" : "expected ROOT");
    }
    const std::size_t line = cur.lineNumber();
    const std::string_view t = cur.next();

    if (iequals(t, "ROOT") || iequals(t, "JOINT")) {
      const bool isRoot = iequals(t, "ROOT");
      if (isRoot && rootSeen) {
        throw ParseError(Kind::BadRecord, line, "multiple ROOT joints are not supported");
      }
      if (!isRoot && (stack.empty() || stack.back().endSite)) {
        throw ParseError(Kind::BadRecord, line, "JOINT outside of a joint block");
      }
      if (isRoot && !stack.empty()) {
        throw ParseError(Kind::BadRecord, line, "ROOT inside a joint block");
      }
      if (stack.size() >= kMaxDepth) {
        throw ParseError(Kind::BadRecord, line, "hierarchy nested too deeply");
      }
      const auto nameTokens = cur.restOfLine();
      if (nameTokens.empty()) {
        throw ParseError(Kind::BadRecord, line, "joint without a name");
      }
      std::string name(nameTokens.front());
      for (std::size_t i = 1; i < nameTokens.size(); ++i) {
        name += ' ';
        name += nameTokens[i];
      }
      Joint j;
      j.name = std::move(name);
      j.parent = isRoot ? -1 : static_cast<int>(stack.back().index);
      joints.push_back(std::move(j));
      channels.emplace_back();
      rootSeen = true;
      openBrace();
      stack.push_back({joints.size() - 1, false, 0});
    } else if (iequals(t, "End")) {
      const std::size_t siteLine = cur.lineNumber();
      if (cur.atEnd() || siteLine != line || !iequals(cur.peek(), "Site")) {
        throw ParseError(Kind::BadRecord, line, "expected 'End Site'");
      }
      cur.next();
      if (stack.empty() || stack.back().endSite) {
        throw ParseError(Kind::BadRecord, line, "End Site outside of a joint block");
      }
      const std::size_t owner = stack.back().index;
      if (joints[owner].endSite) {
        throw ParseError(Kind::BadRecord, line, "joint has two End Site blocks");
      }
      openBrace();
      joints[owner].endSite = Vec3::Zero();
      stack.push_back({owner, true, owner});
    } else if (iequals(t, "OFFSET")) {
      if (stack.empty()) {
        throw ParseError(Kind::BadRecord, line, "OFFSET outside of a joint block");
      }
      OpenJoint& open = stack.back();
      if (open.sawOffset) {
        throw ParseError(Kind::BadRecord, line, "duplicate OFFSET");
      }
      open.sawOffset = true;
      const Vec3 v = readVec3("OFFSET");
      if (open.endSite) {
        joints[open.owner].endSite = v;
      } else {
        joints[open.index].restOffset = v;
      }
    } else if (iequals(t, "CHANNELS")) {
      if (stack.empty() || stack.back().endSite) {
        throw ParseError(Kind::BadRecord, line, "CHANNELS outside of a joint block");
      }
      auto& list = channels[stack.back().index];
      if (!list.empty()) {
        throw ParseError(Kind::BadRecord, line, "duplicate CHANNELS");
      }
      const std::string_view countTok = cur.expectToken("channel count");
      long long count = -1;
      {
        const char* end = countTok.data() + countTok.size();
        auto [ptr, ec] = std::from_chars(countTok.data(), end, count);
        if (ec != std::errc() || ptr != end || count < 0 || count > 6) {
          throw ParseError(Kind::ChannelCount, line,
                           "invalid channel count '" + std::string(countTok) + "'");
        }
      }
      bool seen[6] = {};
      for (long long i = 0; i < count; ++i) {
        if (cur.atEnd() || cur.lineNumber() != line) {
          throw ParseError(Kind::ChannelCount, line,
                           "CHANNELS declares " + std::to_string(count) + " channels but lists " +
                               std::to_string(i));
        }
        const std::string_view name = cur.next();
        const auto ch = channelFromName(name);
        if (!ch) {
          throw ParseError(Kind::BadRecord, line, "unknown channel '" + std::string(name) + "'");
        }
        if (seen[static_cast<int>(*ch)]) {
          throw ParseError(Kind::BadRecord, line, "repeated channel '" + std::string(name) + "'");
        }
        seen[static_cast<int>(*ch)] = true;
        list.push_back(*ch);
      }
      if (!cur.atEnd() && cur.lineNumber() == line && cur.peek() != "{" && cur.peek() != "}") {
        throw ParseError(Kind::ChannelCount, line,
                         "CHANNELS declares " + std::to_string(count) + " channels but lists more");
      }
    } else if (t == "}") {
      if (stack.empty()) {
        throw ParseError(Kind::UnbalancedBraces, line, "unmatched '}'");
      }
      stack.pop_back();
      if (stack.empty()) {
        break;
      }
    } else if (t == "{") {
      throw ParseError(Kind::UnbalancedBraces, line, "unexpected '{'");
    } else if (iequals(t, "MOTION")) {
      throw ParseError(Kind::UnbalancedBraces, line, "MOTION before the hierarchy is closed");
    } else {
      throw ParseError(Kind::BadRecord, line, "unexpected token '" + std::string(t) + "'");
    }
  }

  // Everything after the root block lives on whole lines.
  std::size_t li = cur.atEnd() ? lines.size() : cur.lineIndex();
  if (!cur.atEnd() && !cur.atLineStart()) {
    throw ParseError(Kind::BadRecord, cur.lineNumber(), "unexpected text after root block");
  }
  if (li >= lines.size() || lines[li].tokens.size() != 1 || !iequals(lines[li].tokens[0], "MOTION")) {
    throw ParseError(Kind::MissingKeyword, li < lines.size() ? lines[li].number : 0,
                     "expected MOTION");
  }
  ++li;

  // "Frames: N" and "Frame Time: t", tolerating a detached colon.
  auto headerValue = [&](std::initializer_list<std::string_view> words, const char* what) {
    if (li >= lines.size()) {
      throw ParseError(Kind::MissingKeyword, 0, std::string("expected ") + what);
    }
    const Line& l = lines[li];
    std::string joined;
    for (std::string_view t : l.tokens) {
      joined += t;
      joined += ' ';
    }
    std::string expected;
    for (std::string_view w : words) {
      expected += w;
      expected += ' ';
    }
    expected.pop_back();
    const auto colon = joined.find(':');
    if (colon == std::string::npos) {
      throw ParseError(Kind::MissingKeyword, l.number, std::string("expected ") + what);
    }
    std::string key = joined.substr(0, colon);
    while (!key.empty() && key.back() == ' ') {
      key.pop_back();
    }
    if (!iequals(key, expected)) {
      throw ParseError(Kind::MissingKeyword, l.number, std::string("expected ") + what);
    }
    std::string value = joined.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') {
      value.erase(value.begin());
    }
    while (!value.empty() && value.back() == ' ') {
      value.pop_back();
    }
    if (value.empty() || value.find(' ') != std::string::npos) {
      throw ParseError(Kind::BadNumber, l.number, std::string("malformed ") + what);
    }
    ++li;
    return std::pair<std::string, std::size_t>(value, l.number);
  };

  const auto [framesText, framesLine] = headerValue({"Frames"}, "'Frames:'");
  long long declaredFrames = -1;
  {
    const char* end = framesText.data() + framesText.size();
    auto [ptr, ec] = std::from_chars(framesText.data(), end, declaredFrames);
    if (ec != std::errc() || ptr != end || declaredFrames < 0) {
      throw ParseError(Kind::BadNumber, framesLine, "invalid frame count '" + framesText + "'");
    }
  }
  const auto [timeText, timeLine] = headerValue({"Frame", "Time"}, "'Frame Time:'");
  const double frameTime = parseNumber(timeText, timeLine);
  if (!(frameTime > 0.0)) {
    throw ParseError(Kind::BadNumber, timeLine, "frame time must be positive");
  }

  MotionClip clip;
  try {
    clip.skeleton = Skeleton(std::move(joints));
  } catch (const Error& e) {
    throw ParseError(Kind::BadRecord, 1, e.what());
  }
  clip.channels = std::move(channels);
  clip.frameTime = frameTime;
  const std::size_t width = clip.channelCount();

  for (; li < lines.size(); ++li) {
    const Line& l = lines[li];
    if (static_cast<long long>(clip.frames.size()) >= declaredFrames) {
      throw ParseError(Kind::FrameCount, l.number,
                       "more frame rows than the declared " + std::to_string(declaredFrames));
    }
    if (l.tokens.size() != width) {
      throw ParseError(Kind::ChannelCount, l.number,
                       "frame row has " + std::to_string(l.tokens.size()) + " values, expected " +
                           std::to_string(width));
    }
    std::vector<double> row(width);
    for (std::size_t i = 0; i < width; ++i) {
      row[i] = parseNumber(l.tokens[i], l.number);
    }
    clip.frames.push_back(std::move(row));
  }
  if (width == 0) {
    // Zero-width rows are blank lines; the declared count is authoritative.
    clip.frames.assign(static_cast<std::size_t>(std::min<long long>(declaredFrames, 1 << 20)), {});
  }
  if (static_cast<long long>(clip.frames.size()) != declaredFrames) {
    throw ParseError(Kind::FrameCount, 0,
                     "declared " + std::to_string(declaredFrames) + " frames but found " +
                         std::to_string(clip.frames.size()));
  }
  return clip;
}

namespace {

void appendFixed(std::string& out, double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.6f", v);
  out.append(buf, static_cast<std::size_t>(len));
}

} // namespace

std::string writeBvh(const MotionClip& clip) {
  clip.validate();
  const Skeleton& skel = clip.skeleton;
  std::string out = "HIERARCHY\n";

  // Document order equals storage order; close blocks as depth decreases.
  std::vector<std::size_t> depth(skel.size(), 0);
  std::vector<std::size_t> open;
  auto indent = [&](std::size_t d) { out.append(d, '\t'); };
  auto closeTo = [&](std::size_t targetDepth) {
    while (open.size() > targetDepth) {
      const std::size_t j = open.back();
      open.pop_back();
      if (skel.joint(j).endSite) {
        const Vec3& e = *skel.joint(j).endSite;
        indent(open.size() + 1);
        out += "End Site\n";
        indent(open.size() + 1);
        out += "{\n";
        indent(open.size() + 2);
        out += "OFFSET ";
        appendFixed(out, e.x());
        out += ' ';
        appendFixed(out, e.y());
        out += ' ';
        appendFixed(out, e.z());
        out += '\n';
        indent(open.size() + 1);
        out += "}\n";
      }
      indent(open.size());
      out += "}\n";
    }
  };

  for (std::size_t k = 0; k < skel.size(); ++k) {
    const Joint& j = skel.joint(k);
    depth[k] = j.parent < 0 ? 0 : depth[j.parent] + 1;
    closeTo(depth[k]);
    indent(depth[k]);
    out += (j.parent < 0 ? "ROOT " : "JOINT ") + j.name + "\n";
    indent(depth[k]);
    out += "{\n";
    indent(depth[k] + 1);
    out += "OFFSET ";
    appendFixed(out, j.restOffset.x());
    out += ' ';
    appendFixed(out, j.restOffset.y());
    out += ' ';
    appendFixed(out, j.restOffset.z());
    out += '\n';
    if (!clip.channels[k].empty()) {
      indent(depth[k] + 1);
      out += "CHANNELS " + std::to_string(clip.channels[k].size());
      for (Channel c : clip.channels[k]) {
        out += ' ';
        out += channelName(c);
      }
      out += '\n';
    }
    open.push_back(k);
  }
  closeTo(0);

  out += "MOTION\n";
  out += "Frames: " + std::to_string(clip.frames.size()) + "\n";
  out += "Frame Time: ";
  if (clip.frameTime >= 1e-6) {
    appendFixed(out, clip.frameTime);
  } else {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", clip.frameTime);
    out += buf;
  }
  out += '\n';
  for (const auto& row : clip.frames) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) {
        out += ' ';
      }
      appendFixed(out, row[i]);
    }
    out += '\n';
  }
  return out;
}

MotionClip loadBvh(const std::filesystem::path& path) {
  try {
    return parseBvh(readFileText(path));
  } catch (const ParseError& e) {
    throw e.inSource(path.string());
  }
}

void saveBvh(const MotionClip& clip, const std::filesystem::path& path) {
  writeFileText(path, writeBvh(clip));
}

Pose poseAtFrame(const MotionClip& clip, std::size_t frame) {
  if (frame >= clip.frames.size()) {
    throw Error(ErrorCode::Index, "frame " + std::to_string(frame) + " out of range (" +
                                      std::to_string(clip.frames.size()) + " frames)");
  }
  const auto& row = clip.frames[frame];
  Pose pose = Pose::identity(clip.skeleton.size());
  constexpr double kDeg = std::numbers::pi / 180.0;
  std::size_t col = 0;
  for (std::size_t j = 0; j < clip.skeleton.size(); ++j) {
    Quat q = Quat::Identity();
    for (Channel c : clip.channels[j]) {
      const double v = row[col++];
      switch (c) {
        case Channel::Xrotation:
          q = q * Quat(Eigen::AngleAxisd(v * kDeg, Vec3::UnitX()));
          break;
        case Channel::Yrotation:
          q = q * Quat(Eigen::AngleAxisd(v * kDeg, Vec3::UnitY()));
          break;
        case Channel::Zrotation:
          q = q * Quat(Eigen::AngleAxisd(v * kDeg, Vec3::UnitZ()));
          break;
        case Channel::Xposition:
          if (j == 0) {
            pose.rootTranslation.x() = v;
          }
          break;
        case Channel::Yposition:
          if (j == 0) {
            pose.rootTranslation.y() = v;
          }
          break;
        case Channel::Zposition:
          if (j == 0) {
            pose.rootTranslation.z() = v;
          }
          break;
      }
    }
    pose.localRotations[j] = q.normalized();
  }
  return pose;
}

Vec3 quatToEulerZXY(const Quat& q) {
  const Mat3 r = q.normalized().toRotationMatrix();
  const double sx = std::clamp(r(2, 1), -1.0, 1.0);
  const double x = std::asin(sx);
  double z = 0.0;
  double y = 0.0;
  if (std::abs(sx) < 1.0 - 1e-12) {
    y = std::atan2(-r(2, 0), r(2, 2));
    z = std::atan2(-r(0, 1), r(1, 1));
  } else {
    z = std::atan2(r(1, 0), r(0, 0));
  }
  return Vec3(z, x, y);
}

MotionClip clipFromPoses(const Skeleton& skeleton, const std::vector<Pose>& poses,
                         double frameTime) {
  MotionClip clip;
  clip.skeleton = skeleton;
  clip.frameTime = frameTime;
  clip.channels.resize(skeleton.size());
  for (std::size_t j = 0; j < skeleton.size(); ++j) {
    if (j == 0) {
      clip.channels[j] = {Channel::Xposition, Channel::Yposition, Channel::Zposition};
    }
    clip.channels[j].insert(clip.channels[j].end(),
                            {Channel::Zrotation, Channel::Xrotation, Channel::Yrotation});
  }
  constexpr double kRad = 180.0 / std::numbers::pi;
  for (const Pose& pose : poses) {
    checkPoseMatches(skeleton, pose);
    std::vector<double> row;
    row.reserve(clip.channelCount());
    row.push_back(pose.rootTranslation.x());
    row.push_back(pose.rootTranslation.y());
    row.push_back(pose.rootTranslation.z());
    for (const Quat& q : pose.localRotations) {
      const Vec3 e = quatToEulerZXY(q);
      row.push_back(e[0] * kRad);
      row.push_back(e[1] * kRad);
      row.push_back(e[2] * kRad);
    }
    clip.frames.push_back(std::move(row));
  }
  return clip;
}

std::string describeClip(const MotionClip& clip) {
  std::ostringstream os;
  const Skeleton& skel = clip.skeleton;
  std::vector<std::size_t> depth(skel.size(), 0);
  os << "joints: " << skel.size() << "\n";
  for (std::size_t k = 0; k < skel.size(); ++k) {
    const Joint& j = skel.joint(k);
    depth[k] = j.parent < 0 ? 0 : depth[j.parent] + 1;
    os << std::string(2 * depth[k] + 2, ' ') << j.name << "  [" << clip.channels[k].size()
       << " ch]" << (j.endSite ? "  (end site)" : "") << "\n";
  }
  os << "channels: " << clip.channelCount() << "\n";
  os << "frames: " << clip.frameCount() << "\n";
  os << "frame time: " << clip.frameTime << "\n";
  return os.str();
}

} // namespace avf::bvh
