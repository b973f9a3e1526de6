#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace avf {

enum class ErrorCode {
  InvalidArgument = 1,
  Parse,
  Io,
  Dimension,
  Degenerate,
  UnmappedBone,
  Conflict,
  Geometry,
  Index,
  Corpus,
  NotFound,
  Catalog,
};

const char* errorCodeName(ErrorCode code);

/// Base of every exception thrown by the engine. The code is what crosses the
/// C boundary; the message is human readable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept {
    return code_;
  }

 private:
  ErrorCode code_;
};

/// Positioned parse failure. `line` is 1-based; 0 means "end of input".
class ParseError : public Error {
 public:
  enum class Kind {
    MissingKeyword,
    UnbalancedBraces,
    BadNumber,
    ChannelCount,
    FrameCount,
    BadRecord,
    IndexRange,
  };

  ParseError(Kind kind, std::size_t line, const std::string& message);

  /// Same error with the message prefixed by a source name (file path).
  ParseError inSource(const std::string& source) const;

  const std::string& detail() const noexcept {
    return detail_;
  }

  Kind kind() const noexcept {
    return kind_;
  }
  std::size_t line() const noexcept {
    return line_;
  }

 private:
  ParseError(Kind kind, std::size_t line, const std::string& detail, const std::string& full);

  Kind kind_;
  std::size_t line_;
  std::string detail_;
};

} // namespace avf
