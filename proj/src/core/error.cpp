#include "error.hpp"

namespace avf {

const char* errorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return "invalid-argument";
    case ErrorCode::Parse:
      return "parse";
    case ErrorCode::Io:
      return "io";
    case ErrorCode::Dimension:
      return "dimension";
    case ErrorCode::Degenerate:
      return "degenerate";
    case ErrorCode::UnmappedBone:
      return "unmapped-bone";
    case ErrorCode::Conflict:
      return "conflict";
    case ErrorCode::Geometry:
      return "geometry";
    case ErrorCode::Index:
      return "index";
    case ErrorCode::Corpus:
      return "corpus";
    case ErrorCode::NotFound:
      return "not-found";
    case ErrorCode::Catalog:
      return "catalog";
  }
  return "unknown";
}

namespace {

std::string positioned(std::size_t line, const std::string& message) {
  if (line == 0) {
    return "end of input: " + message;
  }
  return "line " + std::to_string(line) + ": " + message;
}

} // namespace

ParseError::ParseError(Kind kind, std::size_t line, const std::string& message)
    : Error(ErrorCode::Parse, positioned(line, message)), kind_(kind), line_(line),
      detail_(message) {}

ParseError::ParseError(Kind kind, std::size_t line, const std::string& detail,
                       const std::string& full)
    : Error(ErrorCode::Parse, full), kind_(kind), line_(line), detail_(detail) {}

ParseError ParseError::inSource(const std::string& source) const {
  return ParseError(kind_, line_, detail_, source + ": " + positioned(line_, detail_));
}

} // namespace avf
