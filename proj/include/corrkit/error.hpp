#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corrkit {

enum class ErrorCode {
  InvalidArgument,
  InvalidDepth,
  PointAtInfinity,
  DegenerateTranslation,
  RankDeficient,
  NoValidCandidate,
  DegenerateConfiguration,
  InsufficientMatches,
  NoModelFound,
  MismatchedPair,
  ChainMismatch,
  ParseError,
  IoError,
  NoValidDepth,
  EmptyErrors,
  IncompleteGrid,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace corrkit
