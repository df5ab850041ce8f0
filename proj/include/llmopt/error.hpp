#pragma once

#include <stdexcept>
#include <string>

namespace llmopt {

enum class ErrorCode {
  InvalidArgument = 1,
  ArityMismatch,
  GridTooLarge,
  NoGroundTruth,
  UndefinedMetric,
  Parse,
  ScriptExhausted,
  Transport,
  Protocol,
  Config,
  Io,
};

// Every error raised by the library carries one of the codes above so the
// C API can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace llmopt
