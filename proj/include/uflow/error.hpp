#pragma once

#include <stdexcept>
#include <string>

namespace uflow {

// Every failure mode surfaced by the toolkit carries one of these codes so
// callers (and the CLI exit-code mapping) can tell them apart.
enum class ErrorCode {
  MissingFile,
  MalformedRaster,
  UnsupportedBitDepth,
  NotFloFile,
  SizeMismatch,
  Unwritable,
  NonFinite,
  DimensionMismatch,
  BadConfig,
  PyramidTooDeep,
  StaleActivations,
  NanLoss,
  MissingCheckpoint,
  ExistingOutput,
  BadArgument,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace uflow
