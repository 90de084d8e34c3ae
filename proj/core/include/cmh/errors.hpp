#pragma once

#include <stdexcept>
#include <string>

namespace cmh {

/// Broad error classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  kConfig,     // bad user-supplied configuration (exit code 2)
  kData,       // malformed or missing input data (exit code 3)
  kProtocol,   // API misuse: stepping a finished episode, masked actions, ...
  kNumeric,    // non-finite values in training
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CMH_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(Kind, what) {}    \
  };

CMH_DEFINE_ERROR(ParseError, ErrorKind::kData)
CMH_DEFINE_ERROR(EmptyInputError, ErrorKind::kData)
CMH_DEFINE_ERROR(MissingNodeError, ErrorKind::kData)
CMH_DEFINE_ERROR(SelfLoopError, ErrorKind::kData)
CMH_DEFINE_ERROR(IneligibleTargetError, ErrorKind::kData)
CMH_DEFINE_ERROR(SamplingError, ErrorKind::kData)
CMH_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
CMH_DEFINE_ERROR(InvalidActionError, ErrorKind::kProtocol)
CMH_DEFINE_ERROR(ProtocolError, ErrorKind::kProtocol)
CMH_DEFINE_ERROR(ExhaustedError, ErrorKind::kProtocol)
CMH_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
CMH_DEFINE_ERROR(IoError, ErrorKind::kIo)

#undef CMH_DEFINE_ERROR

}  // namespace cmh
