#ifndef GRAFT_ERROR_HPP
#define GRAFT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace graft {

enum class ErrorCode {
    kNotFound,
    kFormat,
    kValidation,
    kIo,
    kDomain,
    kShape,
    kBehindCamera,
    kOutOfRange,
    kCoverage,
    kPairing,
    kConfig,
    kNoReference,
    kInsufficientData,
    kInternal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

#define GRAFT_DEFINE_ERROR(Name, Code)                             \
    class Name : public Error {                                    \
      public:                                                      \
        explicit Name(const std::string& msg) : Error(Code, msg) {} \
    }

GRAFT_DEFINE_ERROR(NotFoundError, ErrorCode::kNotFound);
GRAFT_DEFINE_ERROR(FormatError, ErrorCode::kFormat);
GRAFT_DEFINE_ERROR(ValidationError, ErrorCode::kValidation);
GRAFT_DEFINE_ERROR(IoError, ErrorCode::kIo);
GRAFT_DEFINE_ERROR(DomainError, ErrorCode::kDomain);
GRAFT_DEFINE_ERROR(ShapeError, ErrorCode::kShape);
GRAFT_DEFINE_ERROR(BehindCameraError, ErrorCode::kBehindCamera);
GRAFT_DEFINE_ERROR(OutOfRangeError, ErrorCode::kOutOfRange);
GRAFT_DEFINE_ERROR(CoverageError, ErrorCode::kCoverage);
GRAFT_DEFINE_ERROR(PairingError, ErrorCode::kPairing);
GRAFT_DEFINE_ERROR(ConfigError, ErrorCode::kConfig);
GRAFT_DEFINE_ERROR(NoReferenceError, ErrorCode::kNoReference);
GRAFT_DEFINE_ERROR(InsufficientDataError, ErrorCode::kInsufficientData);

#undef GRAFT_DEFINE_ERROR

}  // namespace graft

#endif  // GRAFT_ERROR_HPP
