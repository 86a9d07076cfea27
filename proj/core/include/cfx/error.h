#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfx {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kNotFound,
  kNothingToExplain,
  kDegenerateLabels,
  kIllConditioned,
  kNonFinite,
  kSchemaMismatch,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI and the HTTP layer can map it to exit codes / status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cfx
