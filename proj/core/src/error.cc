#include "cfx/error.h"

namespace cfx {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kParse:
      return "parse_error";
    case ErrorCode::kNotFound:
      return "not_found";
    case ErrorCode::kNothingToExplain:
      return "nothing_to_explain";
    case ErrorCode::kDegenerateLabels:
      return "degenerate_labels";
    case ErrorCode::kIllConditioned:
      return "ill_conditioned";
    case ErrorCode::kNonFinite:
      return "non_finite";
    case ErrorCode::kSchemaMismatch:
      return "schema_mismatch";
    case ErrorCode::kIo:
      return "io_error";
  }
  return "unknown";
}

}  // namespace cfx
