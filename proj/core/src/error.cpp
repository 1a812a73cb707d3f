#include "engage/error.hpp"

namespace engage {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidBand: return "invalid-band";
    case ErrorCode::kTooShort: return "too-short";
    case ErrorCode::kFlatSignal: return "flat-signal";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kDegeneratePairs: return "degenerate-pairs";
    case ErrorCode::kInvalidWindow: return "invalid-window";
    case ErrorCode::kInvalidCount: return "invalid-count";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kInsufficientPeaks: return "insufficient-peaks";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kInsufficientDuration: return "insufficient-duration";
    case ErrorCode::kDegenerateSpectrum: return "degenerate-spectrum";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kInvalidSet: return "invalid-set";
    case ErrorCode::kInvalidK: return "invalid-k";
    case ErrorCode::kStratification: return "stratification";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kInvalidSpec: return "invalid-spec";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

}  // namespace engage
