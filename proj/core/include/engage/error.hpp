#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace engage {

// Every failure surfaced by the library carries one of these codes. The CLI
// prints the kebab-case name so callers can parse it.
enum class ErrorCode {
  kInvalidArgument,
  kInvalidBand,
  kTooShort,
  kFlatSignal,
  kEmptyInput,
  kShape,
  kDegeneratePairs,
  kInvalidWindow,
  kInvalidCount,
  kDivergence,
  kInsufficientPeaks,
  kInsufficientData,
  kInsufficientDuration,
  kDegenerateSpectrum,
  kSchema,
  kParse,
  kInvalidSet,
  kInvalidK,
  kStratification,
  kInvalidConfig,
  kInvalidSpec,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace engage
