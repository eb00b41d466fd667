#ifndef TEXTSPOT_ERROR_HPP
#define TEXTSPOT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace textspot {

// Numeric values are mirrored by ts_status in textspot.h; keep them in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kEmptyAfterNormalization = 2,
  kInsufficientBigrams = 3,
  kDimensionMismatch = 4,
  kShapeMismatch = 5,
  kCoverageUnreachable = 6,
  kSealedStore = 7,
  kEmptyStore = 8,
  kNotSealed = 9,
  kIoFailure = 10,
  kVersionMismatch = 11,
  kCorruptIndex = 12,
  kConfigMismatch = 13,
  kParseError = 14,
  kEmptyLexicon = 15,
  kLexiconTooSmall = 16,
  kEmptyRelevantSet = 17,
  kEmptyQueryList = 18,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by line-oriented loaders; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParseError,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace textspot

#endif  // TEXTSPOT_ERROR_HPP
