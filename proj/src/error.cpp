#include "textspot/error.hpp"

namespace textspot {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorCode::kInsufficientBigrams: return "InsufficientBigrams";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kCoverageUnreachable: return "CoverageUnreachable";
    case ErrorCode::kSealedStore: return "SealedStore";
    case ErrorCode::kEmptyStore: return "EmptyStore";
    case ErrorCode::kNotSealed: return "NotSealed";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kConfigMismatch: return "ConfigMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kEmptyLexicon: return "EmptyLexicon";
    case ErrorCode::kLexiconTooSmall: return "LexiconTooSmall";
    case ErrorCode::kEmptyRelevantSet: return "EmptyRelevantSet";
    case ErrorCode::kEmptyQueryList: return "EmptyQueryList";
  }
  return "Unknown";
}

}  // namespace textspot
