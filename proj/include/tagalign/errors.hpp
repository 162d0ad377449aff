#pragma once

#include <stdexcept>
#include <string>

namespace tagalign {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry / matching
struct DimensionMismatch : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct EmptyTargets : Error { using Error::Error; };
struct KindMismatch : Error { using Error::Error; };

// ingest
struct BadLength : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct MalformedHeader : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct TruncatedBody : Error { using Error::Error; };
struct DuplicatePointId : Error { using Error::Error; };
struct MalformedJson : Error { using Error::Error; };
struct MissingField : Error { using Error::Error; };
struct BadArity : Error { using Error::Error; };
struct NegativeFeatureId : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct TruncatedPayload : Error { using Error::Error; };
struct ZeroDimension : Error { using Error::Error; };

struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  std::size_t line_number;
};

// tag localization / alignment
struct InsufficientSupport : Error { using Error::Error; };
struct TooFewCorrespondences : Error { using Error::Error; };
struct DegenerateConfiguration : Error { using Error::Error; };
struct NotASimilarity : Error { using Error::Error; };

// synth / cli
struct ConfigInvalid : Error { using Error::Error; };

}  // namespace tagalign
