#pragma once

#include <stdexcept>

namespace planrisk {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad caller-supplied parameter (zero grid, region id outside partition, ...).
struct ArgumentError : Error { using Error::Error; };
// Unrecognized file header or layout.
struct FormatError : Error { using Error::Error; };
// Payload shorter or longer than the declared dimensions.
struct TruncationError : Error { using Error::Error; };
// Content violates a documented invariant (NaN payload, duplicate sample id, ...).
struct ValidationError : Error { using Error::Error; };
// All-zero saliency mass; the sample is flagged and excluded downstream.
struct ZeroMassError : Error { using Error::Error; };
// Unusable fit input: all rows masked, single-class labels.
struct DataError : Error { using Error::Error; };
// External planner I/O failure after the retry budget.
struct TransportError : Error { using Error::Error; };

}  // namespace planrisk
