#pragma once

#include <stdexcept>
#include <string>

namespace mstcn {

// Error taxonomy. The CLI maps these onto stable exit codes:
//   InvalidArgument -> 2 (usage), FormatError and subclasses -> 3 (format),
//   ContractError -> 4 (contract), DivergedError -> 5 (diverged).

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller passed an out-of-domain value (bad dilation, bad config field, ...).
struct InvalidArgument : Error {
    using Error::Error;
};

// An input file or stream is malformed.
struct FormatError : Error {
    using Error::Error;
};

// A value references a name outside the declared class schema.
struct SchemaError : FormatError {
    using FormatError::FormatError;
};

// Inferred sample rate disagrees with the configured rate.
struct RateError : FormatError {
    using FormatError::FormatError;
};

// Label events overlap.
struct OverlapError : FormatError {
    using FormatError::FormatError;
};

// Synthesis spec cannot be satisfied (event packing infeasible, ...).
struct SpecError : FormatError {
    using FormatError::FormatError;
};

// Shape/channel contract between tensors or between model and data broken.
struct ContractError : Error {
    using Error::Error;
};

// Training loss became non-finite.
struct DivergedError : Error {
    using Error::Error;
};

// grad_check preconditions violated (non-deterministic objective, ...).
struct CheckInvalidError : Error {
    using Error::Error;
};

}  // namespace mstcn
