#pragma once

#include <stdexcept>
#include <string>

namespace pmcqa {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   ConfigError / ArgumentError / FamilyError -> exit 2
//   FormatError / LinkError / IoError         -> exit 3
//   NumericError                              -> exit 4
//   anything else                             -> exit 1
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file content (bad field counts, unparsable numbers, ...).
struct FormatError : Error { using Error::Error; };

// Cross-file references that do not resolve (triplet image id without a feature row, ...).
struct LinkError : Error { using Error::Error; };

// A caller broke a documented precondition.
struct ArgumentError : Error { using Error::Error; };

// Unreadable or unwritable paths.
struct IoError : Error { using Error::Error; };

// Configuration file problems (unknown key, bad value, missing required key).
struct ConfigError : Error { using Error::Error; };

// Non-finite values where finite ones are required.
struct NumericError : Error { using Error::Error; };

// An operation was asked of a checkpoint family that does not support it.
struct FamilyError : Error { using Error::Error; };

// Internal consistency violation (stale caches, mismatched shapes inside the library).
struct ContractError : Error { using Error::Error; };

}  // namespace pmcqa
