#pragma once

#include <stdexcept>
#include <string>

namespace segrank {

/// Base class for all errors raised by this library. Input problems
/// (malformed files, schema violations) and contract violations both
/// derive from it so callers can catch one type at the CLI boundary.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- volume I/O ---
struct BadMagic : Error { using Error::Error; };
struct UnsupportedDatatype : Error { using Error::Error; };
struct NonIntegralLabels : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };
struct TruncatedStream : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };

// --- metrics ---
struct UnknownLabel : Error { using Error::Error; };
struct DimMismatch : Error { using Error::Error; };
struct SpacingMismatch : Error { using Error::Error; };
struct BothEmpty : Error { using Error::Error; };
struct EitherEmpty : Error { using Error::Error; };
struct EmptyMask : Error { using Error::Error; };
struct EmptySurface : Error { using Error::Error; };
struct EmptySet : Error { using Error::Error; };
struct EmptyReference : Error { using Error::Error; };

// --- ranking ---
struct AllMissing : Error { using Error::Error; };
struct EmptyRecords : Error { using Error::Error; };
struct TeamSetMismatch : Error { using Error::Error; };
struct EmptySubset : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };

// --- stats ---
struct NoCases : Error { using Error::Error; };
struct DegenerateCategories : Error { using Error::Error; };
struct EmptySample : Error { using Error::Error; };

// --- cohort ---
struct ParseError : Error { using Error::Error; };
struct DuplicateCase : Error { using Error::Error; };
struct EmptySplit : Error { using Error::Error; };

// --- reporting / orchestration ---
struct MissingInput : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };

} // namespace segrank
