#pragma once

#include <stdexcept>
#include <string>

namespace lamf {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- value construction / parsing ----------------------------------------

struct ParseError : Error {
    using Error::Error;
};

struct ZeroDenominator : Error {
    using Error::Error;
};

struct NonPositiveEntry : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// -- laminate construction ------------------------------------------------

struct BadIndex : Error {
    using Error::Error;
};

struct NonConvexSplit : Error {
    using Error::Error;
};

struct RootMismatch : Error {
    using Error::Error;
};

struct InvalidLaminate : Error {
    using Error::Error;
};

// -- spectral sets and staircase recursion --------------------------------

struct InvalidParams : Error {
    using Error::Error;
};

struct AmbiguousMembership : Error {
    using Error::Error;
};

struct UnsupportedRegime : Error {
    using Error::Error;
};

struct MembershipViolation : Error {
    using Error::Error;
};

struct CounterViolation : Error {
    using Error::Error;
};

struct MassBoundViolation : Error {
    using Error::Error;
};

// -- analysis ---------------------------------------------------------------

struct InsufficientPoints : Error {
    using Error::Error;
};

}  // namespace lamf
