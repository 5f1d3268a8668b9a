#pragma once

#include <stdexcept>
#include <string>

namespace traceforms {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TRACEFORMS_DEFINE_ERROR(Name)            \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

// Generic precondition failure (bad shapes, out-of-range arguments).
TRACEFORMS_DEFINE_ERROR(InvalidInput);

// chain validation
TRACEFORMS_DEFINE_ERROR(SymmetryViolation);
TRACEFORMS_DEFINE_ERROR(NegativeRate);
TRACEFORMS_DEFINE_ERROR(NotIrreducible);
TRACEFORMS_DEFINE_ERROR(ParseError);

// exact linear algebra on chains
TRACEFORMS_DEFINE_ERROR(SingularKilledGenerator);
TRACEFORMS_DEFINE_ERROR(NotExcessive);
TRACEFORMS_DEFINE_ERROR(NonMarkovTrace);
TRACEFORMS_DEFINE_ERROR(IdentityViolation);
TRACEFORMS_DEFINE_ERROR(NonPositiveDensity);
TRACEFORMS_DEFINE_ERROR(EmptyTraceSet);
TRACEFORMS_DEFINE_ERROR(DegenerateGrid);

// Monte Carlo
TRACEFORMS_DEFINE_ERROR(InsufficientEvents);
TRACEFORMS_DEFINE_ERROR(MaxStepsExceeded);

// sphere
TRACEFORMS_DEFINE_ERROR(PointOnBoundary);
TRACEFORMS_DEFINE_ERROR(PointInsideOrOn);
TRACEFORMS_DEFINE_ERROR(CoincidentPoints);
TRACEFORMS_DEFINE_ERROR(UnresolvedExpansion);
TRACEFORMS_DEFINE_ERROR(QuadratureTooCoarse);
TRACEFORMS_DEFINE_ERROR(AlphaOutOfRange);
TRACEFORMS_DEFINE_ERROR(MissingFellerData);

// runner
TRACEFORMS_DEFINE_ERROR(ConfigError);
TRACEFORMS_DEFINE_ERROR(IoError);

#undef TRACEFORMS_DEFINE_ERROR

} // namespace traceforms
