#pragma once

#include <stdexcept>
#include <string>

namespace dissipath {

/// Base class for every failure this library reports by exception.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

#define DISSIPATH_DEFINE_ERROR(Name)                                       \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& message) : Error(message) {}      \
    }

DISSIPATH_DEFINE_ERROR(DimensionMismatch);        // sizes of inputs disagree
DISSIPATH_DEFINE_ERROR(NotPositiveDefinite);      // quadratic form / generator fails convexity
DISSIPATH_DEFINE_ERROR(DomainViolation);          // point outside the evaluation domain
DISSIPATH_DEFINE_ERROR(SingularHessian);          // metric factorization failed
DISSIPATH_DEFINE_ERROR(AtCriticalPoint);          // gradient below tolerance, direction undefined
DISSIPATH_DEFINE_ERROR(RankDeficient);            // basis / chart Jacobian loses rank
DISSIPATH_DEFINE_ERROR(NonTransversal);           // manifold tangent to a level set of H
DISSIPATH_DEFINE_ERROR(BadRateMatrix);            // kinetic matrix violates rate-matrix structure
DISSIPATH_DEFINE_ERROR(NotATree);                 // node/arc data is not a tree
DISSIPATH_DEFINE_ERROR(MonotonicityFloorViolated);// arc derivative of H dropped below the floor
DISSIPATH_DEFINE_ERROR(NoWitness);                // no usable direction for a counterexample
DISSIPATH_DEFINE_ERROR(ParseError);               // configuration text cannot be understood
DISSIPATH_DEFINE_ERROR(IoError);                  // file cannot be read or written

#undef DISSIPATH_DEFINE_ERROR

}  // namespace dissipath
