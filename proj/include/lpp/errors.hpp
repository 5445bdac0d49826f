#pragma once

#include <stdexcept>
#include <string>

namespace lpp {

// Bad user-supplied parameters. Maps to CLI exit code 2.
class InvalidParameters : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Parameters on a singular set of a formula (r = s, rs = 1, ...).
class DegenerateParams : public InvalidParameters {
public:
    using InvalidParameters::InvalidParameters;
};

// No contour satisfies the required radius ordering.
class ContourInfeasible : public InvalidParameters {
public:
    using InvalidParameters::InvalidParameters;
};

// A quadrature, truncation or extrapolation did not reach its tolerance.
// Maps to CLI exit code 3.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}
    double achieved() const { return achieved_; }

private:
    double achieved_;
};

class QuadratureNotConverged : public NonConvergence {
public:
    using NonConvergence::NonConvergence;
};

class TruncationNotConverged : public NonConvergence {
public:
    using NonConvergence::NonConvergence;
};

class ExtrapolationUnstable : public NonConvergence {
public:
    using NonConvergence::NonConvergence;
};

class SingularMatrix : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A self-check failed (e.g. a dual representation disagreed). Exit code 1.
class VerificationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lpp
