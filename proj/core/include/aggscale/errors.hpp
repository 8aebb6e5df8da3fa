#pragma once

#include <stdexcept>
#include <string>

namespace aggscale {

/// Caller passed parameters outside the admissible window. The CLI maps these
/// to exit code 2.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation ran but could not produce a trustworthy result. The CLI maps
/// these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RegimeViolation : public InputError {
public:
    using InputError::InputError;
};

class OutOfDomain : public InputError {
public:
    using InputError::InputError;
};

class BelowLimit : public InputError {
public:
    using InputError::InputError;
};

class TooFewTerms : public InputError {
public:
    using InputError::InputError;
};

class InconsistentDelta : public InputError {
public:
    using InputError::InputError;
};

class WindowTooEarly : public InputError {
public:
    using InputError::InputError;
};

class NoBracket : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ResidualBlowup : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InsufficientDecay : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class BracketFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class HorizonExhausted : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NegativeConcentration : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// psi reached zero while marching. `location` is in the marching variable.
class NegativeCrossing : public NumericalError {
public:
    explicit NegativeCrossing(double location)
        : NumericalError("solution crosses zero at " + std::to_string(location)),
          location_(location) {}

    [[nodiscard]] double location() const noexcept { return location_; }

private:
    double location_;
};

}  // namespace aggscale
