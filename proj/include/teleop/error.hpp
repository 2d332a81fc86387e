#ifndef TELEOP_ERROR_HPP
#define TELEOP_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace teleop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A spec or configuration violates its invariants.
class InvalidSpec : public Error {
public:
    using Error::Error;
};

/// coupling_torques() was asked about a rigid transmission, which the engine
/// integrates as a single merged inertia instead.
class RigidVariant : public Error {
public:
    RigidVariant()
        : Error("rigid transmission has no coupling torque; use rigid_constraint") {}
};

/// Shafts that should be rigidly coupled are not coincident.
class ConstraintViolation : public Error {
public:
    using Error::Error;
};

/// Integration produced a non-finite state.
class Diverged : public Error {
public:
    explicit Diverged(std::size_t tick)
        : Error("simulation diverged (non-finite state) at tick " + std::to_string(tick)),
          tick_(tick) {}

    std::size_t tick() const noexcept { return tick_; }

private:
    std::size_t tick_;
};

/// Identification regressors are (numerically) linearly dependent.
class RankDeficient : public Error {
public:
    using Error::Error;
};

/// Identified discrete poles lie on or outside the unit circle, or have no
/// continuous-time counterpart.
class UnstableFit : public Error {
public:
    using Error::Error;
};

class ConstantSignal : public Error {
public:
    using Error::Error;
};

class DegenerateSample : public Error {
public:
    using Error::Error;
};

class InsufficientReversals : public Error {
public:
    using Error::Error;
};

/// A log or model file does not match the documented schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Input data does not satisfy an operation's precondition.
class InvalidData : public Error {
public:
    using Error::Error;
};

}  // namespace teleop

#endif  // TELEOP_ERROR_HPP
