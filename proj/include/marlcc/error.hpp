#pragma once

#include <stdexcept>
#include <string>

namespace marlcc {

/// Base class for all recoverable errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or inconsistent configuration (maps to CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A dynamics evaluator produced NaN/Inf during integration.
class IntegrationError : public Error {
public:
    using Error::Error;
};

/// Requested Lie-derivative order exceeds the supported maximum.
class OrderLimitError : public Error {
public:
    using Error::Error;
};

/// No relative degree r <= n exists at the queried state.
class RelativeDegreeError : public Error {
public:
    using Error::Error;
};

/// Decoupling matrix is singular (condition number above threshold).
class SingularDecouplingError : public Error {
public:
    using Error::Error;
};

/// Covariance or model matrix fails a structural requirement (e.g. SPD).
class ModelConfigError : public Error {
public:
    using Error::Error;
};

/// Beliefs passed to fuse() do not share a common support.
class FusionSupportError : public Error {
public:
    using Error::Error;
};

/// An observation has zero likelihood under every hypothesis.
class ImpossibleObservationError : public Error {
public:
    using Error::Error;
};

/// Game or neighborhood too large for the requested method.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Tensor/vector dimensions do not match the declared layout.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Counterfactual evaluation requested without a usable snapshot.
class CounterfactualUnavailableError : public Error {
public:
    using Error::Error;
};

/// Could not place agents without violating the safety distance.
class PlacementError : public Error {
public:
    using Error::Error;
};

}  // namespace marlcc
