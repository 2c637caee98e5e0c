#pragma once

#include <stdexcept>
#include <string>

namespace aad {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric parameter or shape argument is outside its valid domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A signal is too short for the requested operation.
class LengthError : public Error {
public:
    using Error::Error;
};

/// A signal has zero variance where a non-constant one is required.
class DegenerateSignalError : public Error {
public:
    using Error::Error;
};

/// Pearson correlation on a constant input.
class DegenerateCorrelationError : public Error {
public:
    using Error::Error;
};

/// A linear system is singular (unregularized and rank deficient).
class SingularityError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Operation called on an object in the wrong mode (e.g. gradients in eval mode).
class StateError : public Error {
public:
    using Error::Error;
};

class DegenerateTestError : public Error {
public:
    using Error::Error;
};

class DegenerateClassifierError : public Error {
public:
    using Error::Error;
};

/// All inner-fold scores were degenerate during hyperparameter tuning.
class TuningError : public Error {
public:
    using Error::Error;
};

/// Missing or inconsistent files on disk; the message carries the path.
class IngestionError : public Error {
public:
    using Error::Error;
};

} // namespace aad
