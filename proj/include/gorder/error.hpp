#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gorder {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input problems: malformed expressions, bad parameters, schema violations.
class InputError : public Error {
public:
    using Error::Error;
};

/// Numerical failures inside a solver.
class SolverError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public InputError {
public:
    SyntaxError(std::size_t offset, const std::string& message)
        : InputError(std::to_string(offset) + ":" + message), offset_(offset), message_(message) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::size_t offset_;
    std::string message_;
};

class UnknownIdentifier : public InputError {
public:
    UnknownIdentifier(std::size_t offset, const std::string& name)
        : InputError(std::to_string(offset) + ":unknown identifier '" + name + "'"), offset_(offset), name_(name) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& name() const noexcept { return name_; }

private:
    std::size_t offset_;
    std::string name_;
};

class MissingBinding : public InputError {
public:
    explicit MissingBinding(const std::string& name)
        : InputError("missing binding for variable '" + name + "'"), name_(name) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

/// A non-finite intermediate value. `subexpression()` is the printed form of
/// the node that produced it.
class NonFinite : public SolverError {
public:
    NonFinite(const std::string& subexpression, const std::string& context = {})
        : SolverError("non-finite value in '" + subexpression + "'" + (context.empty() ? "" : " (" + context + ")")),
          subexpression_(subexpression) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

class ZeroScale : public InputError {
public:
    ZeroScale() : InputError("generator scale factor must be non-zero") {}
};

class PreconditionViolation : public InputError {
public:
    using InputError::InputError;
};

/// Scenario parameter constraint failed; `constraint()` names it.
class ParameterViolation : public InputError {
public:
    ParameterViolation(const std::string& constraint, const std::string& detail)
        : InputError("parameter violation (" + constraint + "): " + detail), constraint_(constraint) {}

    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

class GridTooCoarse : public SolverError {
public:
    using SolverError::SolverError;
};

class OutOfGrid : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace gorder
