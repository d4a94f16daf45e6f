#pragma once

#include <stdexcept>
#include <string>

namespace daeflow {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed expression construction (bad arity, zero denominator, NaN constant).
struct ConstructionError : Error {
    using Error::Error;
};

// Textual input (expression strings or model files) that does not parse.
struct ParseError : Error {
    ParseError(const std::string& msg, int line_no = -1)
        : Error(line_no >= 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
          line(line_no) {}
    int line;
};

// Symbolic differentiation hit a node without a derivative rule.
struct DerivativeError : Error {
    using Error::Error;
};

// evaluate() was asked for a symbol the environment does not bind.
struct UnboundSymbolError : Error {
    using Error::Error;
};

// Domain violation during numeric evaluation (log of a non-positive value,
// division by zero, non-finite intermediate).
struct EvalDomainError : Error {
    using Error::Error;
};

// System assembly problems: duplicate names after flattening, a symbol used
// both as parameter and differentiated state, mismatched independent variables.
struct SystemError : Error {
    using Error::Error;
};

// Structural analysis failures: unsatisfiable constants, singular structure,
// no perfect matching where one is required.
struct StructuralError : Error {
    using Error::Error;
};

// An equation reduced to a nonzero constant residual.
struct ContradictionError : StructuralError {
    using StructuralError::StructuralError;
};

// Index reduction or matching detected a structurally singular system.
struct SingularSystemError : StructuralError {
    using StructuralError::StructuralError;
};

// Runtime failure inside a compiled right-hand side.
struct RuntimeSolveError : Error {
    using Error::Error;
};

// Newton iteration on an algebraic block failed to converge.
struct NewtonFailure : RuntimeSolveError {
    using RuntimeSolveError::RuntimeSolveError;
};

// A recorded solvability precondition (nonzero pivot) was violated at runtime.
struct PreconditionViolation : RuntimeSolveError {
    using RuntimeSolveError::RuntimeSolveError;
};

// Host-function tracing hit a construct outside the quasi-static subset.
struct TraceError : Error {
    using Error::Error;
};

// Surrogate training/prediction misuse (query outside the sampled box,
// malformed archive).
struct SurrogateError : Error {
    using Error::Error;
};

} // namespace daeflow
