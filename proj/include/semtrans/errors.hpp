#pragma once

#include <stdexcept>
#include <string>

#include "semtrans/sexpr.hpp"

namespace semtrans {

// Errors found while reading or validating a program.
struct SyntaxError : std::runtime_error {
    SrcPos pos;
    SyntaxError(const std::string& msg, SrcPos p = {})
        : std::runtime_error(p.known() ? p.str() + ": " + msg : msg), pos(p) {}
};

struct MissingMainError : SyntaxError {
    using SyntaxError::SyntaxError;
};

struct UnannotatedMainError : SyntaxError {
    using SyntaxError::SyntaxError;
};

struct DuplicateNameError : SyntaxError {
    using SyntaxError::SyntaxError;
};

// Raised by the control-flow analysis (undeclared main parameter type, or a
// non-ANF input).
struct AnalysisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised by the selective transformations when the analysis result does not
// permit a consistent treatment of a call site.
struct TransformError : std::runtime_error {
    int label = -1;
    SrcPos pos;
    TransformError(const std::string& msg, int l, SrcPos p)
        : std::runtime_error(msg), label(l), pos(p) {}
    explicit TransformError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MixedAtomicityError : TransformError {
    using TransformError::TransformError;
};

struct MixedDefunError : TransformError {
    using TransformError::TransformError;
};

struct ArityConflictError : TransformError {
    using TransformError::TransformError;
};

struct DuplicateConstructorError : TransformError {
    using TransformError::TransformError;
};

}  // namespace semtrans
