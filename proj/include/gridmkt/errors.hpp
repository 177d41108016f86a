#pragma once

#include <stdexcept>
#include <string>

namespace gridmkt {

// Bad scenario parameters (negative limits, inverted SoC window, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (index out of range, shape mismatch).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// An internal invariant failed, e.g. SoC left its window after integration.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Generators cannot balance the residual demand in a slot.
class InfeasibleDispatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NaN/Inf reached a gradient, TD target or loss.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed profile CSV or config document.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { Io, Corrupt, VersionMismatch, DigestMismatch };

    CheckpointError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace gridmkt
