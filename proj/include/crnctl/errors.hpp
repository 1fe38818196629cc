#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crnctl {

/// A single problem found in an input, tied to the block or wire it concerns.
struct Diagnostic {
    std::string subject;
    std::string message;
};

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string join_diagnostics(const std::string &head, const std::vector<Diagnostic> &diags) {
    std::string out = head;
    for (const auto &d : diags) {
        out += "\n  [" + d.subject + "] " + d.message;
    }
    return out;
}
} // namespace detail

/// Raised when an input document is not shaped like a design document at all.
class SchemaError : public Error {
  public:
    explicit SchemaError(std::vector<Diagnostic> diags)
        : Error(detail::join_diagnostics("malformed design document", diags)), diagnostics_(std::move(diags)) {}
    SchemaError(const std::string &subject, const std::string &message)
        : SchemaError(std::vector<Diagnostic>{{subject, message}}) {}
    const std::vector<Diagnostic> &diagnostics() const noexcept { return diagnostics_; }

  private:
    std::vector<Diagnostic> diagnostics_;
};

/// Raised when a well-formed document breaks a diagram invariant. Carries every violation.
class ValidationError : public Error {
  public:
    explicit ValidationError(std::vector<Diagnostic> diags)
        : Error(detail::join_diagnostics("invalid block diagram", diags)), diagnostics_(std::move(diags)) {}
    ValidationError(const std::string &subject, const std::string &message)
        : ValidationError(std::vector<Diagnostic>{{subject, message}}) {}
    const std::vector<Diagnostic> &diagnostics() const noexcept { return diagnostics_; }

  private:
    std::vector<Diagnostic> diagnostics_;
};

class MissingRate : public Error {
  public:
    explicit MissingRate(const std::string &symbol) : Error("missing rate: " + symbol), symbol_(symbol) {}
    const std::string &symbol() const noexcept { return symbol_; }

  private:
    std::string symbol_;
};

class UnsupportedBlock : public Error {
  public:
    using Error::Error;
};

class UnknownRate : public Error {
  public:
    explicit UnknownRate(const std::string &name) : Error("unknown rate name: " + name), name_(name) {}
    const std::string &name() const noexcept { return name_; }

  private:
    std::string name_;
};

class NotIrreducible : public Error {
  public:
    using Error::Error;
};

/// Iterative solver gave up. `detail` holds the last iterate summary.
class NoConvergence : public Error {
  public:
    NoConvergence(const std::string &what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

class StepUnderflow : public Error {
  public:
    StepUnderflow(double t, std::vector<double> state, const std::string &reason = "step size underflow")
        : Error(reason + " at t=" + std::to_string(t) + " s"), t_(t), state_(std::move(state)) {}
    double time() const noexcept { return t_; }
    const std::vector<double> &state() const noexcept { return state_; }

  private:
    double t_;
    std::vector<double> state_;
};

class UnsupportedReaction : public Error {
  public:
    using Error::Error;
};

} // namespace crnctl
