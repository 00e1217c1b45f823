#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace twistenv {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// f(z) dropped to (or below) the turning-point threshold.
class TurningPoint : public Error {
  public:
    TurningPoint(double z_dimless, double f_value)
        : Error("turning point: f(z~=" + std::to_string(z_dimless) + ") = " + std::to_string(f_value) +
                " MeV^2 is below the threshold"),
          z_dimless_(z_dimless) {}
    double z_dimless() const { return z_dimless_; }

  private:
    double z_dimless_;
};

/// Adaptive controller could not meet the tolerance above the minimum step.
class StepFailure : public Error {
  public:
    using Error::Error;
};

/// B_z vanishes everywhere and no reference field was supplied.
class MissingReferenceField : public Error {
  public:
    MissingReferenceField()
        : Error("magnetic field vanishes on the whole lattice; supply a reference field (bz_ref)") {}
};

/// Argument outside the domain of a closed-form expression.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Input that violates a documented precondition (lengths, ordering, ...).
class InvalidInput : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

class SemanticError : public ParseError {
  public:
    using ParseError::ParseError;
};

class NonMonotoneZ : public ParseError {
  public:
    using ParseError::ParseError;
};

}  // namespace twistenv
