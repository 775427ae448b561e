#pragma once

#include <stdexcept>
#include <string>

namespace asd {

// Base for everything the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

// Iteration failed to converge or a non-finite value appeared.
class NumericalError : public Error {
public:
    using Error::Error;
};

// A derivative evaluation produced NaN/Inf. `time()` is the evaluation time.
class NumericalBlowup : public NumericalError {
public:
    NumericalBlowup(const std::string& what, double t) : NumericalError(what), time_(t) {}
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

// A configuration gate failed. `check()` names the gate.
class ConfigurationError : public Error {
public:
    ConfigurationError(std::string check, const std::string& what)
        : Error(what), check_(std::move(check)) {}
    [[nodiscard]] const std::string& check() const noexcept { return check_; }

private:
    std::string check_;
};

// Gain synthesis produced a non-Hurwitz augmented matrix.
class SynthesisError : public Error {
public:
    SynthesisError(const std::string& what, double margin) : Error(what), margin_(margin) {}
    [[nodiscard]] double margin() const noexcept { return margin_; }

private:
    double margin_;
};

}  // namespace asd
