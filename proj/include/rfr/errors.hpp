#pragma once

#include <stdexcept>
#include <string>

namespace rfr {

// Argument outside the mathematical domain of an operation (e.g. t > T).
class DomainError : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

// Quadrature or ODE integration failed to reach its target accuracy.
class NumericalError : public std::runtime_error {
   public:
    NumericalError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

   private:
    double achieved_;
};

// Market/path data required by an operation is missing or inconsistent.
class DataError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Invalid scenario, grid or instrument configuration.
class ConfigError : public std::runtime_error {
   public:
    ConfigError(const std::string& what, std::string field = {})
        : std::runtime_error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

   private:
    std::string field_;
};

// Curve fitting could not bracket or solve for a bucket value.
class CalibrationError : public std::runtime_error {
   public:
    CalibrationError(const std::string& what, std::size_t pillar)
        : std::runtime_error(what), pillar_(pillar) {}
    std::size_t pillar() const noexcept { return pillar_; }

   private:
    std::size_t pillar_;
};

// Operation is not defined for the requested configuration.
class UnsupportedError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace rfr
