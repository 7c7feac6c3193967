#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace dpm {

/// Violated precondition on an in-memory API call (dimension mismatch,
/// non-finite input, invalid configuration value).
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// Input file failed schema or domain validation; message cites the
/// offending row / customer id where known.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Every particle weight underflowed to zero while absorbing an observation.
class DegenerateLikelihood : public std::runtime_error {
public:
    explicit DegenerateLikelihood(const std::string& what, std::optional<int> day = {})
        : std::runtime_error(what), day_(day) {}
    std::optional<int> day() const { return day_; }

private:
    std::optional<int> day_;
};

/// Regression design that cannot be fit (single label class, no rows).
class DegenerateDesign : public std::runtime_error {
public:
    explicit DegenerateDesign(const std::string& what) : std::runtime_error(what) {}
};

/// Offset calibration could not reach the target rate inside the bracket.
class CalibrationError : public std::runtime_error {
public:
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dpm
