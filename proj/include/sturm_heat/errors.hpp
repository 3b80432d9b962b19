#ifndef STURM_HEAT_ERRORS_HPP
#define STURM_HEAT_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace sturm_heat {

/// Malformed or out-of-range configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a valid result. Maps to exit code 3.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Root bracket without a sign change; the caller may widen and retry.
class BracketError : public SolverError {
public:
    BracketError(const std::string& what, double lo, double hi, double f_lo, double f_hi)
        : SolverError(what), lo(lo), hi(hi), f_lo(f_lo), f_hi(f_hi) {}

    double lo, hi, f_lo, f_hi;
};

/// Shooting failed after the maximum number of bracket doublings.
class ShootingError : public SolverError {
public:
    ShootingError(const std::string& what, std::vector<std::pair<double, double>> samples)
        : SolverError(what), theta_samples(std::move(samples)) {}

    /// (lambda, theta(1, lambda)) pairs evaluated while searching.
    std::vector<std::pair<double, double>> theta_samples;
};

/// Non-fatal conditions collected during a run and copied into reports.
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
};

}  // namespace sturm_heat

#endif
