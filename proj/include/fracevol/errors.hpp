#pragma once

#include <stdexcept>
#include <string>

namespace fracevol {

/// Requested value could not be computed to the contractual accuracy.
/// Carries the best available estimate and its estimated relative error.
class accuracy_error : public std::runtime_error {
public:
    accuracy_error(const std::string& msg, double best_estimate, double rel_err)
        : std::runtime_error(msg), best_(best_estimate), rel_(rel_err) {}

    [[nodiscard]] double best_estimate() const noexcept { return best_; }
    [[nodiscard]] double estimated_rel_error() const noexcept { return rel_; }

private:
    double best_;
    double rel_;
};

/// Evaluation point too close to a mesh boundary for the derivative scheme.
class stencil_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A limit extrapolation failed to converge (diagnostic, not a numerical abort).
class extrapolation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Required trajectory history is missing or inconsistent.
class state_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Structured input could not be parsed; `path` points at the offending node.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& msg, std::string path)
        : std::runtime_error(msg + " (at " + path + ")"), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Input parsed but violates a structural invariant.
class validation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fracevol
