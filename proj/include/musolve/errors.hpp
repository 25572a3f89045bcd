#pragma once

#include <stdexcept>
#include <string>

namespace musolve {

// Error taxonomy shared by all modules. The CLI maps these onto stable
// exit codes: config/validation/request -> 2, hypothesis/certificate -> 3,
// numerical/truncation -> 4.

// Malformed or semantically invalid user input (config files, measure data).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Well-formed input whose structural hypotheses fail, or a coercivity /
// domination certificate that cannot be issued.
struct HypothesisError : std::runtime_error {
    explicit HypothesisError(const std::string &msg) : std::runtime_error(msg) {}
};

// Solver breakdowns: non-convergence, indefinite pencils, truncation of a
// series beyond the requested tolerance.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string &msg) : std::runtime_error(msg) {}
};

// A structurally valid request the current data cannot serve
// (e.g. more eigenpairs than degrees of freedom). Maps to exit code 2.
struct RequestError : std::runtime_error {
    explicit RequestError(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace musolve
