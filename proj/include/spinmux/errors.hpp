#pragma once

#include <stdexcept>
#include <string>

namespace spinmux {

// Error taxonomy shared by all modules. The CLI maps these onto process
// exit codes (config 2, numerical 3, infeasible 4).

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument or violated precondition.
struct InputError : Error {
    using Error::Error;
};

// Malformed or schema-violating configuration input.
struct ConfigError : Error {
    using Error::Error;
};

// Integrator, quadrature or fit failure.
struct NumericalError : Error {
    using Error::Error;
};

// A planning/synthesis problem with no admissible solution.
struct InfeasibleError : Error {
    using Error::Error;
};

}  // namespace spinmux
