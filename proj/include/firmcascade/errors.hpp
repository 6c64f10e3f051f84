#ifndef FIRMCASCADE_ERRORS_HPP
#define FIRMCASCADE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace firmcascade {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad gating parameters, malformed architecture or
// experiment files, out-of-range training settings.
struct ConfigError : Error {
    using Error::Error;
};

// Invalid runtime input: non-finite values, wrong arity, empty containers.
struct InputError : Error {
    using Error::Error;
};

// Statistically degenerate input (e.g. zero variance of paired differences).
struct DegenerateInputError : InputError {
    using InputError::InputError;
};

// Shape mismatch between parameters, architecture and data.
struct StructuralError : Error {
    using Error::Error;
};

// Problems reading or interpreting datasets.
struct DataError : Error {
    using Error::Error;
};

// Training failures (divergence, non-finite gradients).
struct TrainError : Error {
    TrainError(const std::string& msg, int epoch = -1, int stage = -1)
        : Error(msg), epoch(epoch), stage(stage) {}
    int epoch;  // -1 when unknown
    int stage;  // global trainable stage index, -1 when unknown
};

}  // namespace firmcascade

#endif
