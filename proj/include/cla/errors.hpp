#pragma once

#include <stdexcept>
#include <string>

namespace claprobe {

// Engine-level failures: layer shape mismatches, bad neuron addresses.
struct EngineError : std::runtime_error {
    explicit EngineError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : EngineError {
    explicit ShapeError(const std::string& msg) : EngineError(msg) {}
};

struct InvalidSiteError : EngineError {
    explicit InvalidSiteError(const std::string& msg) : EngineError(msg) {}
};

// Probing a neuron whose activation is not piecewise linear (e.g. tanh).
struct UnsupportedActivationError : EngineError {
    explicit UnsupportedActivationError(const std::string& msg) : EngineError(msg) {}
};

// Model container failures carry a kind so callers can distinguish a bad
// header from a short read.
struct ModelIoError : std::runtime_error {
    enum class Kind { bad_magic, bad_version, bad_manifest, truncated, io };
    Kind kind;
    ModelIoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// c0 = 1/(1 - f(y)) blows up when the discriminator saturates.
struct SingularityError : std::runtime_error {
    explicit SingularityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace claprobe
