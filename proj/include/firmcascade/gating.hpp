#ifndef FIRMCASCADE_GATING_HPP
#define FIRMCASCADE_GATING_HPP

#include <limits>

namespace firmcascade {

// Sharpness configuration for the normalized logistic gate.
//
// The gate maps a stage probability p in [0,1] to a soft pass weight in
// [0,1] that approaches the step function 1{p > 0.5} as alpha grows. A
// distinguished "hard" setting stands for the alpha -> infinity limit and
// evaluates the step function exactly (with the tie at p = 0.5 defined as
// 0.5 so that complement symmetry is preserved).
class GatingConfig {
public:
    // Finite sharpness. Throws ConfigError unless alpha is finite and > 0.
    static GatingConfig finite(double alpha);

    // The step-function limit.
    static GatingConfig hard();

    // alpha = 32, the default used throughout the toolkit.
    static GatingConfig defaults() { return finite(32.0); }

    bool is_hard() const { return hard_; }
    double alpha() const { return alpha_; }

    // Cached endpoint values of the raw logistic; denom = f(1) - f(0).
    double f0() const { return f0_; }
    double f1() const { return f1_; }
    double denom() const { return denom_; }

    bool operator==(const GatingConfig&) const = default;

private:
    GatingConfig() = default;
    double alpha_ = std::numeric_limits<double>::infinity();
    bool hard_ = true;
    double f0_ = 0.0;
    double f1_ = 1.0;
    double denom_ = 1.0;
};

// Numerically stable logistic, safe for |z| up to and beyond 1024.
double stable_logistic(double z);

// Raw logistic sharpened around p = 0.5: 1 / (1 + exp(-alpha (p - 0.5))).
// Requires a finite configuration and a finite p (InputError otherwise).
double gate_logistic(double p, const GatingConfig& cfg);

// Normalized gate: (f(p) - f(0)) / (f(1) - f(0)). Exactly 0 at p = 0 and
// exactly 1 at p = 1. For the hard setting returns the step function with
// the tie at 0.5 mapped to 0.5.
double gate(double p, const GatingConfig& cfg);

// d gate / dp. Undefined for the hard setting (ConfigError).
double gate_deriv(double p, const GatingConfig& cfg);

}  // namespace firmcascade

#endif
