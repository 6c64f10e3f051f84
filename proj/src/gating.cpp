#include "firmcascade/gating.hpp"

#include <cmath>

#include "firmcascade/errors.hpp"

namespace firmcascade {

double stable_logistic(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

GatingConfig GatingConfig::finite(double alpha) {
    if (!std::isfinite(alpha) || alpha <= 0.0) {
        throw ConfigError("gating sharpness must be finite and > 0 (got " + std::to_string(alpha) + ")");
    }
    GatingConfig cfg;
    cfg.alpha_ = alpha;
    cfg.hard_ = false;
    cfg.f0_ = stable_logistic(-0.5 * alpha);
    cfg.f1_ = stable_logistic(0.5 * alpha);
    cfg.denom_ = cfg.f1_ - cfg.f0_;
    return cfg;
}

GatingConfig GatingConfig::hard() { return GatingConfig{}; }

double gate_logistic(double p, const GatingConfig& cfg) {
    if (!std::isfinite(p)) throw InputError("gate input probability must be finite");
    if (cfg.is_hard()) throw ConfigError("raw logistic undefined for the hard gating setting");
    return stable_logistic(cfg.alpha() * (p - 0.5));
}

double gate(double p, const GatingConfig& cfg) {
    if (!std::isfinite(p)) throw InputError("gate input probability must be finite");
    if (cfg.is_hard()) {
        if (p > 0.5) return 1.0;
        if (p < 0.5) return 0.0;
        return 0.5;  // tie defined as 0.5, keeps gate(p) + gate(1-p) = 1
    }
    return (stable_logistic(cfg.alpha() * (p - 0.5)) - cfg.f0()) / cfg.denom();
}

double gate_deriv(double p, const GatingConfig& cfg) {
    if (!std::isfinite(p)) throw InputError("gate input probability must be finite");
    if (cfg.is_hard()) {
        throw ConfigError("gate derivative undefined for the hard gating setting");
    }
    const double f = stable_logistic(cfg.alpha() * (p - 0.5));
    return cfg.alpha() * f * (1.0 - f) / cfg.denom();
}

}  // namespace firmcascade
