#ifndef FIRMCASCADE_OBJECTIVE_HPP
#define FIRMCASCADE_OBJECTIVE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "firmcascade/architecture.hpp"
#include "firmcascade/dataset.hpp"

namespace firmcascade {

enum class ObjectiveFamily { Firm, Soft };

std::string to_string(ObjectiveFamily family);
ObjectiveFamily objective_family_from_string(const std::string& s);

// Training objective settings. Firm pairs the gated-mixture combiner with
// the gated cost regularizer; soft pairs noisy-AND with the raw-probability
// regularizer.
struct ObjectiveConfig {
    double lambda = 0.0;
    GatingConfig gating = GatingConfig::defaults();
    ObjectiveFamily family = ObjectiveFamily::Firm;
};

// Trainable parameters / gradients for every trainable stage, in StageIndex
// order. Gradients mirror parameter shapes exactly.
using ParameterSet = std::vector<StageParams>;
using GradientSet = std::vector<StageParams>;

// Glorot initialization of every trainable stage; per-stage streams are
// derived from the seed so the result is reproducible.
ParameterSet init_parameters(const CascadeArchitecture& arch, std::uint64_t seed);

GradientSet zero_like(const ParameterSet& params);

// StructuralError unless params conform to the architecture's trainable
// stages; InputError on non-finite entries.
void check_parameter_shapes(const CascadeArchitecture& arch, const ParameterSet& params);

// Log likelihood of one prediction: y log p + (1-y) log(1-p), with p
// clamped to [1e-12, 1-1e-12] inside the logs only. InputError unless y is
// 0 or 1.
double cross_entropy(int y, double p_star);

// d cross_entropy / d p_star; zero when p_star lies inside a clamped
// region (the clamp is treated as a constant there).
double cross_entropy_dp(int y, double p_star);

// Expected execution cost of a linear cascade under gated propagation:
// kappa_1 + sum_{l>=2} kappa_l prod_{k<l} gate(p_k).
double regularizer_linear_firm(std::span<const double> probs, std::span<const double> costs,
                               const GatingConfig& gating);

// Same with the raw probabilities in place of the gate.
double regularizer_linear_soft(std::span<const double> probs, std::span<const double> costs);

// Tree cost: every branch contributes its linear term, the combiner cost
// root_costs[0] is unconditional, and root stage l >= 2 is charged
// root_costs[l-1] * prod_d gate(branch_d) * prod_{k=2}^{l-1} gate(root_k).
double regularizer_tree_firm(const std::vector<std::vector<double>>& branch_probs,
                             std::span<const double> branch_outputs, std::span<const double> root_probs,
                             const std::vector<std::vector<double>>& branch_costs,
                             std::span<const double> root_costs, const GatingConfig& gating);

double regularizer_tree_soft(const std::vector<std::vector<double>>& branch_probs,
                             std::span<const double> branch_outputs, std::span<const double> root_probs,
                             const std::vector<std::vector<double>>& branch_costs,
                             std::span<const double> root_costs);

// Batch objective sum_n [cross_entropy - lambda * regularizer] over the
// given rows (all rows when empty is not allowed; InputError). Higher is
// better.
double objective_value(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                       std::span<const int> rows, const ObjectiveConfig& cfg);

// Exact reverse-mode gradient of objective_value w.r.t. every stage
// parameter, including the flow through the gate in both the mixture
// weights and the regularizer. ConfigError for the hard gating setting.
GradientSet objective_gradient(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                               std::span<const int> rows, const ObjectiveConfig& cfg);

// Central-difference verification of objective_gradient over every
// parameter. Returns the maximum relative error
// |analytic - numeric| / max(1e-8, |analytic|, |numeric|).
double finite_difference_check(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                               std::span<const int> rows, const ObjectiveConfig& cfg, double h);

// Generic central-difference core used by finite_difference_check and by
// test-side sanity oracles: f evaluates at x, grad is the claimed gradient.
template <typename F>
double fd_max_rel_error(F&& f, std::span<double> x, std::span<const double> grad, double h) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f();
        x[i] = saved - h;
        const double down = f();
        x[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({1e-8, std::abs(grad[i]), std::abs(numeric)});
        worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace firmcascade

#endif
