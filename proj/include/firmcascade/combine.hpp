#ifndef FIRMCASCADE_COMBINE_HPP
#define FIRMCASCADE_COMBINE_HPP

#include <span>
#include <vector>

#include "firmcascade/gating.hpp"

namespace firmcascade {

// Product of stage probabilities (noisy-AND). InputError on an empty list.
double combine_noisy_and(std::span<const double> probs);

// Mixture weights of a linear cascade: stage l takes weight
// (1 - gate(p_l)) * prod_{k<l} gate(p_k), the last stage the full prefix
// product. The weights sum to 1 by telescoping.
std::vector<double> mixture_weights_linear(std::span<const double> probs, const GatingConfig& gating);

// Gated-mixture output of a linear cascade: sum_l theta_l * p_l. A convex
// combination of the inputs.
double combine_linear_firm(std::span<const double> probs, const GatingConfig& gating);

// A branch of a tree combines its stages exactly like a linear cascade.
inline double combine_per_branch(std::span<const double> probs, const GatingConfig& gating) {
    return combine_linear_firm(probs, gating);
}

// Mixture weights of the star-topology combination. branch_outputs are the
// D per-branch combined outputs, root_probs the root stage probabilities
// after the combiner (stages 2..L). Returns L weights where weight 0
// belongs to the combiner stage whose probability is prod_d branch_d.
// With no trainable root stages the single weight is 1 (pass-through).
std::vector<double> mixture_weights_tree(std::span<const double> branch_outputs,
                                         std::span<const double> root_probs, const GatingConfig& gating);

// Star-topology combined output. StructuralError when branch_outputs is
// empty (use combine_linear_firm for a pure linear cascade).
double combine_tree_firm(std::span<const double> branch_outputs, std::span<const double> root_probs,
                         const GatingConfig& gating);

// Value plus partial derivatives with respect to each input probability.
struct ValueWithPartials {
    double value = 0.0;
    std::vector<double> d;
};

ValueWithPartials noisy_and_partials(std::span<const double> probs);
ValueWithPartials linear_firm_partials(std::span<const double> probs, const GatingConfig& gating);

struct TreeFirmPartials {
    double value = 0.0;
    std::vector<double> d_branch;  // w.r.t. each branch output
    std::vector<double> d_root;    // w.r.t. each trainable root stage probability
};

TreeFirmPartials tree_firm_partials(std::span<const double> branch_outputs, std::span<const double> root_probs,
                                    const GatingConfig& gating);

}  // namespace firmcascade

#endif
