#include "firmcascade/combine.hpp"

#include <cmath>

#include "firmcascade/errors.hpp"

namespace firmcascade {

double combine_noisy_and(std::span<const double> probs) {
    if (probs.empty()) throw InputError("noisy-AND of an empty stage list");
    double prod = 1.0;
    for (double p : probs) prod *= p;
    return prod;
}

std::vector<double> mixture_weights_linear(std::span<const double> probs, const GatingConfig& gating) {
    const std::size_t n = probs.size();
    if (n == 0) throw InputError("mixture weights of an empty stage list");
    std::vector<double> theta(n);
    double prefix = 1.0;  // prod_{k<l} gate(p_k)
    for (std::size_t l = 0; l < n; ++l) {
        if (l + 1 == n) {
            theta[l] = prefix;
        } else {
            const double g = gate(probs[l], gating);
            theta[l] = (1.0 - g) * prefix;
            prefix *= g;
        }
    }
    return theta;
}

double combine_linear_firm(std::span<const double> probs, const GatingConfig& gating) {
    const auto theta = mixture_weights_linear(probs, gating);
    double out = 0.0;
    for (std::size_t l = 0; l < probs.size(); ++l) out += theta[l] * probs[l];
    return out;
}

std::vector<double> mixture_weights_tree(std::span<const double> branch_outputs,
                                         std::span<const double> root_probs, const GatingConfig& gating) {
    if (branch_outputs.empty()) {
        throw StructuralError("tree combination requires at least one branch; use the linear combiner instead");
    }
    const std::size_t m = root_probs.size();
    std::vector<double> theta(m + 1);
    if (m == 0) {
        theta[0] = 1.0;  // lone combiner stage passes its product through
        return theta;
    }
    double branch_gate = 1.0;  // prod_d gate(branch_d)
    double p_comb = 1.0;       // the combiner's probability, prod_d branch_d
    for (double b : branch_outputs) {
        branch_gate *= gate(b, gating);
        p_comb *= b;
    }
    theta[0] = 1.0 - branch_gate;
    // Later stages mirror the linear cascade over [p_comb, root...] scaled
    // by the branch gate product; their prefix products include the gate of
    // the combiner's probability.
    double prefix = branch_gate * gate(p_comb, gating);
    for (std::size_t l = 0; l < m; ++l) {
        if (l + 1 == m) {
            theta[l + 1] = prefix;
        } else {
            const double g = gate(root_probs[l], gating);
            theta[l + 1] = (1.0 - g) * prefix;
            prefix *= g;
        }
    }
    return theta;
}

double combine_tree_firm(std::span<const double> branch_outputs, std::span<const double> root_probs,
                         const GatingConfig& gating) {
    const auto theta = mixture_weights_tree(branch_outputs, root_probs, gating);
    double p_comb = 1.0;
    for (double b : branch_outputs) p_comb *= b;
    double out = theta[0] * p_comb;
    for (std::size_t l = 0; l < root_probs.size(); ++l) out += theta[l + 1] * root_probs[l];
    return out;
}

ValueWithPartials noisy_and_partials(std::span<const double> probs) {
    const std::size_t n = probs.size();
    if (n == 0) throw InputError("noisy-AND of an empty stage list");
    ValueWithPartials out;
    out.d.resize(n);
    // prefix/suffix products avoid dividing by zero probabilities
    std::vector<double> suffix(n + 1, 1.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] * probs[i];
    out.value = suffix[0];
    double prefix = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.d[i] = prefix * suffix[i + 1];
        prefix *= probs[i];
    }
    return out;
}

namespace {

// Sub-cascade values: tail[j] is the firm combination of stages j..n-1.
// tail[j] = (1 - g_j) p_j + g_j tail[j+1], tail[n-1] = p_{n-1}.
void linear_firm_tails(std::span<const double> probs, const GatingConfig& gating, std::vector<double>& g,
                       std::vector<double>& tail) {
    const std::size_t n = probs.size();
    g.resize(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = gate(probs[i], gating);
    tail.resize(n);
    tail[n - 1] = probs[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) {
        tail[j] = (1.0 - g[j]) * probs[j] + g[j] * tail[j + 1];
    }
}

}  // namespace

ValueWithPartials linear_firm_partials(std::span<const double> probs, const GatingConfig& gating) {
    const std::size_t n = probs.size();
    if (n == 0) throw InputError("firm combination of an empty stage list");
    ValueWithPartials out;
    out.d.resize(n);
    std::vector<double> g, tail;
    linear_firm_tails(probs, gating, g, tail);
    out.value = tail[0];
    double prefix = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j + 1 == n) {
            out.d[j] = prefix;
        } else {
            const double gd = gate_deriv(probs[j], gating);
            out.d[j] = prefix * ((1.0 - g[j]) + gd * (tail[j + 1] - probs[j]));
            prefix *= g[j];
        }
    }
    return out;
}

TreeFirmPartials tree_firm_partials(std::span<const double> branch_outputs, std::span<const double> root_probs,
                                    const GatingConfig& gating) {
    const std::size_t nd = branch_outputs.size();
    if (nd == 0) throw StructuralError("tree combination requires at least one branch");
    TreeFirmPartials out;
    out.d_branch.resize(nd);
    out.d_root.assign(root_probs.size(), 0.0);

    // products of branch outputs / branch gates excluding each index
    std::vector<double> gb(nd);
    for (std::size_t d = 0; d < nd; ++d) gb[d] = gate(branch_outputs[d], gating);
    std::vector<double> psuf(nd + 1, 1.0), gsuf(nd + 1, 1.0);
    for (std::size_t d = nd; d-- > 0;) {
        psuf[d] = psuf[d + 1] * branch_outputs[d];
        gsuf[d] = gsuf[d + 1] * gb[d];
    }
    const double p_comb = psuf[0];
    const double branch_gate = gsuf[0];

    if (root_probs.empty()) {
        out.value = p_comb;
        double ppre = 1.0;
        for (std::size_t d = 0; d < nd; ++d) {
            out.d_branch[d] = ppre * psuf[d + 1];
            ppre *= branch_outputs[d];
        }
        return out;
    }

    std::vector<double> g, tail;
    linear_firm_tails(root_probs, gating, g, tail);
    const double root_value = tail[0];
    const double g_comb = gate(p_comb, gating);
    const double gd_comb = gate_deriv(p_comb, gating);

    out.value = (1.0 - branch_gate) * p_comb + branch_gate * g_comb * root_value;

    // d value / d p_comb and d value / d branch_gate, then chain into each
    // branch output through the two products.
    const double d_pcomb = (1.0 - branch_gate) + branch_gate * gd_comb * root_value;
    const double d_bgate = g_comb * root_value - p_comb;
    double ppre = 1.0, gpre = 1.0;
    for (std::size_t d = 0; d < nd; ++d) {
        const double gd = gate_deriv(branch_outputs[d], gating);
        out.d_branch[d] = d_pcomb * ppre * psuf[d + 1] + d_bgate * gd * gpre * gsuf[d + 1];
        ppre *= branch_outputs[d];
        gpre *= gb[d];
    }

    double prefix = branch_gate * g_comb;
    for (std::size_t j = 0; j < root_probs.size(); ++j) {
        if (j + 1 == root_probs.size()) {
            out.d_root[j] = prefix;
        } else {
            const double gd = gate_deriv(root_probs[j], gating);
            out.d_root[j] = prefix * ((1.0 - g[j]) + gd * (tail[j + 1] - root_probs[j]));
            prefix *= g[j];
        }
    }
    return out;
}

}  // namespace firmcascade
