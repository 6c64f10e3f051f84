#include "firmcascade/objective.hpp"

#include <cmath>

#include "firmcascade/combine.hpp"
#include "firmcascade/errors.hpp"
#include "firmcascade/rng.hpp"

namespace firmcascade {

namespace {
constexpr double kProbClamp = 1e-12;
}

std::string to_string(ObjectiveFamily family) { return family == ObjectiveFamily::Firm ? "firm" : "soft"; }

ObjectiveFamily objective_family_from_string(const std::string& s) {
    if (s == "firm") return ObjectiveFamily::Firm;
    if (s == "soft") return ObjectiveFamily::Soft;
    throw ConfigError("unknown objective family '" + s + "'");
}

ParameterSet init_parameters(const CascadeArchitecture& arch, std::uint64_t seed) {
    StageIndex index(arch);
    ParameterSet params;
    params.reserve(static_cast<std::size_t>(index.count()));
    for (int g = 0; g < index.count(); ++g) {
        params.push_back(init_stage(arch.spec_at(index.coord(g)), mix_seed(seed, static_cast<std::uint64_t>(g))));
    }
    return params;
}

GradientSet zero_like(const ParameterSet& params) {
    GradientSet grads = params;
    for (auto& stage : grads) stage.fill(0.0);
    return grads;
}

void check_parameter_shapes(const CascadeArchitecture& arch, const ParameterSet& params) {
    StageIndex index(arch);
    if (static_cast<int>(params.size()) != index.count()) {
        throw StructuralError("parameter set has " + std::to_string(params.size()) + " stages, architecture has " +
                              std::to_string(index.count()) + " trainable stages");
    }
    for (int g = 0; g < index.count(); ++g) {
        check_stage_shapes(arch.spec_at(index.coord(g)), params[static_cast<std::size_t>(g)]);
    }
}

double cross_entropy(int y, double p_star) {
    if (y != 0 && y != 1) throw InputError("label must be 0 or 1, got " + std::to_string(y));
    if (!std::isfinite(p_star)) throw InputError("combined probability is not finite");
    const double p = std::clamp(p_star, kProbClamp, 1.0 - kProbClamp);
    return y == 1 ? std::log(p) : std::log1p(-p);
}

double cross_entropy_dp(int y, double p_star) {
    if (y != 0 && y != 1) throw InputError("label must be 0 or 1, got " + std::to_string(y));
    if (p_star < kProbClamp || p_star > 1.0 - kProbClamp) return 0.0;  // clamped region
    return y == 1 ? 1.0 / p_star : -1.0 / (1.0 - p_star);
}

double regularizer_linear_firm(std::span<const double> probs, std::span<const double> costs,
                               const GatingConfig& gating) {
    if (probs.empty() || probs.size() != costs.size()) {
        throw InputError("regularizer needs matching non-empty probability and cost lists");
    }
    double value = costs[0];
    double prefix = 1.0;
    for (std::size_t l = 1; l < probs.size(); ++l) {
        prefix *= gate(probs[l - 1], gating);
        value += costs[l] * prefix;
    }
    return value;
}

double regularizer_linear_soft(std::span<const double> probs, std::span<const double> costs) {
    if (probs.empty() || probs.size() != costs.size()) {
        throw InputError("regularizer needs matching non-empty probability and cost lists");
    }
    double value = costs[0];
    double prefix = 1.0;
    for (std::size_t l = 1; l < probs.size(); ++l) {
        prefix *= probs[l - 1];
        value += costs[l] * prefix;
    }
    return value;
}

namespace {

double tree_reg_common(const std::vector<std::vector<double>>& branch_probs, std::span<const double> branch_outputs,
                       std::span<const double> root_probs, const std::vector<std::vector<double>>& branch_costs,
                       std::span<const double> root_costs, const GatingConfig* gating) {
    if (branch_probs.size() != branch_costs.size() || branch_probs.size() != branch_outputs.size() ||
        branch_probs.empty()) {
        throw StructuralError("tree regularizer needs matching branch probability/cost lists");
    }
    if (root_costs.size() != root_probs.size() + 1) {
        throw StructuralError("root cost list must cover the combiner plus every trainable root stage");
    }
    double value = 0.0;
    for (std::size_t d = 0; d < branch_probs.size(); ++d) {
        value += gating ? regularizer_linear_firm(branch_probs[d], branch_costs[d], *gating)
                        : regularizer_linear_soft(branch_probs[d], branch_costs[d]);
    }
    value += root_costs[0];  // combiner always runs
    double branch_gate = 1.0;
    for (double b : branch_outputs) branch_gate *= gating ? gate(b, *gating) : b;
    double prefix = branch_gate;
    for (std::size_t j = 0; j < root_probs.size(); ++j) {
        value += root_costs[j + 1] * prefix;
        prefix *= gating ? gate(root_probs[j], *gating) : root_probs[j];
    }
    return value;
}

}  // namespace

double regularizer_tree_firm(const std::vector<std::vector<double>>& branch_probs,
                             std::span<const double> branch_outputs, std::span<const double> root_probs,
                             const std::vector<std::vector<double>>& branch_costs,
                             std::span<const double> root_costs, const GatingConfig& gating) {
    return tree_reg_common(branch_probs, branch_outputs, root_probs, branch_costs, root_costs, &gating);
}

double regularizer_tree_soft(const std::vector<std::vector<double>>& branch_probs,
                             std::span<const double> branch_outputs, std::span<const double> root_probs,
                             const std::vector<std::vector<double>>& branch_costs,
                             std::span<const double> root_costs) {
    return tree_reg_common(branch_probs, branch_outputs, root_probs, branch_costs, root_costs, nullptr);
}

namespace {

// ---- partial-derivative helpers for the gradient path -------------------

struct RegPartials {
    double value = 0.0;
    std::vector<double> d;
};

// firm: d/dp_j = prod_{k<j} g_k * g'(p_j) * (cost of the sub-cascade after
// stage j), via the suffix recursion tail[j] = cost_j + g_j tail[j+1].
RegPartials reg_linear_firm_partials(std::span<const double> probs, std::span<const double> costs,
                                     const GatingConfig& gating) {
    const std::size_t n = probs.size();
    RegPartials out;
    out.d.assign(n, 0.0);
    std::vector<double> tail(n);
    tail[n - 1] = costs[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) tail[j] = costs[j] + gate(probs[j], gating) * tail[j + 1];
    out.value = tail[0];
    double prefix = 1.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        out.d[j] = prefix * gate_deriv(probs[j], gating) * tail[j + 1];
        prefix *= gate(probs[j], gating);
    }
    return out;
}

RegPartials reg_linear_soft_partials(std::span<const double> probs, std::span<const double> costs) {
    const std::size_t n = probs.size();
    RegPartials out;
    out.d.assign(n, 0.0);
    std::vector<double> tail(n);
    tail[n - 1] = costs[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) tail[j] = costs[j] + probs[j] * tail[j + 1];
    out.value = tail[0];
    double prefix = 1.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        out.d[j] = prefix * tail[j + 1];
        prefix *= probs[j];
    }
    return out;
}

struct TreeRegPartials {
    double value = 0.0;
    std::vector<std::vector<double>> d_branch;  // direct within-branch terms
    std::vector<double> d_branch_out;           // through the branch gate product
    std::vector<double> d_root;
};

TreeRegPartials reg_tree_partials(const std::vector<std::vector<double>>& branch_probs,
                                  std::span<const double> branch_outputs, std::span<const double> root_probs,
                                  const std::vector<std::vector<double>>& branch_costs,
                                  std::span<const double> root_costs, const GatingConfig* gating) {
    const std::size_t nd = branch_probs.size();
    const std::size_t m = root_probs.size();
    TreeRegPartials out;
    out.d_branch.resize(nd);
    out.d_branch_out.assign(nd, 0.0);
    out.d_root.assign(m, 0.0);
    for (std::size_t d = 0; d < nd; ++d) {
        RegPartials rp = gating ? reg_linear_firm_partials(branch_probs[d], branch_costs[d], *gating)
                                : reg_linear_soft_partials(branch_probs[d], branch_costs[d]);
        out.value += rp.value;
        out.d_branch[d] = std::move(rp.d);
    }
    out.value += root_costs[0];
    if (m == 0) return out;

    auto gate_of = [&](double p) { return gating ? gate(p, *gating) : p; };
    auto gate_deriv_of = [&](double p) { return gating ? gate_deriv(p, *gating) : 1.0; };

    std::vector<double> gb(nd);
    for (std::size_t d = 0; d < nd; ++d) gb[d] = gate_of(branch_outputs[d]);
    std::vector<double> gsuf(nd + 1, 1.0);
    for (std::size_t d = nd; d-- > 0;) gsuf[d] = gsuf[d + 1] * gb[d];
    const double branch_gate = gsuf[0];

    // conditional root cost after the combiner: tail over trainable stages
    std::vector<double> tail(m);
    tail[m - 1] = root_costs[m];
    for (std::size_t j = m - 1; j-- > 0;) tail[j] = root_costs[j + 1] + gate_of(root_probs[j]) * tail[j + 1];
    out.value += branch_gate * tail[0];

    double gpre = 1.0;
    for (std::size_t d = 0; d < nd; ++d) {
        out.d_branch_out[d] = tail[0] * gate_deriv_of(branch_outputs[d]) * gpre * gsuf[d + 1];
        gpre *= gb[d];
    }
    double prefix = branch_gate;
    for (std::size_t j = 0; j + 1 < m; ++j) {
        out.d_root[j] = prefix * gate_deriv_of(root_probs[j]) * tail[j + 1];
        prefix *= gate_of(root_probs[j]);
    }
    return out;
}

// ---- per-instance evaluation --------------------------------------------

struct Layout {
    const CascadeArchitecture* arch;
    StageIndex index;
    bool tree;
    std::vector<std::vector<double>> branch_costs;
    std::vector<double> root_costs;  // tree mode: [0] is the combiner cost

    explicit Layout(const CascadeArchitecture& a) : arch(&a), index(a), tree(a.mode == CascadeMode::Tree) {
        branch_costs.resize(a.branches.size());
        for (std::size_t d = 0; d < a.branches.size(); ++d) {
            for (const auto& s : a.branches[d]) branch_costs[d].push_back(s.cost);
        }
        for (const auto& s : a.root) root_costs.push_back(s.cost);
    }
};

struct Workspace {
    std::vector<StageActivations> acts;
    std::vector<std::vector<double>> branch_probs;
    std::vector<double> branch_out;
    std::vector<double> root_probs;
    std::vector<double> flat_probs;
    double combined = 0.0;
    double reg = 0.0;
};

void forward_instance(const Layout& lay, const ParameterSet& params, std::span<const double> x,
                      const ObjectiveConfig& cfg, Workspace& ws, bool keep_acts) {
    const CascadeArchitecture& arch = *lay.arch;
    const bool firm = cfg.family == ObjectiveFamily::Firm;
    if (keep_acts) ws.acts.resize(params.size());
    ws.branch_probs.resize(arch.branches.size());
    ws.branch_out.resize(arch.branches.size());
    ws.root_probs.clear();
    ws.flat_probs.clear();

    StageActivations scratch;
    int g = 0;
    auto eval_stage = [&](const StageSpec& spec) {
        StageActivations& acts = keep_acts ? ws.acts[static_cast<std::size_t>(g)] : scratch;
        stage_forward_cached(spec, params[static_cast<std::size_t>(g)], x, acts);
        ++g;
        return acts.prob;
    };

    for (std::size_t d = 0; d < arch.branches.size(); ++d) {
        auto& probs = ws.branch_probs[d];
        probs.clear();
        for (const auto& spec : arch.branches[d]) probs.push_back(eval_stage(spec));
        ws.flat_probs.insert(ws.flat_probs.end(), probs.begin(), probs.end());
        ws.branch_out[d] = firm ? combine_per_branch(probs, cfg.gating) : combine_noisy_and(probs);
    }
    for (const auto& spec : arch.root) {
        if (!spec.trainable()) continue;
        ws.root_probs.push_back(eval_stage(spec));
    }
    ws.flat_probs.insert(ws.flat_probs.end(), ws.root_probs.begin(), ws.root_probs.end());

    if (firm) {
        ws.combined = lay.tree ? combine_tree_firm(ws.branch_out, ws.root_probs, cfg.gating)
                               : combine_linear_firm(ws.root_probs, cfg.gating);
        ws.reg = lay.tree ? regularizer_tree_firm(ws.branch_probs, ws.branch_out, ws.root_probs, lay.branch_costs,
                                                  lay.root_costs, cfg.gating)
                          : regularizer_linear_firm(ws.root_probs, lay.root_costs, cfg.gating);
    } else {
        ws.combined = combine_noisy_and(ws.flat_probs);
        ws.reg = lay.tree ? regularizer_tree_soft(ws.branch_probs, ws.branch_out, ws.root_probs, lay.branch_costs,
                                                  lay.root_costs)
                          : regularizer_linear_soft(ws.root_probs, lay.root_costs);
    }
}

}  // namespace

double objective_value(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                       std::span<const int> rows, const ObjectiveConfig& cfg) {
    check_parameter_shapes(arch, params);
    if (rows.empty()) throw InputError("objective over an empty batch");
    Layout lay(arch);
    Workspace ws;
    double total = 0.0;
    for (int r : rows) {
        forward_instance(lay, params, data.row(r), cfg, ws, false);
        total += cross_entropy(data.labels[static_cast<std::size_t>(r)], ws.combined) - cfg.lambda * ws.reg;
    }
    return total;
}

GradientSet objective_gradient(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                               std::span<const int> rows, const ObjectiveConfig& cfg) {
    check_parameter_shapes(arch, params);
    if (rows.empty()) throw InputError("objective gradient over an empty batch");
    if (cfg.family == ObjectiveFamily::Firm && cfg.gating.is_hard()) {
        throw ConfigError("the hard gating setting has no usable gradient");
    }
    const bool firm = cfg.family == ObjectiveFamily::Firm;
    Layout lay(arch);
    Workspace ws;
    GradientSet grads = zero_like(params);
    std::vector<double> dprobs(params.size());
    std::vector<ValueWithPartials> branch_parts(arch.branches.size());

    for (int r : rows) {
        forward_instance(lay, params, data.row(r), cfg, ws, true);
        const int y = data.labels[static_cast<std::size_t>(r)];
        const double dce = cross_entropy_dp(y, ws.combined);
        std::fill(dprobs.begin(), dprobs.end(), 0.0);
        int g = 0;

        if (!lay.tree) {
            const auto comb = firm ? linear_firm_partials(ws.root_probs, cfg.gating) : noisy_and_partials(ws.root_probs);
            const auto regp = firm ? reg_linear_firm_partials(ws.root_probs, lay.root_costs, cfg.gating)
                                   : reg_linear_soft_partials(ws.root_probs, lay.root_costs);
            for (std::size_t j = 0; j < ws.root_probs.size(); ++j) {
                dprobs[static_cast<std::size_t>(g++)] = dce * comb.d[j] - cfg.lambda * regp.d[j];
            }
        } else {
            const auto regp = reg_tree_partials(ws.branch_probs, ws.branch_out, ws.root_probs, lay.branch_costs,
                                                lay.root_costs, firm ? &cfg.gating : nullptr);
            if (firm) {
                const auto comb = tree_firm_partials(ws.branch_out, ws.root_probs, cfg.gating);
                for (std::size_t d = 0; d < arch.branches.size(); ++d) {
                    branch_parts[d] = linear_firm_partials(ws.branch_probs[d], cfg.gating);
                    const double chain = dce * comb.d_branch[d] - cfg.lambda * regp.d_branch_out[d];
                    for (std::size_t k = 0; k < ws.branch_probs[d].size(); ++k) {
                        dprobs[static_cast<std::size_t>(g++)] =
                            chain * branch_parts[d].d[k] - cfg.lambda * regp.d_branch[d][k];
                    }
                }
                for (std::size_t j = 0; j < ws.root_probs.size(); ++j) {
                    dprobs[static_cast<std::size_t>(g++)] = dce * comb.d_root[j] - cfg.lambda * regp.d_root[j];
                }
            } else {
                const auto comb = noisy_and_partials(ws.flat_probs);
                std::size_t flat = 0;
                for (std::size_t d = 0; d < arch.branches.size(); ++d) {
                    branch_parts[d] = noisy_and_partials(ws.branch_probs[d]);
                    for (std::size_t k = 0; k < ws.branch_probs[d].size(); ++k, ++flat) {
                        dprobs[static_cast<std::size_t>(g++)] =
                            dce * comb.d[flat] -
                            cfg.lambda * (regp.d_branch[d][k] + regp.d_branch_out[d] * branch_parts[d].d[k]);
                    }
                }
                for (std::size_t j = 0; j < ws.root_probs.size(); ++j, ++flat) {
                    dprobs[static_cast<std::size_t>(g++)] = dce * comb.d[flat] - cfg.lambda * regp.d_root[j];
                }
            }
        }

        for (std::size_t s = 0; s < params.size(); ++s) {
            if (dprobs[s] == 0.0) continue;
            stage_backward(arch.spec_at(lay.index.coord(static_cast<int>(s))), params[s], ws.acts[s], dprobs[s],
                           grads[s]);
        }
    }
    return grads;
}

double finite_difference_check(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                               std::span<const int> rows, const ObjectiveConfig& cfg, double h) {
    if (h <= 0.0) throw InputError("finite-difference step must be positive");
    const GradientSet grads = objective_gradient(arch, params, data, rows, cfg);
    ParameterSet work = params;
    double worst = 0.0;
    for (std::size_t s = 0; s < work.size(); ++s) {
        for (std::size_t l = 0; l < work[s].layers.size(); ++l) {
            auto probe = [&](std::vector<double>& values, const std::vector<double>& gvalues) {
                for (std::size_t i = 0; i < values.size(); ++i) {
                    const double saved = values[i];
                    values[i] = saved + h;
                    const double up = objective_value(arch, work, data, rows, cfg);
                    values[i] = saved - h;
                    const double down = objective_value(arch, work, data, rows, cfg);
                    values[i] = saved;
                    const double numeric = (up - down) / (2.0 * h);
                    const double analytic = gvalues[i];
                    const double denom = std::max({1e-8, std::abs(analytic), std::abs(numeric)});
                    worst = std::max(worst, std::abs(analytic - numeric) / denom);
                }
            };
            probe(work[s].layers[l].weights, grads[s].layers[l].weights);
            probe(work[s].layers[l].biases, grads[s].layers[l].biases);
        }
    }
    return worst;
}

}  // namespace firmcascade
