#ifndef FIRMCASCADE_STAGE_MODEL_HPP
#define FIRMCASCADE_STAGE_MODEL_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace firmcascade {

enum class StageKind {
    LinearLogistic,  // logistic regression over the masked features
    Feedforward,     // 1 or 2 logistic hidden layers, logistic output
    Combiner,        // cost-only product stage at the head of a tree root
};

std::string to_string(StageKind kind);
StageKind stage_kind_from_string(const std::string& s);

// Static description of one stage: classifier family, feature subset and
// execution cost. Parameters live separately in StageParams.
struct StageSpec {
    StageKind kind = StageKind::LinearLogistic;
    std::vector<int> hidden_sizes;  // empty for linear-logistic, size <= 2 for feedforward
    std::vector<int> feature_mask;  // indices into the global feature space
    double cost = -1.0;             // kappa; < 0 means "derive from MAC count"

    bool trainable() const { return kind != StageKind::Combiner; }

    // Multiply-accumulate count of one forward evaluation; used as the
    // default cost when none is given.
    long mac_count() const;

    // Layer fan-in/fan-out chain: |mask| -> hidden... -> 1.
    std::vector<std::pair<int, int>> layer_shapes() const;
};

struct LayerParams {
    int fan_in = 0;
    int fan_out = 0;
    std::vector<double> weights;  // row-major, fan_out x fan_in
    std::vector<double> biases;   // fan_out

    double& w(int row, int col) { return weights[static_cast<std::size_t>(row) * fan_in + col]; }
    double w(int row, int col) const { return weights[static_cast<std::size_t>(row) * fan_in + col]; }
};

struct StageParams {
    std::vector<LayerParams> layers;

    std::size_t count() const;
    void fill(double value);
};

// One stage's classifier: spec plus conforming parameters.
struct StageModel {
    StageSpec spec;
    StageParams params;
};

// Glorot-uniform weights, zero biases; fully determined by the seed.
StageParams init_stage(const StageSpec& spec, std::uint64_t seed);

// Throws StructuralError if params do not conform to spec, InputError if
// any parameter is non-finite.
void check_stage_shapes(const StageSpec& spec, const StageParams& params);

// P(y=1|x) for one stage. Masked features are pushed through logistic
// hidden layers and a logistic output. Throws StructuralError on shape
// mismatch and InputError on non-finite inputs.
double stage_forward(const StageSpec& spec, const StageParams& params, std::span<const double> x);

inline double stage_forward(const StageModel& model, std::span<const double> x) {
    return stage_forward(model.spec, model.params, x);
}

// Forward pass keeping every layer's activations for backpropagation.
// layer_out[0] is the masked input; layer_out.back() has one entry, the
// output probability.
struct StageActivations {
    std::vector<std::vector<double>> layer_out;
    double prob = 0.0;
};

void stage_forward_cached(const StageSpec& spec, const StageParams& params, std::span<const double> x,
                          StageActivations& acts);

// Accumulates d(objective)/d(params) into grad given d(objective)/d(prob).
// acts must come from stage_forward_cached with the same spec/params.
void stage_backward(const StageSpec& spec, const StageParams& params, const StageActivations& acts,
                    double dprob, StageParams& grad);

// [x, y] -> [x, y, x^2, y^2, xy]. Throws InputError unless given exactly
// two values.
std::array<double, 5> basis_expand(std::span<const double> xy);

}  // namespace firmcascade

#endif
