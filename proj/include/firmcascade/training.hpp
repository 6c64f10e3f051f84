#ifndef FIRMCASCADE_TRAINING_HPP
#define FIRMCASCADE_TRAINING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "firmcascade/architecture.hpp"
#include "firmcascade/dataset.hpp"
#include "firmcascade/inference.hpp"
#include "firmcascade/objective.hpp"

namespace firmcascade {

enum class InitScheme { ReverseStagewise, RandomOnly };

std::string to_string(InitScheme scheme);
InitScheme init_scheme_from_string(const std::string& s);

struct TrainConfig {
    double learning_rate = 1e-3;
    double rmsprop_decay = 0.9;    // running-average coefficient for squared gradients
    double rmsprop_epsilon = 1e-8;
    int epochs = 200;
    int batch_size = 128;
    std::uint64_t seed = 1;
    ObjectiveConfig objective;
    InitScheme init = InitScheme::ReverseStagewise;

    void validate() const;  // ConfigError on out-of-range fields
};

// Per-parameter running mean of squared gradients, shape-congruent with
// the parameter set.
using OptimizerState = std::vector<StageParams>;

// One ascent step: state <- decay*state + (1-decay)*grad^2, then
// params <- params + lr * grad / (sqrt(state) + eps). TrainError carrying
// the stage index on a non-finite gradient.
void rmsprop_step(ParameterSet& params, const GradientSet& grads, OptimizerState& state, const TrainConfig& cfg);

// Pre-trains stages from the last stage of each device back to the first.
// The root device goes first so branch stages can train against it; while
// stage l trains, the stages after it (and the root stages, for a branch)
// stay frozen inside a linear sub-cascade objective rooted at stage l.
// Each stage gets epochs/4 passes (at least one).
ParameterSet reverse_stagewise_init(const CascadeArchitecture& arch, const Dataset& data,
                                    std::span<const int> rows, const TrainConfig& cfg);

struct TrainedModel {
    CascadeArchitecture arch;
    ParameterSet params;
    std::vector<double> history;  // objective after each joint epoch
    TrainConfig config;
};

// Reverse stage-wise initialization (when configured) followed by joint
// RMSProp over seeded mini-batch shuffles. TrainError with the epoch index
// if the objective diverges.
TrainedModel train(const CascadeArchitecture& arch, const Dataset& data, const TrainConfig& cfg);
TrainedModel train(const CascadeArchitecture& arch, const Dataset& data, std::span<const int> rows,
                   const TrainConfig& cfg);

// Cross-validated cost/accuracy trade-off over a grid of cost weights.
struct FoldOutcome {
    int fold = 0;
    EvalMetrics metrics;        // hard-mode metrics on the held-out fold
    double final_objective = 0.0;
    TimingResult timing;        // filled when the sweep is asked to time
};

struct SweepPoint {
    double lambda = 0.0;
    std::vector<FoldOutcome> folds;
    double accuracy_mean = 0.0, accuracy_se = 0.0;
    double f1_mean = 0.0, f1_se = 0.0;
    double cost_mean = 0.0, cost_se = 0.0;
    double stages_mean = 0.0, stages_se = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    int best_index = 0;  // maximum mean accuracy; ties go to the cheaper point
};

// The default grid: {0} plus decades 1e-4 .. 10.
std::vector<double> default_lambda_grid();

// Trains one model per (lambda, fold) pair and evaluates it in hard mode
// on the held-out fold. Pairs may run on up to `threads` workers; results
// are deterministic either way because every run is independently seeded
// (wall-clock timing fields excepted). timing_repetitions > 0 also times
// each fold's model on its held-out rows.
SweepResult lambda_sweep(const CascadeArchitecture& arch, const Dataset& data, std::span<const double> grid,
                         const TrainConfig& cfg, int folds, int threads = 1, int timing_repetitions = 0);

// Picks the best point per the sweep rule.
int best_point_index(const std::vector<SweepPoint>& points);

}  // namespace firmcascade

#endif
