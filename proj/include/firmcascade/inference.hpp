#ifndef FIRMCASCADE_INFERENCE_HPP
#define FIRMCASCADE_INFERENCE_HPP

#include <optional>
#include <span>
#include <vector>

#include "firmcascade/architecture.hpp"
#include "firmcascade/dataset.hpp"
#include "firmcascade/objective.hpp"

namespace firmcascade {

// One hard-mode classification with full accounting: which stages ran (in
// execution order), what they emitted, the summed cost and where the
// instance was rejected, if anywhere. The combiner's entry carries the
// product of the branch outputs.
struct HardDecisionTrace {
    int label = 0;
    double score = 0.0;
    double cost = 0.0;
    std::vector<StageCoord> executed;
    std::vector<double> executed_probs;
    std::optional<StageCoord> rejected_at;
};

// Reusable hard-mode evaluator; validates parameter shapes once and keeps
// scratch buffers so repeated prediction does not allocate.
class HardEvaluator {
public:
    HardEvaluator(const CascadeArchitecture& arch, const ParameterSet& params);

    // Full trace. Linear mode: stages run in order and the first p <= 0.5
    // rejects. Tree mode: every branch runs its own cascade (physically
    // parallel devices, so every branch's executed cost is always paid),
    // then the combiner; processing continues onto the root stages only if
    // every branch emitted a positive output.
    void predict(std::span<const double> x, HardDecisionTrace& trace);

    // Label only, no trace bookkeeping; used for timing.
    int predict_label(std::span<const double> x);

private:
    const CascadeArchitecture* arch_;
    const ParameterSet* params_;
    StageIndex index_;
    StageActivations scratch_;

    double stage_prob(StageCoord c, std::span<const double> x);
};

HardDecisionTrace predict_hard(const CascadeArchitecture& arch, const ParameterSet& params,
                               std::span<const double> x);

struct StagePassCount {
    StageCoord coord;
    long executed = 0;
    long passed = 0;
};

struct EvalMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    double mean_cost = 0.0;
    double mean_stages_executed = 0.0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<StagePassCount> stage_counts;  // evaluation order, combiner included
};

EvalMetrics evaluate(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                     std::span<const int> rows);
EvalMetrics evaluate(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data);

struct TimingResult {
    double mean_seconds_per_instance = 0.0;
    double stderr_seconds = 0.0;
    int repetitions = 0;
};

// Wall-clock cost of hard-mode classification, single-threaded. One
// repetition is a timed pass over the given rows; the mean and its
// standard error are computed over repetitions.
TimingResult time_harness(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                          std::span<const int> rows, int repetitions);
TimingResult time_harness(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                          int repetitions);

// Median seconds for one instance over the given repetitions.
double time_single_median(const CascadeArchitecture& arch, const ParameterSet& params, std::span<const double> x,
                          int repetitions);

}  // namespace firmcascade

#endif
