#include "firmcascade/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "firmcascade/errors.hpp"

namespace firmcascade {

HardEvaluator::HardEvaluator(const CascadeArchitecture& arch, const ParameterSet& params)
    : arch_(&arch), params_(&params), index_(arch) {
    check_parameter_shapes(arch, params);
}

double HardEvaluator::stage_prob(StageCoord c, std::span<const double> x) {
    const int g = index_.global_of(c);
    stage_forward_cached(arch_->spec_at(c), (*params_)[static_cast<std::size_t>(g)], x, scratch_);
    return scratch_.prob;
}

void HardEvaluator::predict(std::span<const double> x, HardDecisionTrace& trace) {
    const CascadeArchitecture& arch = *arch_;
    trace.executed.clear();
    trace.executed_probs.clear();
    trace.rejected_at.reset();
    trace.cost = 0.0;

    auto run_stage = [&](StageCoord c, double prob) {
        trace.executed.push_back(c);
        trace.executed_probs.push_back(prob);
        trace.cost += arch.spec_at(c).cost;
    };

    if (arch.mode == CascadeMode::Linear) {
        double p = 0.5;
        for (int l = 0; l < static_cast<int>(arch.root.size()); ++l) {
            const StageCoord c{arch.root_device(), l};
            p = stage_prob(c, x);
            run_stage(c, p);
            if (p <= 0.5) {  // strict > 0.5 passes; ties reject
                trace.label = 0;
                trace.score = p;
                trace.rejected_at = c;
                return;
            }
        }
        trace.label = 1;
        trace.score = p;
        return;
    }

    // Tree mode: every branch runs to its own early exit; all of that cost
    // is incurred regardless of the other branches.
    bool all_pass = true;
    double product = 1.0;
    for (int d = 0; d < arch.branch_count(); ++d) {
        double out = 0.5;
        for (int l = 0; l < static_cast<int>(arch.branches[static_cast<std::size_t>(d)].size()); ++l) {
            const StageCoord c{d, l};
            out = stage_prob(c, x);
            run_stage(c, out);
            if (out <= 0.5) {
                if (all_pass && !trace.rejected_at) trace.rejected_at = c;
                all_pass = false;
                break;
            }
        }
        product *= out;
    }
    const StageCoord comb{arch.root_device(), 0};
    run_stage(comb, product);  // the combiner always executes on the root device
    if (!all_pass) {
        trace.label = 0;
        trace.score = product;
        return;
    }
    if (arch.root.size() == 1) {
        // No stages beyond the combiner: threshold its product, matching
        // the pass-through value of the trained combination.
        trace.label = product > 0.5 ? 1 : 0;
        trace.score = product;
        if (trace.label == 0) trace.rejected_at = comb;
        return;
    }
    double p = 0.5;
    for (int l = 1; l < static_cast<int>(arch.root.size()); ++l) {
        const StageCoord c{arch.root_device(), l};
        p = stage_prob(c, x);
        run_stage(c, p);
        if (p <= 0.5) {
            trace.label = 0;
            trace.score = p;
            trace.rejected_at = c;
            return;
        }
    }
    trace.label = 1;
    trace.score = p;
}

int HardEvaluator::predict_label(std::span<const double> x) {
    const CascadeArchitecture& arch = *arch_;
    if (arch.mode == CascadeMode::Linear) {
        double p = 0.5;
        for (int l = 0; l < static_cast<int>(arch.root.size()); ++l) {
            p = stage_prob({arch.root_device(), l}, x);
            if (p <= 0.5) return 0;
        }
        return 1;
    }
    bool all_pass = true;
    double product = 1.0;
    for (int d = 0; d < arch.branch_count(); ++d) {
        double out = 0.5;
        for (int l = 0; l < static_cast<int>(arch.branches[static_cast<std::size_t>(d)].size()); ++l) {
            out = stage_prob({d, l}, x);
            if (out <= 0.5) {
                all_pass = false;
                break;
            }
        }
        product *= out;
    }
    if (!all_pass) return 0;
    if (arch.root.size() == 1) return product > 0.5 ? 1 : 0;
    for (int l = 1; l < static_cast<int>(arch.root.size()); ++l) {
        if (stage_prob({arch.root_device(), l}, x) <= 0.5) return 0;
    }
    return 1;
}

HardDecisionTrace predict_hard(const CascadeArchitecture& arch, const ParameterSet& params,
                               std::span<const double> x) {
    HardEvaluator eval(arch, params);
    HardDecisionTrace trace;
    eval.predict(x, trace);
    return trace;
}

EvalMetrics evaluate(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                     std::span<const int> rows) {
    if (rows.empty()) throw InputError("evaluation over an empty dataset");
    HardEvaluator eval(arch, params);
    HardDecisionTrace trace;

    EvalMetrics m;
    const auto stages = arch.all_stages();
    m.stage_counts.reserve(stages.size());
    for (const auto& c : stages) m.stage_counts.push_back({c, 0, 0});
    auto count_slot = [&](StageCoord c) -> StagePassCount& {
        for (auto& sc : m.stage_counts)
            if (sc.coord == c) return sc;
        throw StructuralError("trace references a stage outside the architecture");
    };

    double cost_sum = 0.0, stage_sum = 0.0;
    for (int r : rows) {
        eval.predict(data.row(r), trace);
        const int y = data.labels[static_cast<std::size_t>(r)];
        if (trace.label == 1) {
            (y == 1 ? m.tp : m.fp) += 1;
        } else {
            (y == 1 ? m.fn : m.tn) += 1;
        }
        cost_sum += trace.cost;
        stage_sum += static_cast<double>(trace.executed.size());
        for (std::size_t i = 0; i < trace.executed.size(); ++i) {
            auto& slot = count_slot(trace.executed[i]);
            slot.executed += 1;
            const StageCoord c = trace.executed[i];
            bool passed;
            if (arch.mode == CascadeMode::Tree && c.device == arch.root_device() && c.stage == 0) {
                // the combiner passes an instance onward when every branch
                // emitted a positive output (thresholding its own product
                // when it is the final stage)
                passed = arch.root.size() == 1 ? trace.label == 1 : i + 1 < trace.executed.size();
            } else {
                passed = trace.executed_probs[i] > 0.5;
            }
            if (passed) slot.passed += 1;
        }
    }
    const double n = static_cast<double>(rows.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / n;
    const double prec = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    const double rec = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.mean_cost = cost_sum / n;
    m.mean_stages_executed = stage_sum / n;
    return m;
}

EvalMetrics evaluate(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data) {
    std::vector<int> rows(static_cast<std::size_t>(data.rows));
    for (int i = 0; i < data.rows; ++i) rows[static_cast<std::size_t>(i)] = i;
    return evaluate(arch, params, data, rows);
}

TimingResult time_harness(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                          std::span<const int> rows, int repetitions) {
    if (repetitions < 1) throw InputError("timing needs at least one repetition");
    if (rows.empty()) throw InputError("timing over an empty dataset");
    HardEvaluator eval(arch, params);
    volatile int sink = 0;
    std::vector<double> per_instance(static_cast<std::size_t>(repetitions));
    using clock = std::chrono::steady_clock;
    for (int rep = 0; rep < repetitions; ++rep) {
        const auto t0 = clock::now();
        for (int r : rows) sink = sink + eval.predict_label(data.row(r));
        const auto t1 = clock::now();
        per_instance[static_cast<std::size_t>(rep)] =
            std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(rows.size());
    }
    TimingResult out;
    out.repetitions = repetitions;
    double mean = 0.0;
    for (double v : per_instance) mean += v;
    mean /= static_cast<double>(repetitions);
    out.mean_seconds_per_instance = mean;
    if (repetitions > 1) {
        double ss = 0.0;
        for (double v : per_instance) ss += (v - mean) * (v - mean);
        out.stderr_seconds = std::sqrt(ss / static_cast<double>(repetitions - 1)) /
                             std::sqrt(static_cast<double>(repetitions));
    }
    return out;
}

TimingResult time_harness(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                          int repetitions) {
    std::vector<int> rows(static_cast<std::size_t>(data.rows));
    for (int i = 0; i < data.rows; ++i) rows[static_cast<std::size_t>(i)] = i;
    return time_harness(arch, params, data, rows, repetitions);
}

double time_single_median(const CascadeArchitecture& arch, const ParameterSet& params, std::span<const double> x,
                          int repetitions) {
    if (repetitions < 1) throw InputError("timing needs at least one repetition");
    HardEvaluator eval(arch, params);
    volatile int sink = 0;
    std::vector<double> samples(static_cast<std::size_t>(repetitions));
    using clock = std::chrono::steady_clock;
    for (int rep = 0; rep < repetitions; ++rep) {
        const auto t0 = clock::now();
        sink = sink + eval.predict_label(x);
        const auto t1 = clock::now();
        samples[static_cast<std::size_t>(rep)] = std::chrono::duration<double>(t1 - t0).count();
    }
    std::nth_element(samples.begin(), samples.begin() + repetitions / 2, samples.end());
    return samples[static_cast<std::size_t>(repetitions / 2)];
}

}  // namespace firmcascade
