#include "firmcascade/training.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "firmcascade/errors.hpp"
#include "firmcascade/rng.hpp"

namespace firmcascade {

namespace {
// stream tags keeping the independent RNG streams apart
constexpr std::uint64_t kStreamJointShuffle = 0x01;
constexpr std::uint64_t kStreamFoldPlan = 0x02;
constexpr std::uint64_t kStreamReverseInit = 0x1000;
constexpr std::uint64_t kStreamSweepTask = 0x2000;
}  // namespace

std::string to_string(InitScheme scheme) {
    return scheme == InitScheme::ReverseStagewise ? "reverse-stagewise" : "random-only";
}

InitScheme init_scheme_from_string(const std::string& s) {
    if (s == "reverse-stagewise") return InitScheme::ReverseStagewise;
    if (s == "random-only") return InitScheme::RandomOnly;
    throw ConfigError("unknown init scheme '" + s + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
    if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) throw ConfigError("rmsprop decay must lie in (0,1)");
    if (!(rmsprop_epsilon > 0.0)) throw ConfigError("rmsprop epsilon must be > 0");
    if (epochs <= 0) throw ConfigError("epoch count must be positive");
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    if (objective.lambda < 0.0 || !std::isfinite(objective.lambda)) throw ConfigError("lambda must be >= 0");
}

void rmsprop_step(ParameterSet& params, const GradientSet& grads, OptimizerState& state, const TrainConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.size()) {
        throw StructuralError("parameters, gradients and optimizer state must have the same stage count");
    }
    const double rho = cfg.rmsprop_decay;
    for (std::size_t s = 0; s < params.size(); ++s) {
        if (params[s].layers.size() != grads[s].layers.size() || params[s].layers.size() != state[s].layers.size()) {
            throw StructuralError("layer count mismatch at stage " + std::to_string(s));
        }
        for (std::size_t l = 0; l < params[s].layers.size(); ++l) {
            auto advance = [&](std::vector<double>& value, const std::vector<double>& grad, std::vector<double>& mean_sq) {
                if (value.size() != grad.size() || value.size() != mean_sq.size()) {
                    throw StructuralError("parameter shape mismatch at stage " + std::to_string(s));
                }
                for (std::size_t i = 0; i < value.size(); ++i) {
                    const double g = grad[i];
                    if (!std::isfinite(g)) {
                        throw TrainError("non-finite gradient at stage " + std::to_string(s), -1,
                                         static_cast<int>(s));
                    }
                    mean_sq[i] = rho * mean_sq[i] + (1.0 - rho) * g * g;
                    value[i] += cfg.learning_rate * g / (std::sqrt(mean_sq[i]) + cfg.rmsprop_epsilon);
                }
            };
            advance(params[s].layers[l].weights, grads[s].layers[l].weights, state[s].layers[l].weights);
            advance(params[s].layers[l].biases, grads[s].layers[l].biases, state[s].layers[l].biases);
        }
    }
}

namespace {

void check_data(const CascadeArchitecture& arch, const Dataset& data, std::span<const int> rows) {
    if (rows.empty()) throw InputError("training needs a non-empty dataset");
    const auto violations = validate_architecture(arch, data.cols);
    if (!violations.empty()) {
        std::string msg = "architecture invalid for this dataset:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ConfigError(msg);
    }
    for (int r : rows) {
        const int y = data.labels[static_cast<std::size_t>(r)];
        if (y != 0 && y != 1) throw DataError("labels must be binary; row " + std::to_string(r));
    }
}

// Mini-batch RMSProp ascent over the given rows. Gradients flow only into
// stages whose mask entry is true (all true during joint training).
void run_epochs(const CascadeArchitecture& arch, ParameterSet& params, const Dataset& data,
                std::span<const int> rows, const TrainConfig& cfg, const ObjectiveConfig& obj, int epochs,
                std::uint64_t shuffle_seed, const std::vector<char>* update_mask,
                std::vector<double>* history) {
    OptimizerState state = zero_like(params);
    std::vector<int> order(rows.begin(), rows.end());
    Rng rng(shuffle_seed);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        try {
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
                GradientSet grads =
                    objective_gradient(arch, params, data, {order.data() + start, len}, obj);
                if (update_mask) {
                    for (std::size_t s = 0; s < grads.size(); ++s) {
                        if (!(*update_mask)[s]) grads[s].fill(0.0);
                    }
                }
                rmsprop_step(params, grads, state, cfg);
            }
        } catch (const TrainError& e) {
            throw TrainError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")", epoch, e.stage);
        } catch (const InputError& e) {
            // parameters blew up to non-finite values: divergence
            throw TrainError(std::string("diverged: ") + e.what() + " (epoch " + std::to_string(epoch) + ")",
                             epoch);
        }
        if (history) {
            double obj_value;
            try {
                obj_value = objective_value(arch, params, data, rows, obj);
            } catch (const InputError& e) {
                throw TrainError(std::string("diverged: ") + e.what() + " (epoch " + std::to_string(epoch) + ")",
                                 epoch);
            }
            if (!std::isfinite(obj_value)) {
                throw TrainError("objective diverged at epoch " + std::to_string(epoch), epoch);
            }
            history->push_back(obj_value);
        }
    }
}

}  // namespace

ParameterSet reverse_stagewise_init(const CascadeArchitecture& arch, const Dataset& data,
                                    std::span<const int> rows, const TrainConfig& cfg) {
    cfg.validate();
    check_data(arch, data, rows);
    StageIndex index(arch);
    ParameterSet params = init_parameters(arch, cfg.seed);
    const int budget = std::max(1, cfg.epochs / 4);

    // root device first so branch stages can see a trained root
    std::vector<int> devices;
    devices.push_back(arch.root_device());
    for (int d = 0; d < arch.branch_count(); ++d) devices.push_back(d);

    for (int device : devices) {
        const bool is_branch = device != arch.root_device();
        const auto& device_stages = is_branch ? arch.branches[static_cast<std::size_t>(device)] : arch.root;
        for (int l = static_cast<int>(device_stages.size()) - 1; l >= 0; --l) {
            if (!device_stages[static_cast<std::size_t>(l)].trainable()) continue;
            // linear sub-cascade: this stage, the rest of its device, then
            // the root stages for branch devices
            std::vector<StageCoord> chain;
            for (int m = l; m < static_cast<int>(device_stages.size()); ++m) chain.push_back({device, m});
            if (is_branch) {
                for (int m = 0; m < static_cast<int>(arch.root.size()); ++m) {
                    if (arch.root[static_cast<std::size_t>(m)].trainable()) chain.push_back({arch.root_device(), m});
                }
            }
            CascadeArchitecture sub;
            sub.mode = CascadeMode::Linear;
            sub.gating = arch.gating;
            for (const auto& c : chain) sub.root.push_back(arch.spec_at(c));
            ParameterSet sub_params;
            for (const auto& c : chain) sub_params.push_back(params[static_cast<std::size_t>(index.global_of(c))]);
            std::vector<char> mask(chain.size(), 0);
            mask[0] = 1;  // only the stage under initialization moves
            const std::uint64_t stream =
                kStreamReverseInit + static_cast<std::uint64_t>(device) * 64 + static_cast<std::uint64_t>(l);
            run_epochs(sub, sub_params, data, rows, cfg, cfg.objective, budget, mix_seed(cfg.seed, stream), &mask,
                       nullptr);
            params[static_cast<std::size_t>(index.global_of({device, l}))] = std::move(sub_params[0]);
        }
    }
    return params;
}

TrainedModel train(const CascadeArchitecture& arch, const Dataset& data, std::span<const int> rows,
                   const TrainConfig& cfg) {
    cfg.validate();
    check_data(arch, data, rows);
    TrainedModel model;
    model.arch = arch;
    model.config = cfg;
    model.params = cfg.init == InitScheme::ReverseStagewise ? reverse_stagewise_init(arch, data, rows, cfg)
                                                            : init_parameters(arch, cfg.seed);
    run_epochs(arch, model.params, data, rows, cfg, cfg.objective, cfg.epochs,
               mix_seed(cfg.seed, kStreamJointShuffle), nullptr, &model.history);
    return model;
}

TrainedModel train(const CascadeArchitecture& arch, const Dataset& data, const TrainConfig& cfg) {
    std::vector<int> rows(static_cast<std::size_t>(data.rows));
    std::iota(rows.begin(), rows.end(), 0);
    return train(arch, data, rows, cfg);
}

std::vector<double> default_lambda_grid() { return {0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}; }

int best_point_index(const std::vector<SweepPoint>& points) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(points.size()); ++i) {
        const auto& cand = points[static_cast<std::size_t>(i)];
        const auto& cur = points[static_cast<std::size_t>(best)];
        if (cand.accuracy_mean > cur.accuracy_mean + 1e-12 ||
            (std::abs(cand.accuracy_mean - cur.accuracy_mean) <= 1e-12 && cand.cost_mean < cur.cost_mean - 1e-12)) {
            best = i;
        }
    }
    return best;
}

namespace {

void aggregate(SweepPoint& point) {
    const double n = static_cast<double>(point.folds.size());
    auto mean_se = [&](auto getter, double& mean, double& se) {
        mean = 0.0;
        for (const auto& f : point.folds) mean += getter(f);
        mean /= n;
        if (point.folds.size() > 1) {
            double ss = 0.0;
            for (const auto& f : point.folds) {
                const double d = getter(f) - mean;
                ss += d * d;
            }
            se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        } else {
            se = 0.0;
        }
    };
    mean_se([](const FoldOutcome& f) { return f.metrics.accuracy; }, point.accuracy_mean, point.accuracy_se);
    mean_se([](const FoldOutcome& f) { return f.metrics.f1; }, point.f1_mean, point.f1_se);
    mean_se([](const FoldOutcome& f) { return f.metrics.mean_cost; }, point.cost_mean, point.cost_se);
    mean_se([](const FoldOutcome& f) { return f.metrics.mean_stages_executed; }, point.stages_mean, point.stages_se);
}

}  // namespace

SweepResult lambda_sweep(const CascadeArchitecture& arch, const Dataset& data, std::span<const double> grid,
                         const TrainConfig& cfg, int folds, int threads, int timing_repetitions) {
    if (grid.empty()) throw InputError("lambda grid is empty");
    const FoldPlan plan = stratified_kfold(data, folds, mix_seed(cfg.seed, kStreamFoldPlan));

    SweepResult result;
    result.points.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        result.points[i].lambda = grid[i];
        result.points[i].folds.resize(static_cast<std::size_t>(folds));
    }

    struct Task {
        int grid_index;
        int fold;
    };
    std::vector<Task> tasks;
    for (int i = 0; i < static_cast<int>(grid.size()); ++i) {
        for (int f = 0; f < folds; ++f) tasks.push_back({i, f});
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            try {
                const Task task = tasks[t];
                TrainConfig run_cfg = cfg;
                run_cfg.objective.lambda = grid[static_cast<std::size_t>(task.grid_index)];
                run_cfg.seed = mix_seed(cfg.seed, kStreamSweepTask + static_cast<std::uint64_t>(task.grid_index) *
                                                                         1024 +
                                                      static_cast<std::uint64_t>(task.fold));
                const auto train_rows = plan.train_rows(task.fold);
                const auto test_rows = plan.test_rows(task.fold);
                TrainedModel model = train(arch, data, train_rows, run_cfg);
                FoldOutcome outcome;
                outcome.fold = task.fold;
                outcome.metrics = evaluate(arch, model.params, data, test_rows);
                outcome.final_objective = model.history.empty() ? 0.0 : model.history.back();
                if (timing_repetitions > 0) {
                    outcome.timing = time_harness(arch, model.params, data, test_rows, timing_repetitions);
                }
                result.points[static_cast<std::size_t>(task.grid_index)]
                    .folds[static_cast<std::size_t>(task.fold)] = std::move(outcome);
            } catch (...) {
                std::scoped_lock lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (auto& point : result.points) aggregate(point);
    result.best_index = best_point_index(result.points);
    return result;
}

}  // namespace firmcascade
