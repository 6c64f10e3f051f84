#include "firmcascade/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>

#include "firmcascade/errors.hpp"
#include "firmcascade/version.hpp"

namespace firmcascade {

namespace fs = std::filesystem;

Dataset load_data(const DataSource& source) {
    if (source.synthetic) return gen_synthetic(*source.synthetic);
    LoadReport report;
    Dataset data = load_csv(source.csv_path, source.schema, &report);
    if (!report.rejected_lines.empty()) {
        std::string note = " (rejected lines:";
        for (std::size_t i = 0; i < report.rejected_lines.size() && i < 10; ++i) {
            note += " " + std::to_string(report.rejected_lines[i]);
        }
        if (report.rejected_lines.size() > 10) note += " ...";
        note += ")";
        data.positive_class_note += note;
    }
    return data;
}

ExperimentConfig experiment_from_json(const ordered_json& doc, const std::string& base_dir) {
    try {
        ExperimentConfig cfg;
        cfg.echo = doc;
        auto resolve = [&](const std::string& p) {
            if (p.empty() || fs::path(p).is_absolute() || base_dir.empty()) return p;
            return (fs::path(base_dir) / p).string();
        };

        const auto& arch_node = doc.at("architecture");
        cfg.arch = arch_node.is_string() ? load_architecture(resolve(arch_node.get<std::string>()))
                                         : architecture_from_json(arch_node);

        const auto& data_node = doc.at("data");
        if (data_node.contains("synthetic")) {
            cfg.data.synthetic = synthetic_from_json(data_node.at("synthetic"));
        } else {
            cfg.data.csv_path = resolve(data_node.at("csv").get<std::string>());
            const auto& schema_node = data_node.at("schema");
            cfg.data.schema = schema_node.is_string() ? schema_from_json(load_json_file(resolve(schema_node.get<std::string>())))
                                                      : schema_from_json(schema_node);
        }

        const std::string family = doc.value("family", std::string("firm"));
        if (family == "both") {
            cfg.families = {ObjectiveFamily::Firm, ObjectiveFamily::Soft};
        } else {
            cfg.families = {objective_family_from_string(family)};
        }

        if (doc.contains("lambda_grid")) cfg.lambda_grid = doc.at("lambda_grid").get<std::vector<double>>();
        cfg.folds = doc.value("folds", 8);
        cfg.seed = doc.value("seed", std::uint64_t{1});
        cfg.timing_repetitions = doc.value("timing_repetitions", 0);
        cfg.threads = doc.value("threads", 1);
        cfg.train = doc.contains("train") ? train_config_from_json(doc.at("train"), TrainConfig{}) : TrainConfig{};
        cfg.train.seed = cfg.seed;

        if (doc.contains("alpha")) {
            const GatingConfig gating = gating_from_json(doc.at("alpha"));
            if (gating.is_hard()) {
                // gradients vanish at the hard limit; train with the
                // sharpest finite sweep value instead and record it
                cfg.arch.gating = GatingConfig::finite(1024.0);
                cfg.alpha_substituted = true;
            } else {
                cfg.arch.gating = gating;
            }
        }
        cfg.train.objective.gating = cfg.arch.gating;

        if (cfg.folds < 2) throw ConfigError("experiment needs at least 2 folds");
        if (cfg.lambda_grid.empty()) throw ConfigError("lambda grid is empty");
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig load_experiment(const std::string& path) {
    return experiment_from_json(load_json_file(path), fs::path(path).parent_path().string());
}

namespace {

ordered_json metrics_to_json(const EvalMetrics& m) {
    ordered_json j;
    j["accuracy"] = m.accuracy;
    j["f1"] = m.f1;
    j["mean_cost"] = m.mean_cost;
    j["mean_stages_executed"] = m.mean_stages_executed;
    j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    ordered_json counts = ordered_json::array();
    for (const auto& sc : m.stage_counts) {
        counts.push_back({{"device", sc.coord.device},
                          {"stage", sc.coord.stage},
                          {"executed", sc.executed},
                          {"passed", sc.passed}});
    }
    j["pass_counts"] = std::move(counts);
    return j;
}

ordered_json sweep_to_json(const SweepResult& sweep, int timing_repetitions) {
    ordered_json grid = ordered_json::array();
    for (const auto& point : sweep.points) {
        ordered_json p;
        p["lambda"] = point.lambda;
        p["accuracy_mean"] = point.accuracy_mean;
        p["accuracy_se"] = point.accuracy_se;
        p["f1_mean"] = point.f1_mean;
        p["f1_se"] = point.f1_se;
        p["cost_mean"] = point.cost_mean;
        p["cost_se"] = point.cost_se;
        p["stages_mean"] = point.stages_mean;
        p["stages_se"] = point.stages_se;
        ordered_json folds = ordered_json::array();
        for (const auto& f : point.folds) {
            ordered_json fj = metrics_to_json(f.metrics);
            fj["fold"] = f.fold;
            fj["final_objective"] = f.final_objective;
            if (timing_repetitions > 0) {
                fj["mean_seconds"] = f.timing.mean_seconds_per_instance;
                fj["stderr_seconds"] = f.timing.stderr_seconds;
            }
            folds.push_back(std::move(fj));
        }
        p["folds"] = std::move(folds);
        grid.push_back(std::move(p));
    }
    ordered_json j;
    j["grid"] = std::move(grid);
    const auto& best = sweep.points[static_cast<std::size_t>(sweep.best_index)];
    j["best"] = {{"index", sweep.best_index},
                 {"lambda", best.lambda},
                 {"accuracy_mean", best.accuracy_mean},
                 {"accuracy_se", best.accuracy_se},
                 {"f1_mean", best.f1_mean},
                 {"cost_mean", best.cost_mean},
                 {"cost_se", best.cost_se},
                 {"stages_mean", best.stages_mean}};
    return j;
}

ordered_json ttest_to_json(const PairedTTestResult& r) {
    return {{"t", r.t}, {"p_two_sided", r.p_two_sided}, {"dof", r.dof}, {"mean_diff", r.mean_diff}};
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    const Dataset data = load_data(cfg.data);
    ordered_json doc;
    doc["schema_version"] = 1;
    doc["kind"] = "experiment-report";
    doc["toolkit_version"] = kToolkitVersion;
    doc["config_echo"] = cfg.echo;
    if (cfg.alpha_substituted) {
        doc["alpha_substitution"] = "hard gating requested; trained with alpha = 1024 and evaluated in hard mode";
    }
    doc["dataset"] = {{"rows", data.rows}, {"cols", data.cols}, {"positives", data.positive_count()}};
    doc["families"] = ordered_json::object();

    std::vector<SweepResult> sweeps;
    try {
        for (const ObjectiveFamily family : cfg.families) {
            TrainConfig train_cfg = cfg.train;
            train_cfg.objective.family = family;
            train_cfg.objective.gating = cfg.arch.gating;
            SweepResult sweep = lambda_sweep(cfg.arch, data, cfg.lambda_grid, train_cfg, cfg.folds, cfg.threads,
                                             cfg.timing_repetitions);
            doc["families"][to_string(family)] = sweep_to_json(sweep, cfg.timing_repetitions);
            sweeps.push_back(std::move(sweep));
        }
    } catch (...) {
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            doc["incomplete"] = true;
            save_json_file(doc, (fs::path(out_dir) / "partial_report.json").string());
        }
        throw;
    }

    if (sweeps.size() == 2) {
        // firm vs soft at each family's own best operating point, paired
        // over the shared fold plan
        const auto& firm_best = sweeps[0].points[static_cast<std::size_t>(sweeps[0].best_index)];
        const auto& soft_best = sweeps[1].points[static_cast<std::size_t>(sweeps[1].best_index)];
        std::vector<double> firm_cost, soft_cost, firm_acc, soft_acc;
        for (int f = 0; f < cfg.folds; ++f) {
            firm_cost.push_back(firm_best.folds[static_cast<std::size_t>(f)].metrics.mean_cost);
            soft_cost.push_back(soft_best.folds[static_cast<std::size_t>(f)].metrics.mean_cost);
            firm_acc.push_back(firm_best.folds[static_cast<std::size_t>(f)].metrics.accuracy);
            soft_acc.push_back(soft_best.folds[static_cast<std::size_t>(f)].metrics.accuracy);
        }
        ordered_json cmp;
        try {
            cmp["cost"] = ttest_to_json(paired_t_test(firm_cost, soft_cost));
        } catch (const DegenerateInputError& e) {
            cmp["cost"] = {{"degenerate", e.what()}};
        }
        try {
            cmp["accuracy"] = ttest_to_json(paired_t_test(firm_acc, soft_acc));
        } catch (const DegenerateInputError& e) {
            cmp["accuracy"] = {{"degenerate", e.what()}};
        }
        doc["comparison"] = std::move(cmp);
    }

    ExperimentReport report{std::move(doc)};
    if (!out_dir.empty()) write_report(report, out_dir);
    return report;
}

ordered_json strip_timing(const ordered_json& doc) {
    ordered_json out = doc;
    std::function<void(ordered_json&)> walk = [&](ordered_json& node) {
        if (node.is_object()) {
            node.erase("mean_seconds");
            node.erase("stderr_seconds");
            for (auto& [key, value] : node.items()) walk(value);
        } else if (node.is_array()) {
            for (auto& value : node) walk(value);
        }
    };
    walk(out);
    return out;
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    save_json_file(report.document, (fs::path(out_dir) / "report.json").string());

    std::ofstream sweep_csv(fs::path(out_dir) / "sweep.csv");
    sweep_csv << "family,lambda,accuracy_mean,accuracy_se,f1_mean,f1_se,cost_mean,cost_se,stages_mean,stages_se,"
                 "is_best\n";
    std::ofstream folds_csv(fs::path(out_dir) / "folds.csv");
    folds_csv << "family,lambda,fold,accuracy,f1,mean_cost,mean_stages_executed,tp,fp,tn,fn\n";
    char buf[40];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& [family, sweep] : report.document.at("families").items()) {
        const int best = sweep.at("best").at("index").get<int>();
        int idx = 0;
        for (const auto& point : sweep.at("grid")) {
            sweep_csv << family << ',' << num(point.at("lambda").get<double>()) << ','
                      << num(point.at("accuracy_mean").get<double>()) << ',' << num(point.at("accuracy_se").get<double>())
                      << ',' << num(point.at("f1_mean").get<double>()) << ',' << num(point.at("f1_se").get<double>())
                      << ',' << num(point.at("cost_mean").get<double>()) << ',' << num(point.at("cost_se").get<double>())
                      << ',' << num(point.at("stages_mean").get<double>()) << ','
                      << num(point.at("stages_se").get<double>()) << ',' << (idx == best ? 1 : 0) << '\n';
            for (const auto& fold : point.at("folds")) {
                const auto& confusion = fold.at("confusion");
                folds_csv << family << ',' << num(point.at("lambda").get<double>()) << ','
                          << fold.at("fold").get<int>() << ',' << num(fold.at("accuracy").get<double>()) << ','
                          << num(fold.at("f1").get<double>()) << ',' << num(fold.at("mean_cost").get<double>()) << ','
                          << num(fold.at("mean_stages_executed").get<double>()) << ','
                          << confusion.at("tp").get<long>() << ',' << confusion.at("fp").get<long>() << ','
                          << confusion.at("tn").get<long>() << ',' << confusion.at("fn").get<long>() << '\n';
            }
            ++idx;
        }
    }
}

std::vector<AlphaCell> alpha_sensitivity(const ExperimentConfig& cfg, const std::vector<std::string>& alpha_labels) {
    if (alpha_labels.empty()) throw InputError("alpha study needs at least one sharpness value");
    const Dataset data = load_data(cfg.data);
    std::vector<AlphaCell> cells;
    for (const auto& label : alpha_labels) {
        AlphaCell cell;
        cell.label = label;
        GatingConfig gating = GatingConfig::defaults();
        if (label == "inf") {
            gating = GatingConfig::finite(1024.0);  // gradient surrogate for the hard limit
            cell.hard_eval = true;
            cell.substituted = true;
        } else {
            gating = GatingConfig::finite(std::stod(label));
        }
        CascadeArchitecture arch = cfg.arch;
        arch.gating = gating;
        TrainConfig train_cfg = cfg.train;
        train_cfg.objective.gating = gating;
        train_cfg.objective.family = cfg.families.front();
        const SweepResult sweep = lambda_sweep(arch, data, cfg.lambda_grid, train_cfg, cfg.folds, cfg.threads);
        const auto& best = sweep.points[static_cast<std::size_t>(sweep.best_index)];
        cell.best_lambda = best.lambda;
        cell.best_accuracy = best.accuracy_mean;
        cell.best_accuracy_se = best.accuracy_se;
        cell.best_cost = best.cost_mean;
        cell.best_cost_se = best.cost_se;
        cells.push_back(cell);
    }
    return cells;
}

ordered_json alpha_study_to_json(const ExperimentConfig& cfg, const std::vector<AlphaCell>& cells) {
    ordered_json doc;
    doc["schema_version"] = 1;
    doc["kind"] = "alpha-study";
    doc["toolkit_version"] = kToolkitVersion;
    doc["config_echo"] = cfg.echo;
    ordered_json rows = ordered_json::array();
    for (const auto& c : cells) {
        rows.push_back({{"alpha", c.label},
                        {"substituted", c.substituted},
                        {"best_lambda", c.best_lambda},
                        {"best_accuracy", c.best_accuracy},
                        {"best_accuracy_se", c.best_accuracy_se},
                        {"best_cost", c.best_cost},
                        {"best_cost_se", c.best_cost_se}});
    }
    doc["cells"] = std::move(rows);
    return doc;
}

void write_alpha_study(const ordered_json& doc, const std::string& out_dir) {
    fs::create_directories(out_dir);
    save_json_file(doc, (fs::path(out_dir) / "alpha_study.json").string());
    std::ofstream csv(fs::path(out_dir) / "alpha.csv");
    csv << "alpha,substituted,best_lambda,best_accuracy,best_accuracy_se,best_cost,best_cost_se\n";
    char buf[40];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& c : doc.at("cells")) {
        csv << c.at("alpha").get<std::string>() << ',' << (c.at("substituted").get<bool>() ? 1 : 0) << ','
            << num(c.at("best_lambda").get<double>()) << ',' << num(c.at("best_accuracy").get<double>()) << ','
            << num(c.at("best_accuracy_se").get<double>()) << ',' << num(c.at("best_cost").get<double>()) << ','
            << num(c.at("best_cost_se").get<double>()) << '\n';
    }
}

}  // namespace firmcascade
