// Command-line front end: train/evaluate single models, run sweeps and
// sharpness studies, generate benchmark data, validate configs and re-emit
// report tables.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <thread>

#include "firmcascade/errors.hpp"
#include "firmcascade/experiment.hpp"
#include "firmcascade/inference.hpp"
#include "firmcascade/json_io.hpp"
#include "firmcascade/version.hpp"

namespace fs = std::filesystem;
using namespace firmcascade;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

struct GlobalOpts {
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    std::string out_dir = "out";
    std::string trace_log;
};

DataSource data_source_from_flags(const std::string& data_path, const std::string& schema_path,
                                  const std::string& synth_path) {
    DataSource source;
    if (!synth_path.empty()) {
        source.synthetic = synthetic_from_json(load_json_file(synth_path));
        return source;
    }
    if (data_path.empty()) throw ConfigError("no dataset given: use --data with --schema, or --synthetic");
    source.csv_path = data_path;
    if (!schema_path.empty()) {
        source.schema = schema_from_json(load_json_file(schema_path));
    } else {
        source.schema.header = true;
        source.schema.label_column = std::string("label");
    }
    return source;
}

void write_trace_log(const CascadeArchitecture& arch, const ParameterSet& params, const Dataset& data,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace log '" + path + "'");
    HardEvaluator eval(arch, params);
    HardDecisionTrace trace;
    for (int r = 0; r < data.rows; ++r) {
        eval.predict(data.row(r), trace);
        ordered_json line;
        line["row"] = r;
        line["label_true"] = data.labels[static_cast<std::size_t>(r)];
        line["label"] = trace.label;
        line["score"] = trace.score;
        line["cost"] = trace.cost;
        ordered_json executed = ordered_json::array();
        for (const auto& c : trace.executed) executed.push_back({c.device, c.stage});
        line["executed"] = std::move(executed);
        line["probs"] = trace.executed_probs;
        if (trace.rejected_at) {
            line["rejected_at"] = {trace.rejected_at->device, trace.rejected_at->stage};
        } else {
            line["rejected_at"] = nullptr;
        }
        out << line.dump() << '\n';
    }
}

int cmd_train(const GlobalOpts& g, const std::string& arch_path, const std::string& data_path,
              const std::string& schema_path, const std::string& synth_path, const ordered_json& train_doc,
              const std::string& model_out) {
    CascadeArchitecture arch = load_architecture(arch_path);
    TrainConfig cfg = train_config_from_json(train_doc, TrainConfig{});
    if (g.seed) cfg.seed = *g.seed;
    cfg.objective.gating = arch.gating;
    if (train_doc.contains("alpha")) {
        arch.gating = cfg.objective.gating;  // explicit alpha overrides the architecture
    } else {
        cfg.objective.gating = arch.gating;
    }
    const Dataset data = load_data(data_source_from_flags(data_path, schema_path, synth_path));
    TrainedModel model = train(arch, data, cfg);

    fs::create_directories(g.out_dir);
    const std::string out = model_out.empty() ? (fs::path(g.out_dir) / "model.json").string() : model_out;
    save_model(model, out);
    std::ofstream hist(fs::path(g.out_dir) / "history.csv");
    hist << "epoch,objective\n";
    char buf[40];
    for (std::size_t e = 0; e < model.history.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", model.history[e]);
        hist << e << ',' << buf << '\n';
    }
    const EvalMetrics m = evaluate(arch, model.params, data);
    std::cout << "model written to " << out << "\n"
              << "train accuracy " << m.accuracy << ", f1 " << m.f1 << ", mean cost " << m.mean_cost << "\n";
    return kExitOk;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& model_path, const std::string& data_path,
                 const std::string& schema_path, const std::string& synth_path, int time_reps) {
    const TrainedModel model = load_model(model_path);
    const Dataset data = load_data(data_source_from_flags(data_path, schema_path, synth_path));
    const EvalMetrics m = evaluate(model.arch, model.params, data);
    ordered_json out;
    out["accuracy"] = m.accuracy;
    out["f1"] = m.f1;
    out["mean_cost"] = m.mean_cost;
    out["mean_stages_executed"] = m.mean_stages_executed;
    out["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    ordered_json counts = ordered_json::array();
    for (const auto& sc : m.stage_counts) {
        counts.push_back({{"device", sc.coord.device},
                          {"stage", sc.coord.stage},
                          {"executed", sc.executed},
                          {"passed", sc.passed}});
    }
    out["pass_counts"] = std::move(counts);
    if (time_reps > 0) {
        const TimingResult t = time_harness(model.arch, model.params, data, time_reps);
        out["mean_seconds"] = t.mean_seconds_per_instance;
        out["stderr_seconds"] = t.stderr_seconds;
        out["timing_repetitions"] = t.repetitions;
    }
    std::cout << out.dump(2) << '\n';
    if (!g.trace_log.empty()) write_trace_log(model.arch, model.params, data, g.trace_log);
    return kExitOk;
}

ExperimentConfig prepare_experiment(const GlobalOpts& g, const std::string& config_path) {
    ExperimentConfig cfg = load_experiment(config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.train.seed = *g.seed;
    }
    if (g.deterministic) {
        cfg.threads = 1;
    } else if (cfg.threads <= 0) {
        cfg.threads = static_cast<int>(std::thread::hardware_concurrency());
    }
    return cfg;
}

int cmd_sweep(const GlobalOpts& g, const std::string& config_path) {
    const ExperimentConfig cfg = prepare_experiment(g, config_path);
    run_experiment(cfg, g.out_dir);
    std::cout << "report written to " << (fs::path(g.out_dir) / "report.json").string() << '\n';
    return kExitOk;
}

int cmd_alpha_study(const GlobalOpts& g, const std::string& config_path, const std::string& alphas_csv) {
    const ExperimentConfig cfg = prepare_experiment(g, config_path);
    std::vector<std::string> labels;
    std::string token;
    std::stringstream ss(alphas_csv);
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) labels.push_back(token);
    }
    const auto cells = alpha_sensitivity(cfg, labels);
    const ordered_json doc = alpha_study_to_json(cfg, cells);
    write_alpha_study(doc, g.out_dir);
    std::cout << "alpha study written to " << (fs::path(g.out_dir) / "alpha_study.json").string() << '\n';
    return kExitOk;
}

int cmd_gen_data(const GlobalOpts& g, const std::string& spec_path, const SyntheticSpec& flag_spec,
                 const std::string& csv_out, const std::string& schema_out) {
    SyntheticSpec spec = spec_path.empty() ? flag_spec : synthetic_from_json(load_json_file(spec_path));
    if (g.seed) spec.seed = *g.seed;
    const Dataset data = gen_synthetic(spec);
    const std::string path = csv_out.empty() ? (fs::path(g.out_dir) / "synthetic.csv").string() : csv_out;
    fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
    save_csv(data, path);
    if (!schema_out.empty()) {
        CsvSchema schema;
        schema.header = true;
        schema.label_column = std::string("label");
        save_json_file(schema_to_json(schema), schema_out);
    }
    std::cout << "wrote " << data.rows << " rows (" << data.positive_count() << " positive) to " << path << '\n';
    return kExitOk;
}

int cmd_validate(const std::string& arch_path, int feature_dim, const std::string& data_path,
                 const std::string& schema_path, const std::string& synth_path) {
    const CascadeArchitecture arch = load_architecture(arch_path);
    int dim = feature_dim;
    if (dim <= 0) {
        if (data_path.empty() && synth_path.empty()) {
            throw ConfigError("give --feature-dim or a dataset to validate against");
        }
        const Dataset data = load_data(data_source_from_flags(data_path, schema_path, synth_path));
        dim = data.cols;
    }
    const auto violations = validate_architecture(arch, dim);
    if (violations.empty()) {
        std::cout << "ok: architecture valid for feature dimension " << dim << '\n';
        return kExitOk;
    }
    for (const auto& v : violations) std::cout << "violation: " << v << '\n';
    return kExitConfig;
}

int cmd_report(const GlobalOpts& g, const std::string& report_path) {
    const ordered_json doc = load_json_file(report_path);
    if (doc.value("kind", std::string{}) != "experiment-report") {
        throw ConfigError("'" + report_path + "' is not an experiment report");
    }
    ExperimentReport report{doc};
    write_report(report, g.out_dir);
    for (const auto& [family, sweep] : doc.at("families").items()) {
        const auto& best = sweep.at("best");
        std::cout << family << ": best lambda " << best.at("lambda").get<double>() << ", accuracy "
                  << best.at("accuracy_mean").get<double>() << ", mean cost " << best.at("cost_mean").get<double>()
                  << '\n';
    }
    std::cout << "tables rewritten under " << g.out_dir << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"firm cascade training and benchmarking toolkit"};
    app.set_version_flag("--version", kToolkitVersion);
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalOpts g;
    app.add_option("--seed", g.seed, "override every configured seed");
    app.add_flag("--deterministic", g.deterministic, "single-threaded scheduling (outputs are identical either way)");
    app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--trace-log", g.trace_log, "write per-instance decision traces (one JSON object per line)");

    std::string arch_path, data_path, schema_path, synth_path, model_path, model_out;
    std::string config_path, alphas_csv, report_path, spec_path, csv_out, schema_out;
    int time_reps = 0, feature_dim = 0;
    double lambda = 0.0, alpha = 32.0, learning_rate = 1e-3;
    int epochs = 200, batch_size = 128;
    std::string family = "firm", init_scheme = "reverse-stagewise";
    SyntheticSpec flag_spec;

    auto* train_cmd = app.add_subcommand("train", "fit one cascade on a full dataset");
    train_cmd->add_option("--arch", arch_path, "architecture JSON")->required();
    train_cmd->add_option("--data", data_path, "dataset CSV");
    train_cmd->add_option("--schema", schema_path, "dataset schema JSON");
    train_cmd->add_option("--synthetic", synth_path, "synthetic generator spec JSON");
    train_cmd->add_option("--lambda", lambda, "cost weight")->capture_default_str();
    train_cmd->add_option("--family", family, "firm|soft")->capture_default_str();
    train_cmd->add_option("--alpha", alpha, "gating sharpness")->capture_default_str();
    train_cmd->add_option("--epochs", epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", batch_size)->capture_default_str();
    train_cmd->add_option("--learning-rate", learning_rate)->capture_default_str();
    train_cmd->add_option("--init", init_scheme, "reverse-stagewise|random-only")->capture_default_str();
    train_cmd->add_option("--model-out", model_out, "model file path (default <out>/model.json)");

    auto* eval_cmd = app.add_subcommand("evaluate", "hard-mode metrics for a trained model");
    eval_cmd->add_option("--model", model_path, "model JSON")->required();
    eval_cmd->add_option("--data", data_path, "dataset CSV");
    eval_cmd->add_option("--schema", schema_path, "dataset schema JSON");
    eval_cmd->add_option("--synthetic", synth_path, "synthetic generator spec JSON");
    eval_cmd->add_option("--time", time_reps, "timing repetitions (0 = no timing)")->capture_default_str();

    auto* sweep_cmd = app.add_subcommand("sweep", "cross-validated lambda grid sweep");
    sweep_cmd->add_option("--config", config_path, "experiment config JSON")->required();

    auto* alpha_cmd = app.add_subcommand("alpha-study", "sweep repeated across gating sharpness values");
    alpha_cmd->add_option("--config", config_path, "experiment config JSON")->required();
    alpha_cmd->add_option("--alphas", alphas_csv, "comma-separated values, e.g. 0.25,8,32,inf")->required();

    auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic benchmark dataset");
    gen_cmd->add_option("--spec", spec_path, "generator spec JSON");
    gen_cmd->add_option("--n", flag_spec.n)->capture_default_str();
    gen_cmd->add_option("--positive-rate", flag_spec.positive_rate)->capture_default_str();
    gen_cmd->add_option("--cheap-dim", flag_spec.cheap_dim)->capture_default_str();
    gen_cmd->add_option("--expensive-dim", flag_spec.expensive_dim)->capture_default_str();
    gen_cmd->add_option("--cheap-reject-rate", flag_spec.cheap_reject_rate)->capture_default_str();
    gen_cmd->add_option("--csv-out", csv_out, "output CSV path (default <out>/synthetic.csv)");
    gen_cmd->add_option("--schema-out", schema_out, "also write a matching schema JSON");

    auto* validate_cmd = app.add_subcommand("validate-config", "check an architecture against a feature space");
    validate_cmd->add_option("--arch", arch_path, "architecture JSON")->required();
    validate_cmd->add_option("--feature-dim", feature_dim, "feature space dimensionality");
    validate_cmd->add_option("--data", data_path, "dataset CSV (alternative to --feature-dim)");
    validate_cmd->add_option("--schema", schema_path, "dataset schema JSON");
    validate_cmd->add_option("--synthetic", synth_path, "synthetic generator spec JSON");

    auto* report_cmd = app.add_subcommand("report", "re-emit CSV tables and a summary from report.json");
    report_cmd->add_option("--report", report_path, "report JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            ordered_json train_doc;
            train_doc["lambda"] = lambda;
            train_doc["family"] = family;
            train_doc["alpha"] = alpha;
            train_doc["epochs"] = epochs;
            train_doc["batch_size"] = batch_size;
            train_doc["learning_rate"] = learning_rate;
            train_doc["init"] = init_scheme;
            return cmd_train(g, arch_path, data_path, schema_path, synth_path, train_doc, model_out);
        }
        if (eval_cmd->parsed()) return cmd_evaluate(g, model_path, data_path, schema_path, synth_path, time_reps);
        if (sweep_cmd->parsed()) return cmd_sweep(g, config_path);
        if (alpha_cmd->parsed()) return cmd_alpha_study(g, config_path, alphas_csv);
        if (gen_cmd->parsed()) return cmd_gen_data(g, spec_path, flag_spec, csv_out, schema_out);
        if (validate_cmd->parsed()) return cmd_validate(arch_path, feature_dim, data_path, schema_path, synth_path);
        if (report_cmd->parsed()) return cmd_report(g, report_path);
    } catch (const TrainError& e) {
        std::cerr << "training failed: " << e.what() << '\n';
        return kExitTraining;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const InputError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
