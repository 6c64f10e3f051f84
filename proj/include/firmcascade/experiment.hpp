#ifndef FIRMCASCADE_EXPERIMENT_HPP
#define FIRMCASCADE_EXPERIMENT_HPP

#include <optional>
#include <string>
#include <vector>

#include "firmcascade/json_io.hpp"
#include "firmcascade/stats.hpp"
#include "firmcascade/training.hpp"

namespace firmcascade {

// Where the experiment's data comes from: an on-disk CSV plus its schema,
// or an inline synthetic generator spec.
struct DataSource {
    std::string csv_path;
    CsvSchema schema;
    std::optional<SyntheticSpec> synthetic;
};

Dataset load_data(const DataSource& source);

struct ExperimentConfig {
    CascadeArchitecture arch;
    DataSource data;
    std::vector<ObjectiveFamily> families;  // one, or firm+soft for a comparison
    std::vector<double> lambda_grid = default_lambda_grid();
    TrainConfig train;                      // seed/lambda/family overridden per run
    int folds = 8;
    std::uint64_t seed = 1;
    int timing_repetitions = 0;
    int threads = 1;
    bool alpha_substituted = false;         // hard gating trained at alpha = 2^10
    ordered_json echo;                      // the original config document
};

// Parses an experiment config document. Relative paths are resolved
// against base_dir. A "family" of "both" requests the firm/soft
// comparison; "alpha" of "inf" trains with the 2^10 surrogate and flags
// the substitution in the report.
ExperimentConfig experiment_from_json(const ordered_json& doc, const std::string& base_dir);
ExperimentConfig load_experiment(const std::string& path);

struct ExperimentReport {
    ordered_json document;
};

// Full protocol: per family, per lambda, per fold training plus hard-mode
// evaluation; means with standard errors; the maximum-accuracy operating
// point (ties broken toward lower cost); firm-vs-soft paired t-tests when
// both families run. On failure the partial document is written to
// out_dir (when given) before the error propagates.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "");

// Removes wall-clock fields, leaving only the deterministic content.
ordered_json strip_timing(const ordered_json& doc);

// report.json plus flat CSV tables (sweep.csv, folds.csv) for plotting.
void write_report(const ExperimentReport& report, const std::string& out_dir);

struct AlphaCell {
    std::string label;          // "0.25" ... "inf"
    bool hard_eval = false;     // the infinity cell
    bool substituted = false;   // trained at 2^10 in place of infinity
    double best_lambda = 0.0;
    double best_accuracy = 0.0;
    double best_accuracy_se = 0.0;
    double best_cost = 0.0;
    double best_cost_se = 0.0;
};

// Re-runs the sweep at each sharpness value (labels like "8", "1024" or
// "inf") and reports the best operating point per value.
std::vector<AlphaCell> alpha_sensitivity(const ExperimentConfig& cfg, const std::vector<std::string>& alpha_labels);

ordered_json alpha_study_to_json(const ExperimentConfig& cfg, const std::vector<AlphaCell>& cells);
void write_alpha_study(const ordered_json& doc, const std::string& out_dir);

}  // namespace firmcascade

#endif
