#include "firmcascade/json_io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "firmcascade/errors.hpp"
#include "firmcascade/version.hpp"

namespace firmcascade {

ordered_json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void save_json_file(const ordered_json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
}

namespace {

[[noreturn]] void fail(const std::string& context, const nlohmann::json::exception& e) {
    throw ConfigError(context + ": " + e.what());
}

}  // namespace

ordered_json gating_to_json(const GatingConfig& cfg) {
    if (cfg.is_hard()) return ordered_json("inf");
    return ordered_json(cfg.alpha());
}

GatingConfig gating_from_json(const ordered_json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "infinity") return GatingConfig::hard();
        throw ConfigError("gating sharpness must be a positive number or \"inf\", got '" + s + "'");
    }
    if (!j.is_number()) throw ConfigError("gating sharpness must be a positive number or \"inf\"");
    return GatingConfig::finite(j.get<double>());
}

ordered_json stage_to_json(const StageSpec& spec) {
    ordered_json j;
    j["kind"] = to_string(spec.kind);
    if (spec.kind == StageKind::Feedforward) j["hidden_sizes"] = spec.hidden_sizes;
    if (spec.kind != StageKind::Combiner) j["features"] = spec.feature_mask;
    j["cost"] = spec.cost;
    return j;
}

StageSpec stage_from_json(const ordered_json& j) {
    try {
        StageSpec spec;
        spec.kind = stage_kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("hidden_sizes")) spec.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
        if (j.contains("features")) spec.feature_mask = j.at("features").get<std::vector<int>>();
        spec.cost = j.value("cost", -1.0);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        fail("stage", e);
    }
}

ordered_json architecture_to_json(const CascadeArchitecture& arch) {
    ordered_json j;
    j["schema_version"] = 1;
    j["gating_alpha"] = gating_to_json(arch.gating);
    j["mode"] = to_string(arch.mode);
    j["branches"] = ordered_json::array();
    for (const auto& branch : arch.branches) {
        ordered_json b = ordered_json::array();
        for (const auto& s : branch) b.push_back(stage_to_json(s));
        j["branches"].push_back(std::move(b));
    }
    j["root"] = ordered_json::array();
    for (const auto& s : arch.root) j["root"].push_back(stage_to_json(s));
    return j;
}

CascadeArchitecture architecture_from_json(const ordered_json& j) {
    try {
        CascadeArchitecture arch;
        arch.gating = gating_from_json(j.at("gating_alpha"));
        arch.mode = cascade_mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("branches")) {
            for (const auto& b : j.at("branches")) {
                std::vector<StageSpec> branch;
                for (const auto& s : b) branch.push_back(stage_from_json(s));
                arch.branches.push_back(std::move(branch));
            }
        }
        for (const auto& s : j.at("root")) arch.root.push_back(stage_from_json(s));
        arch.apply_default_costs();
        return arch;
    } catch (const nlohmann::json::exception& e) {
        fail("architecture", e);
    }
}

CascadeArchitecture load_architecture(const std::string& path) {
    return architecture_from_json(load_json_file(path));
}

namespace {

ColumnRef column_from_json(const ordered_json& j) {
    if (j.is_number_integer()) return ColumnRef(j.get<int>());
    if (j.is_string()) return ColumnRef(j.get<std::string>());
    throw ConfigError("column reference must be an index or a name");
}

ordered_json column_to_json(const ColumnRef& ref) {
    if (std::holds_alternative<int>(ref)) return ordered_json(std::get<int>(ref));
    return ordered_json(std::get<std::string>(ref));
}

}  // namespace

ordered_json schema_to_json(const CsvSchema& schema) {
    ordered_json j;
    j["label_column"] = column_to_json(schema.label_column);
    j["feature_columns"] = ordered_json::array();
    for (const auto& c : schema.feature_columns) j["feature_columns"].push_back(column_to_json(c));
    j["header"] = schema.header;
    j["label_kind"] = schema.binary_labels ? "binary" : "categorical";
    if (!schema.binary_labels) j["positive_labels"] = schema.positive_labels;
    return j;
}

CsvSchema schema_from_json(const ordered_json& j) {
    try {
        CsvSchema schema;
        schema.label_column = column_from_json(j.at("label_column"));
        if (j.contains("feature_columns")) {
            for (const auto& c : j.at("feature_columns")) schema.feature_columns.push_back(column_from_json(c));
        }
        schema.header = j.value("header", false);
        const std::string kind = j.value("label_kind", std::string("binary"));
        if (kind == "binary") {
            schema.binary_labels = true;
        } else if (kind == "categorical") {
            schema.binary_labels = false;
            schema.positive_labels = j.at("positive_labels").get<std::vector<std::string>>();
        } else {
            throw ConfigError("label_kind must be 'binary' or 'categorical', got '" + kind + "'");
        }
        return schema;
    } catch (const nlohmann::json::exception& e) {
        fail("dataset schema", e);
    }
}

ordered_json synthetic_to_json(const SyntheticSpec& spec) {
    ordered_json j;
    j["n"] = spec.n;
    j["positive_rate"] = spec.positive_rate;
    j["cheap_dim"] = spec.cheap_dim;
    j["expensive_dim"] = spec.expensive_dim;
    j["cheap_reject_rate"] = spec.cheap_reject_rate;
    j["seed"] = spec.seed;
    return j;
}

SyntheticSpec synthetic_from_json(const ordered_json& j) {
    try {
        SyntheticSpec spec;
        spec.n = j.value("n", spec.n);
        spec.positive_rate = j.value("positive_rate", spec.positive_rate);
        spec.cheap_dim = j.value("cheap_dim", spec.cheap_dim);
        spec.expensive_dim = j.value("expensive_dim", spec.expensive_dim);
        spec.cheap_reject_rate = j.value("cheap_reject_rate", spec.cheap_reject_rate);
        spec.seed = j.value("seed", spec.seed);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        fail("synthetic spec", e);
    }
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
    ordered_json j;
    j["learning_rate"] = cfg.learning_rate;
    j["rmsprop_decay"] = cfg.rmsprop_decay;
    j["rmsprop_epsilon"] = cfg.rmsprop_epsilon;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["init"] = to_string(cfg.init);
    j["family"] = to_string(cfg.objective.family);
    j["lambda"] = cfg.objective.lambda;
    j["alpha"] = gating_to_json(cfg.objective.gating);
    return j;
}

TrainConfig train_config_from_json(const ordered_json& j, const TrainConfig& defaults) {
    try {
        TrainConfig cfg = defaults;
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.rmsprop_decay = j.value("rmsprop_decay", cfg.rmsprop_decay);
        cfg.rmsprop_epsilon = j.value("rmsprop_epsilon", cfg.rmsprop_epsilon);
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("init")) cfg.init = init_scheme_from_string(j.at("init").get<std::string>());
        if (j.contains("family")) cfg.objective.family = objective_family_from_string(j.at("family").get<std::string>());
        cfg.objective.lambda = j.value("lambda", cfg.objective.lambda);
        if (j.contains("alpha")) cfg.objective.gating = gating_from_json(j.at("alpha"));
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        fail("train config", e);
    }
}

ordered_json model_to_json(const TrainedModel& model) {
    ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "cascade-model";
    j["toolkit_version"] = kToolkitVersion;
    j["architecture"] = architecture_to_json(model.arch);
    j["train"] = train_config_to_json(model.config);
    StageIndex index(model.arch);
    ordered_json stages = ordered_json::array();
    for (int g = 0; g < index.count(); ++g) {
        const StageCoord c = index.coord(g);
        ordered_json stage;
        stage["device"] = c.device;
        stage["stage"] = c.stage;
        ordered_json layers = ordered_json::array();
        for (const auto& l : model.params[static_cast<std::size_t>(g)].layers) {
            ordered_json layer;
            layer["fan_in"] = l.fan_in;
            layer["fan_out"] = l.fan_out;
            layer["weights"] = l.weights;
            layer["biases"] = l.biases;
            layers.push_back(std::move(layer));
        }
        stage["layers"] = std::move(layers);
        stages.push_back(std::move(stage));
    }
    j["stages"] = std::move(stages);
    j["history"] = model.history;
    return j;
}

TrainedModel model_from_json(const ordered_json& j) {
    try {
        TrainedModel model;
        model.arch = architecture_from_json(j.at("architecture"));
        model.config = train_config_from_json(j.at("train"), TrainConfig{});
        model.history = j.value("history", std::vector<double>{});
        StageIndex index(model.arch);
        model.params.resize(static_cast<std::size_t>(index.count()));
        for (const auto& stage : j.at("stages")) {
            const StageCoord c{stage.at("device").get<int>(), stage.at("stage").get<int>()};
            const int g = index.global_of(c);
            if (g < 0) throw ConfigError("model file stores parameters for a non-trainable stage");
            StageParams params;
            for (const auto& layer : stage.at("layers")) {
                LayerParams l;
                l.fan_in = layer.at("fan_in").get<int>();
                l.fan_out = layer.at("fan_out").get<int>();
                l.weights = layer.at("weights").get<std::vector<double>>();
                l.biases = layer.at("biases").get<std::vector<double>>();
                params.layers.push_back(std::move(l));
            }
            model.params[static_cast<std::size_t>(g)] = std::move(params);
        }
        for (int g = 0; g < index.count(); ++g) {
            check_stage_shapes(model.arch.spec_at(index.coord(g)), model.params[static_cast<std::size_t>(g)]);
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        fail("model file", e);
    }
}

TrainedModel load_model(const std::string& path) { return model_from_json(load_json_file(path)); }

void save_model(const TrainedModel& model, const std::string& path) { save_json_file(model_to_json(model), path); }

}  // namespace firmcascade
