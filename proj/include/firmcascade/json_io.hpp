#ifndef FIRMCASCADE_JSON_IO_HPP
#define FIRMCASCADE_JSON_IO_HPP

#include <nlohmann/json.hpp>
#include <string>

#include "firmcascade/architecture.hpp"
#include "firmcascade/dataset.hpp"
#include "firmcascade/training.hpp"

// All on-disk formats are JSON (UTF-8) with a schema_version field; every
// to/from pair round-trips exactly, doubles included.

namespace firmcascade {

using ordered_json = nlohmann::ordered_json;

ordered_json load_json_file(const std::string& path);
void save_json_file(const ordered_json& doc, const std::string& path);

ordered_json gating_to_json(const GatingConfig& cfg);
GatingConfig gating_from_json(const ordered_json& j);

ordered_json stage_to_json(const StageSpec& spec);
StageSpec stage_from_json(const ordered_json& j);

// {"schema_version":1, "gating_alpha": number|"inf", "mode":"linear"|"tree",
//  "branches": [[stage...]...], "root": [stage...]}
// Stage costs omitted in the file are materialized from MAC counts at
// parse time, so a parsed architecture is always fully specified.
ordered_json architecture_to_json(const CascadeArchitecture& arch);
CascadeArchitecture architecture_from_json(const ordered_json& j);
CascadeArchitecture load_architecture(const std::string& path);

ordered_json schema_to_json(const CsvSchema& schema);
CsvSchema schema_from_json(const ordered_json& j);

ordered_json synthetic_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_from_json(const ordered_json& j);

ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const ordered_json& j, const TrainConfig& defaults);

ordered_json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const ordered_json& j);
TrainedModel load_model(const std::string& path);
void save_model(const TrainedModel& model, const std::string& path);

}  // namespace firmcascade

#endif
