#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "camnet/generator.hpp"
#include "camnet/imle.hpp"
#include "camnet/metrics.hpp"
#include "camnet/tasks.hpp"

namespace camnet {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PathsConfig {
    std::string data_dir = "data";
    std::string out_dir = "out";
    std::string checkpoint = "";
};

/// Whole-run configuration. Every field has a default; unknown keys anywhere
/// in the document are rejected.
struct RunConfig {
    CascadeConfig cascade;
    TrainConfig train;
    TaskSpec task;
    ShapesSpec shapes;
    FwvConfig metrics;
    PathsConfig paths;
};

// Section-level JSON (de)serialization, shared with the checkpoint header.
nlohmann::json cascade_to_json(const CascadeConfig& cfg);
CascadeConfig cascade_from_json(const nlohmann::json& j);

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);  // fully resolved

RunConfig load_run_config(const std::string& path);

}  // namespace camnet
