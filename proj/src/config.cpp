#include "camnet/config.hpp"

#include <fstream>
#include <set>

namespace camnet {

namespace {

using nlohmann::json;

/// Reject any key the section does not define.
void check_keys(const json& j, const std::string& section, const std::set<std::string>& known) {
    if (!j.is_object())
        throw ConfigError("config: section '" + section + "' must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw ConfigError("config: unknown key '" + key + "' in section '" + section + "'");
}

template <typename T>
void get(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
    }
}

}  // namespace

json cascade_to_json(const CascadeConfig& c) {
    return json{{"K", c.K},
                {"base_res", c.base_res},
                {"feat_ch", c.feat_ch},
                {"rrdb_per_module", c.rrdb_per_module},
                {"dense_blocks_per_rrdb", c.dense_blocks_per_rrdb},
                {"convs_per_dense_block", c.convs_per_dense_block},
                {"growth_ch", c.growth_ch},
                {"latent_spatial_ch", c.latent_spatial_ch},
                {"latent_global_dim", c.latent_global_dim},
                {"mapping_layers", c.mapping_layers},
                {"beta", c.beta},
                {"leaky_slope", c.leaky_slope},
                {"weight_norm", c.weight_norm},
                {"mapping_enabled", c.mapping_enabled},
                {"out_ch", c.out_ch},
                {"in_ch", c.in_ch}};
}

CascadeConfig cascade_from_json(const json& j) {
    check_keys(j, "cascade",
               {"K", "base_res", "feat_ch", "rrdb_per_module", "dense_blocks_per_rrdb",
                "convs_per_dense_block", "growth_ch", "latent_spatial_ch", "latent_global_dim",
                "mapping_layers", "beta", "leaky_slope", "weight_norm", "mapping_enabled",
                "out_ch", "in_ch"});
    CascadeConfig c;
    get(j, "K", c.K);
    get(j, "base_res", c.base_res);
    get(j, "feat_ch", c.feat_ch);
    get(j, "rrdb_per_module", c.rrdb_per_module);
    get(j, "dense_blocks_per_rrdb", c.dense_blocks_per_rrdb);
    get(j, "convs_per_dense_block", c.convs_per_dense_block);
    get(j, "growth_ch", c.growth_ch);
    get(j, "latent_spatial_ch", c.latent_spatial_ch);
    get(j, "latent_global_dim", c.latent_global_dim);
    get(j, "mapping_layers", c.mapping_layers);
    get(j, "beta", c.beta);
    get(j, "leaky_slope", c.leaky_slope);
    get(j, "weight_norm", c.weight_norm);
    get(j, "mapping_enabled", c.mapping_enabled);
    get(j, "out_ch", c.out_ch);
    get(j, "in_ch", c.in_ch);
    return c;
}

namespace {

TrainConfig train_from_json(const json& j) {
    check_keys(j, "train",
               {"m_per_stage", "reselect_every", "epochs", "batch_size", "lr", "adam_beta1",
                "adam_beta2", "adam_eps", "seed", "hs", "mapping", "intermediate_supervision",
                "weight_norm"});
    TrainConfig t;
    get(j, "m_per_stage", t.m_per_stage);
    get(j, "reselect_every", t.reselect_every);
    get(j, "epochs", t.epochs);
    get(j, "batch_size", t.batch_size);
    get(j, "lr", t.lr);
    get(j, "adam_beta1", t.adam_beta1);
    get(j, "adam_beta2", t.adam_beta2);
    get(j, "adam_eps", t.adam_eps);
    get(j, "seed", t.seed);
    get(j, "hs", t.hs);
    get(j, "mapping", t.mapping);
    get(j, "intermediate_supervision", t.intermediate_supervision);
    get(j, "weight_norm", t.weight_norm);
    return t;
}

json train_to_json(const TrainConfig& t) {
    return json{{"m_per_stage", t.m_per_stage},
                {"reselect_every", t.reselect_every},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps},
                {"seed", t.seed},
                {"hs", t.hs},
                {"mapping", t.mapping},
                {"intermediate_supervision", t.intermediate_supervision},
                {"weight_norm", t.weight_norm}};
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    check_keys(j, "(root)", {"cascade", "train", "task", "metrics", "paths"});
    RunConfig cfg;
    if (j.contains("cascade")) cfg.cascade = cascade_from_json(j.at("cascade"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    if (j.contains("task")) {
        const json& t = j.at("task");
        check_keys(t, "task", {"kind", "factor", "quality", "shapes"});
        std::string kind = task_kind_name(cfg.task.kind);
        get(t, "kind", kind);
        try {
            cfg.task.kind = task_kind_from_name(kind);
        } catch (const ShapeError& e) {
            throw ConfigError(e.what());
        }
        get(t, "factor", cfg.task.factor);
        get(t, "quality", cfg.task.quality);
        if (t.contains("shapes")) {
            const json& s = t.at("shapes");
            check_keys(s, "task.shapes", {"image_size", "count", "seed"});
            get(s, "image_size", cfg.shapes.image_size);
            get(s, "count", cfg.shapes.count);
            get(s, "seed", cfg.shapes.seed);
        }
    }
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        check_keys(m, "metrics", {"sigma_list", "samples_per_input"});
        get(m, "sigma_list", cfg.metrics.sigma_list);
        get(m, "samples_per_input", cfg.metrics.samples_per_input);
    }
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        check_keys(p, "paths", {"data_dir", "out_dir", "checkpoint"});
        get(p, "data_dir", cfg.paths.data_dir);
        get(p, "out_dir", cfg.paths.out_dir);
        get(p, "checkpoint", cfg.paths.checkpoint);
    }
    try {
        cfg.cascade.validate();
        cfg.task.validate();
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    return json{{"cascade", cascade_to_json(cfg.cascade)},
                {"train", train_to_json(cfg.train)},
                {"task",
                 {{"kind", task_kind_name(cfg.task.kind)},
                  {"factor", cfg.task.factor},
                  {"quality", cfg.task.quality},
                  {"shapes",
                   {{"image_size", cfg.shapes.image_size},
                    {"count", cfg.shapes.count},
                    {"seed", cfg.shapes.seed}}}}},
                {"metrics",
                 {{"sigma_list", cfg.metrics.sigma_list},
                  {"samples_per_input", cfg.metrics.samples_per_input}}},
                {"paths",
                 {{"data_dir", cfg.paths.data_dir},
                  {"out_dir", cfg.paths.out_dir},
                  {"checkpoint", cfg.paths.checkpoint}}}};
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace camnet
