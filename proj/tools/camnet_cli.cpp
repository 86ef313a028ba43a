#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "camnet/checkpoint.hpp"
#include "camnet/config.hpp"
#include "camnet/image_io.hpp"
#include "camnet/metrics.hpp"
#include "camnet/pipeline.hpp"

extern "C" void openblas_set_num_threads(int);

namespace camnet {
namespace {

namespace fs = std::filesystem;

void apply_ablation(RunConfig& cfg, const std::string& ablate) {
    if (ablate.empty()) return;
    size_t pos = 0;
    while (pos <= ablate.size()) {
        size_t comma = ablate.find(',', pos);
        std::string flag = ablate.substr(pos, comma == std::string::npos ? std::string::npos
                                                                         : comma - pos);
        if (flag == "no_hs") {
            cfg.train.hs = false;
        } else if (flag == "no_mn") {
            cfg.train.mapping = false;
            cfg.cascade.mapping_enabled = false;
        } else if (flag == "no_is") {
            cfg.train.intermediate_supervision = false;
        } else if (flag == "no_wn") {
            cfg.train.weight_norm = false;
            cfg.cascade.weight_norm = false;
        } else {
            throw ConfigError("unknown ablation flag '" + flag +
                              "' (expected no_hs, no_mn, no_is, no_wn)");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
}

std::string config_label(const RunConfig& cfg) {
    std::string label;
    if (!cfg.train.hs) label += label.empty() ? "no_hs" : "+no_hs";
    if (!cfg.train.mapping) label += label.empty() ? "no_mn" : "+no_mn";
    if (!cfg.train.intermediate_supervision) label += label.empty() ? "no_is" : "+no_is";
    if (!cfg.train.weight_norm) label += label.empty() ? "no_wn" : "+no_wn";
    return label.empty() ? "full" : label;
}

RunConfig load_cfg(const std::string& path, const std::string& ablate) {
    RunConfig cfg = load_run_config(path);
    apply_ablation(cfg, ablate);
    // the conditioning channel count follows the task
    cfg.cascade.in_ch = cfg.task.kind == TaskSpec::Kind::colourization ? 1 : 3;
    if (const char* env = std::getenv("CAMNET_SEED")) {
        try {
            cfg.train.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("CAMNET_SEED must be an unsigned integer, got '" +
                              std::string(env) + "'");
        }
    }
    return cfg;
}

void echo_config(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream f(dir + "/config.json");
    if (!f.good()) throw IoError("cannot write resolved config to " + dir);
    f << run_config_to_json(cfg).dump(2) << "\n";
}

int cmd_gen_data(const RunConfig& cfg) {
    auto items = gen_shapes(cfg.shapes);
    save_dataset(cfg.paths.data_dir, cfg.shapes, items);
    echo_config(cfg, cfg.paths.data_dir);
    std::cout << "wrote " << items.size() << " items to " << cfg.paths.data_dir << "\n";
    return 0;
}

void write_round_grid(CascadeWeights& weights, const PreparedData& data, const RunConfig& cfg,
                      const std::string& path) {
    int n = std::min<int>(8, static_cast<int>(data.items.size()));
    std::vector<Tensor> inputs, targets;
    std::vector<std::vector<Tensor>> rows;
    for (int i = 0; i < n; ++i) {
        inputs.push_back(data.inputs[i]);
        targets.push_back(data.targets[i]);
        rows.push_back(test_sample(weights, data.items[i].cond, 4, cfg.train.seed, i));
    }
    write_png(path, sample_grid(inputs, rows, targets));
}

int cmd_train(const RunConfig& cfg, int epochs_override) {
    RunConfig run = cfg;
    if (epochs_override >= 0) run.train.epochs = epochs_override;
    Dataset ds = load_dataset(run.paths.data_dir);
    PreparedData data = prepare_items(ds.items, run.task, run.cascade.K, run.cascade.base_res);
    echo_config(run, run.paths.out_dir);

    CascadeWeights weights = init_weights(run.cascade, run.train.seed);
    PerceptualDistance dist;
    std::ofstream log(run.paths.out_dir + "/train.jsonl");
    if (!log.good()) throw IoError("cannot write training log in " + run.paths.out_dir);

    TrainHooks hooks;
    hooks.on_step = [&](const StepLog& s) {
        nlohmann::json j{{"step", s.step},
                         {"epoch", s.epoch},
                         {"loss", s.loss},
                         {"per_scale_losses", s.per_scale},
                         {"lr", s.lr}};
        log << j.dump() << "\n";
        log.flush();
    };
    hooks.on_select = [&](const SelectLog& s) {
        nlohmann::json j{{"epoch", s.epoch},
                         {"mean_stage_distance", s.mean_stage_distance},
                         {"wall_seconds", s.wall_seconds}};
        log << j.dump() << "\n";
        log.flush();
    };
    hooks.on_round = [&](int epoch) {
        save_checkpoint(run.paths.out_dir + "/ckpt_last.camn", weights, run.train.seed, epoch);
        char name[64];
        std::snprintf(name, sizeof name, "/round_%04d.png", epoch);
        write_round_grid(weights, data, run, run.paths.out_dir + name);
    };
    train(weights, data.items, run.train, dist, hooks);
    save_checkpoint(run.paths.out_dir + "/ckpt_final.camn", weights, run.train.seed,
                    run.train.epochs);
    std::cout << "trained " << run.train.epochs << " epochs (" << config_label(run) << ") -> "
              << run.paths.out_dir << "/ckpt_final.camn\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& ckpt_path, int index, int count) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Dataset ds = load_dataset(cfg.paths.data_dir);
    require(index >= 0 && index < static_cast<int>(ds.items.size()),
            "sample: index out of range for the dataset");
    PreparedData data = prepare_items({ds.items[index]}, cfg.task, ckpt.weights.cfg.K,
                                      ckpt.weights.cfg.base_res);
    auto samples = test_sample(ckpt.weights, data.items[0].cond, count, cfg.train.seed, index);
    fs::create_directories(cfg.paths.out_dir);
    echo_config(cfg, cfg.paths.out_dir);
    char name[64];
    for (int i = 0; i < count; ++i) {
        std::snprintf(name, sizeof name, "/sample_%03d.png", i);
        write_png(cfg.paths.out_dir + name, samples[i]);
    }
    write_png(cfg.paths.out_dir + "/grid.png",
              sample_grid({data.inputs[0]}, {samples}, {data.targets[0]}));
    std::cout << "wrote " << count << " samples to " << cfg.paths.out_dir << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt_path, int n_inputs) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    auto held = held_out_shapes(cfg.shapes, n_inputs);
    PreparedData data = prepare_items(held, cfg.task, ckpt.weights.cfg.K,
                                      ckpt.weights.cfg.base_res);
    PerceptualDistance dist;
    fs::create_directories(cfg.paths.out_dir);
    echo_config(cfg, cfg.paths.out_dir);

    std::map<double, double> fwv_mean;
    std::vector<Tensor> all_samples;
    double coverage_mean = 0.0;
    auto palette = iso_luminant_palette();
    for (int i = 0; i < n_inputs; ++i) {
        auto samples = test_sample(ckpt.weights, data.items[i].cond,
                                   cfg.metrics.samples_per_input, cfg.train.seed,
                                   cfg.shapes.count + i);
        auto fwv = faithfulness_weighted_variance(samples, data.targets[i], cfg.metrics, dist);
        for (auto& [sigma, v] : fwv) fwv_mean[sigma] += v / n_inputs;
        if (cfg.task.kind == TaskSpec::Kind::colourization)
            coverage_mean += mode_coverage(samples, palette, data.masks[i]) / n_inputs;
        for (Tensor& s : samples) all_samples.push_back(std::move(s));
    }
    FeatureNet& net = dist.features(ckpt.weights.cfg.out_ch);
    FeatureStats gen = feature_stats(all_samples, net);
    FeatureStats real = feature_stats(data.targets, net);
    double fid = frechet_distance(gen, real);

    std::string task = task_kind_name(cfg.task.kind);
    write_fid_csv(cfg.paths.out_dir + "/fid.csv", {{task, config_label(cfg), fid}});
    std::vector<FwvRow> rows;
    for (double sigma : cfg.metrics.sigma_list) rows.push_back({task, sigma, fwv_mean[sigma]});
    write_fwv_csv(cfg.paths.out_dir + "/fwv.csv", rows);
    std::cout << "fid=" << fid;
    if (cfg.task.kind == TaskSpec::Kind::colourization)
        std::cout << " mode_coverage=" << coverage_mean;
    std::cout << " over " << n_inputs << " held-out inputs -> " << cfg.paths.out_dir << "\n";
    return 0;
}

int cmd_bench_hs(const RunConfig& cfg, const std::string& ckpt_path, int n_inputs, int trials) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    auto held = held_out_shapes(cfg.shapes, n_inputs);
    PreparedData data = prepare_items(held, cfg.task, ckpt.weights.cfg.K,
                                      ckpt.weights.cfg.base_res);
    PerceptualDistance dist;
    HsBenchResult r = hs_efficiency_benchmark(ckpt.weights, data.items, cfg.train.m_per_stage,
                                              dist, trials, cfg.train.seed);
    fs::create_directories(cfg.paths.out_dir);
    echo_config(cfg, cfg.paths.out_dir);
    write_hs_bench_csv(cfg.paths.out_dir + "/hs_bench.csv", cfg.train.m_per_stage, r);
    std::ofstream curve(cfg.paths.out_dir + "/hs_curve.csv", std::ios::binary);
    curve << "budget_multiplier,mean_vanilla_distance,mean_hs_distance\n";
    for (size_t i = 0; i < r.budget_multipliers.size(); ++i) {
        char line[128];
        std::snprintf(line, sizeof line, "%.6g,%.6g,%.6g\n", r.budget_multipliers[i],
                      r.mean_vanilla_distance[i], r.mean_hs_distance);
        curve << line;
    }
    std::cout << "mean ratio " << r.mean_ratio << " +/- " << r.stderr_ratio << " (censored "
              << r.censored << "/" << r.total_runs << ") -> " << cfg.paths.out_dir
              << "/hs_bench.csv\n";
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Cascaded multimodal conditional image synthesis via conditional IMLE"};
    app.require_subcommand(1);
    std::string config_path, ablate, ckpt_path;
    int epochs_override = -1, threads = 1, index = 0, count = 8, n_inputs = 20, trials = 10;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--threads", threads, "Worker thread cap");
    };
    CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic shapes dataset");
    add_common(gen);
    CLI::App* tr = app.add_subcommand("train", "Train a model");
    add_common(tr);
    tr->add_option("--epochs", epochs_override, "Override the configured epoch count");
    tr->add_option("--ablate", ablate, "Cumulative ablation flags: no_hs,no_mn,no_is,no_wn");
    CLI::App* sa = app.add_subcommand("sample", "Draw samples for one dataset item");
    add_common(sa);
    sa->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required();
    sa->add_option("--index", index, "Dataset item index");
    sa->add_option("--count", count, "Number of samples");
    CLI::App* ev = app.add_subcommand("eval", "FID and FWV over held-out inputs");
    add_common(ev);
    ev->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required();
    ev->add_option("--inputs", n_inputs, "Held-out input count");
    ev->add_option("--ablate", ablate, "Label metrics with these ablation flags");
    CLI::App* bh = app.add_subcommand("bench-hs", "Stage-wise vs vanilla sampling efficiency");
    add_common(bh);
    bh->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required();
    bh->add_option("--inputs", n_inputs, "Held-out input count");
    bh->add_option("--trials", trials, "Independent trials per input");

    CLI11_PARSE(app, argc, argv);
    openblas_set_num_threads(std::max(1, threads));
    RunConfig cfg = load_cfg(config_path, ablate);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (tr->parsed()) return cmd_train(cfg, epochs_override);
    if (sa->parsed()) return cmd_sample(cfg, ckpt_path, index, count);
    if (ev->parsed()) return cmd_eval(cfg, ckpt_path, n_inputs);
    if (bh->parsed()) return cmd_bench_hs(cfg, ckpt_path, n_inputs, trials);
    return 2;
}

}  // namespace
}  // namespace camnet

int main(int argc, char** argv) {
    try {
        return camnet::dispatch(argc, argv);
    } catch (const camnet::TrainError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
