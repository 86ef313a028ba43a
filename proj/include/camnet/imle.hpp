#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "camnet/adam.hpp"
#include "camnet/distance.hpp"
#include "camnet/generator.hpp"
#include "camnet/pyramid.hpp"

namespace camnet {

/// Training hyperparameters and ablation switches. The mapping / weight_norm
/// flags are applied when the CascadeConfig is built; hs and
/// intermediate_supervision act inside this module.
struct TrainConfig {
    std::vector<int> m_per_stage{4, 4, 4, 4};
    int reselect_every = 1;
    int epochs = 10;
    int batch_size = 8;
    float lr = 1e-3f;
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;
    uint64_t seed = 0;
    bool hs = true;
    bool mapping = true;
    bool intermediate_supervision = true;
    bool weight_norm = true;

    int m_total() const {
        int m = 0;
        for (int v : m_per_stage) m += v;
        return m;
    }
    void validate(int K) const;
};

/// Outcome of latent selection for one training input.
struct SelectionRecord {
    LatentPyramid latent;
    std::vector<int> chosen_index;      // per stage, in [0, m_per_stage[k])
    std::vector<double> stage_distance; // selection distance at each stage
    int epoch = -1;
};

/// One (input, target) pair, pre-expanded into the pyramids the cascade
/// consumes.
struct TrainItem {
    ImagePyramid cond;
    ImagePyramid target;
};

// RNG stream purposes, mixed into every latent key so draws for different
// uses never collide.
enum class LatentUse : uint64_t { select = 1, test = 2 };

/// Key for the latent draw (stage, candidate) of a given input at a given
/// epoch; order-independent under parallel evaluation.
uint64_t latent_key(uint64_t seed, LatentUse use, int64_t epoch, int64_t input_index, int stage,
                    int candidate);

/// Standard-Gaussian latent code for one stage.
LatentCode sample_code(const CascadeConfig& cfg, int stage, uint64_t key);

/// Full pyramid with per-stage derived keys.
LatentPyramid sample_latents(const CascadeConfig& cfg, uint64_t seed, LatentUse use, int64_t epoch,
                             int64_t input_index, int candidate);

/// Stage-wise greedy search: fix the codes selected so far, draw
/// m_per_stage[k] fresh candidates for stage k, keep the one whose stage-k
/// output lands closest to the target level (ties to the lowest index).
SelectionRecord hierarchical_select(CascadeWeights& weights, const ImagePyramid& cond,
                                    const ImagePyramid& target, const TrainConfig& cfg,
                                    PerceptualDistance& dist, int64_t input_index, int epoch);

/// Independent full-pyramid candidates ranked by finest-scale distance.
SelectionRecord vanilla_select(CascadeWeights& weights, const ImagePyramid& cond,
                               const ImagePyramid& target, const TrainConfig& cfg,
                               PerceptualDistance& dist, int m_total, int64_t input_index,
                               int epoch);

struct ObjectiveResult {
    Node* loss = nullptr;               // {1}, batch mean
    std::vector<double> per_scale;      // batch-mean distance at each scale
};

/// Batch mean of the multiscale reconstruction distance of the selected
/// samples (finest scale only when intermediate supervision is ablated).
ObjectiveResult cimle_objective(Tape& tape, CascadeWeights& weights, PerceptualDistance& dist,
                                const std::vector<const TrainItem*>& batch,
                                const std::vector<const SelectionRecord*>& selections,
                                const TrainConfig& cfg, int epoch);

struct StepLog {
    int step;
    int epoch;
    double loss;
    std::vector<double> per_scale;
    float lr;
};

struct SelectLog {
    int epoch;
    std::vector<double> mean_stage_distance;
    double wall_seconds;
};

struct TrainHooks {
    std::function<void(const StepLog&)> on_step;
    std::function<void(const SelectLog&)> on_select;
    /// After each re-selection round (checkpoint / sample-grid emission).
    std::function<void(int epoch)> on_round;
};

/// Alternating optimization: re-select latents every reselect_every epochs,
/// run mini-batch Adam on the cIMLE objective in between. Deterministic
/// given (config, seed). Throws TrainError on a non-finite loss.
void train(CascadeWeights& weights, const std::vector<TrainItem>& dataset, const TrainConfig& cfg,
           PerceptualDistance& dist, const TrainHooks& hooks = {});

/// Test-time draws: independent latent pyramids, no selection.
std::vector<Tensor> test_sample(CascadeWeights& weights, const ImagePyramid& cond, int count,
                                uint64_t seed, int64_t input_index = 0);

}  // namespace camnet
