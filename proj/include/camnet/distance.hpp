#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "camnet/pyramid.hpp"
#include "camnet/tape.hpp"

namespace camnet {

/**
 * Fixed (non-trainable) feature extractor: three stride-2 3x3 conv stages
 * with channels 8 -> 16 -> 32 and leaky-ReLU, weights drawn N(0, 2/fan_in)
 * from a published seed. Stands in for a pretrained perceptual backbone;
 * every consumer goes through PerceptualDistance so a different backend can
 * be swapped in behind the same surface.
 */
class FeatureNet {
public:
    static constexpr int kStages = 3;
    static constexpr int kFinalDim = 32;

    FeatureNet(int in_ch, uint64_t seed = 7);

    /// Activations after each stage.
    std::vector<Node*> stages(Tape& tape, Node* x);

    /// Global-average-pooled final-stage features, one kFinalDim row per image.
    std::vector<std::vector<float>> pooled_features(const Tensor& images);

    int in_ch() const { return in_ch_; }
    uint64_t seed() const { return seed_; }
    const Param& stage_weight(int i) const { return w_[i]; }

private:
    int in_ch_;
    uint64_t seed_;
    Param w_[kStages], b_[kStages];
};

enum class DistanceBackend { proxy, pixel_l2 };

DistanceBackend backend_from_string(const std::string& s);

/**
 * Perceptual distance d(a, b): sum over feature stages of the spatial mean
 * of squared differences between channel-unit-normalized features, plus a
 * pixel L1 term weighted by lambda_pix. Symmetric, non-negative, zero at
 * identity.
 */
class PerceptualDistance {
public:
    explicit PerceptualDistance(DistanceBackend backend = DistanceBackend::proxy,
                                uint64_t feature_seed = 7)
        : backend_(backend), feature_seed_(feature_seed) {}

    static constexpr float kLambdaPix = 0.1f;

    /// Per-sample distances, shape {N}; differentiable w.r.t. both inputs.
    Node* distance_vec(Tape& tape, Node* a, Node* b);

    /// Scalar convenience for single images (batch mean if N > 1).
    double operator()(const Tensor& a, const Tensor& b);

    /// Per-sample distances as plain values (forward only).
    std::vector<double> per_sample(const Tensor& a, const Tensor& b);

    FeatureNet& features(int in_ch);

    DistanceBackend backend() const { return backend_; }

private:
    DistanceBackend backend_;
    uint64_t feature_seed_;
    std::map<int, std::unique_ptr<FeatureNet>> nets_;
};

struct MultiscaleLoss {
    Node* total = nullptr;              // {N}
    std::vector<Node*> per_level;       // {N} each
};

/// Sum of perceptual distances between each module output and the matching
/// pyramid level. `finest_only` drops all but the last term (the
/// intermediate-supervision ablation).
MultiscaleLoss multiscale_distance(Tape& tape, PerceptualDistance& dist,
                                   const std::vector<Node*>& outputs,
                                   const std::vector<Node*>& targets, bool finest_only = false);

/// Scalar form over plain tensors.
double multiscale_distance(PerceptualDistance& dist, const std::vector<Tensor>& outputs,
                           const ImagePyramid& targets);

/// Single-scale ranking distance for candidate selection (caller clamps
/// inputs to [0,1]).
double selection_distance(PerceptualDistance& dist, const Tensor& output_k,
                          const Tensor& target_k);

}  // namespace camnet
