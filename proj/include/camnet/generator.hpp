#pragma once

#include <cstdint>
#include <vector>

#include "camnet/param.hpp"
#include "camnet/pyramid.hpp"
#include "camnet/tape.hpp"

namespace camnet {

/// Architecture hyperparameters for the K-module cascade.
struct CascadeConfig {
    int K = 4;
    int base_res = 4;
    int feat_ch = 32;
    int rrdb_per_module = 2;
    int dense_blocks_per_rrdb = 3;
    int convs_per_dense_block = 5;
    int growth_ch = 16;
    int latent_spatial_ch = 8;
    int latent_global_dim = 64;
    int mapping_layers = 4;
    float beta = 0.2f;
    float leaky_slope = 0.2f;
    bool weight_norm = true;
    bool mapping_enabled = true;
    int out_ch = 3;
    int in_ch = 3;

    int res_at(int k) const { return base_res << k; }
    void validate() const;
};

/// One latent code: a spatial noise map at the owning module's resolution
/// plus a global modulation vector feeding the mapping network.
struct LatentCode {
    Tensor spatial;  // latent_spatial_ch x r x r (stored 1 x C x r x r)
    Tensor global;   // 1 x latent_global_dim
};

struct LatentPyramid {
    std::vector<LatentCode> codes;  // one per module, coarse to fine
};

struct ConvLayer {
    Param w, b;
};

struct DenseBlockWeights {
    std::vector<ConvLayer> convs;
};

struct RrdbWeights {
    std::vector<DenseBlockWeights> blocks;
};

struct ModuleWeights {
    ConvLayer fuse;
    std::vector<RrdbWeights> rrdbs;
    ConvLayer out;
    std::vector<ConvLayer> mapping;  // empty when mapping is disabled
};

/// All trainable parameters of the cascade. Parameter census is a pure
/// function of the config.
struct CascadeWeights {
    CascadeConfig cfg;
    std::vector<ModuleWeights> modules;

    /// Every Param, in construction order.
    std::vector<Param*> params();
    /// Flat optimizer slots ((v, g) per weight-normalized conv).
    std::vector<ParamSlot> slots();
    void zero_grads();
    long long param_count();
};

/// Deterministic He initialization; taper the last conv of every dense block
/// and every module-output conv to 0.1x, and make the mapping network emit
/// (gamma=1, delta=0) at z=0.
CascadeWeights init_weights(const CascadeConfig& cfg, uint64_t seed);

/// Inputs to one cascade module, already on the tape.
struct LatentNodes {
    Node* spatial;
    Node* global;
};

/// y = chain of dense blocks applied residually (b <- b + beta * DB(b)),
/// then the per-channel modulation gamma (.) y + delta. gamma/delta may be
/// null (identity).
Node* rrdb_forward(Tape& tape, const CascadeConfig& cfg, RrdbWeights& w, Node* x, Node* gamma,
                   Node* delta);

/// One resolution stage: fuse [cond, spatial latent, up2(prev)], run the
/// RRDB stack under mapping-network modulation, long skip, output conv.
Node* module_forward(Tape& tape, const CascadeConfig& cfg, ModuleWeights& w, int k, Node* cond,
                     Node* prev, const LatentNodes& code);

/// Run modules 0..up_to-1, chaining outputs. cond_levels[k] must sit at
/// resolution base_res * 2^k; latent codes are batched to match.
std::vector<Node*> cascade_forward(Tape& tape, CascadeWeights& weights,
                                   const std::vector<Node*>& cond_levels,
                                   const std::vector<LatentNodes>& latents, int up_to);

/// Convenience: put pyramid levels and latent codes on the tape (batch of
/// one) and run the full cascade.
std::vector<Tensor> cascade_apply(CascadeWeights& weights, const ImagePyramid& cond,
                                  const LatentPyramid& latents, int up_to);

/// Stack per-sample latent pyramids into batched tape leaves.
std::vector<LatentNodes> batch_latents(Tape& tape, const CascadeConfig& cfg,
                                       const std::vector<const LatentPyramid*>& items, int up_to);

}  // namespace camnet
