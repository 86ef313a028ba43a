#include "camnet/generator.hpp"

#include <cmath>

#include "camnet/rng.hpp"

namespace camnet {

void CascadeConfig::validate() const {
    require(K >= 1, "CascadeConfig: K must be >= 1");
    require(base_res >= 1 && feat_ch >= 1 && rrdb_per_module >= 1 && dense_blocks_per_rrdb >= 1 &&
                convs_per_dense_block >= 1 && growth_ch >= 1 && latent_spatial_ch >= 1 &&
                latent_global_dim >= 1 && mapping_layers >= 1 && out_ch >= 1 && in_ch >= 1,
            "CascadeConfig: all counts must be >= 1");
    require(beta > 0.0f && beta <= 1.0f, "CascadeConfig: beta must be in (0,1]");
    require(leaky_slope >= 0.0f && leaky_slope < 1.0f, "CascadeConfig: leaky_slope in [0,1)");
}

namespace {

ConvLayer make_conv(const std::string& name, int out_ch, int in_ch, int k, Rng& rng, bool wn,
                    float scale) {
    Tensor w({out_ch, in_ch, k, k});
    double std = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    for (float& v : w.data) v = static_cast<float>(rng.gaussian() * std * scale);
    ConvLayer layer{Param(name + ".w", std::move(w)), Param(name + ".b", Tensor({out_ch}))};
    if (wn) layer.w.enable_weight_norm();
    return layer;
}

ConvLayer make_dense_layer(const std::string& name, int out_dim, int in_dim, Rng& rng,
                           float scale) {
    Tensor w({out_dim, in_dim});
    double std = std::sqrt(2.0 / static_cast<double>(in_dim));
    for (float& v : w.data) v = static_cast<float>(rng.gaussian() * std * scale);
    return ConvLayer{Param(name + ".w", std::move(w)), Param(name + ".b", Tensor({out_dim}))};
}

}  // namespace

CascadeWeights init_weights(const CascadeConfig& cfg, uint64_t seed) {
    cfg.validate();
    CascadeWeights weights;
    weights.cfg = cfg;
    Rng rng(mix_key({seed, 0x696e6974ULL}));
    const int C = cfg.feat_ch;
    for (int k = 0; k < cfg.K; ++k) {
        ModuleWeights mod;
        std::string mk = "m" + std::to_string(k);
        int fuse_in = cfg.in_ch + cfg.latent_spatial_ch + (k > 0 ? cfg.out_ch : 0);
        mod.fuse = make_conv(mk + ".fuse", C, fuse_in, 3, rng, cfg.weight_norm, 1.0f);
        for (int i = 0; i < cfg.rrdb_per_module; ++i) {
            RrdbWeights rrdb;
            for (int j = 0; j < cfg.dense_blocks_per_rrdb; ++j) {
                DenseBlockWeights db;
                for (int l = 0; l < cfg.convs_per_dense_block; ++l) {
                    int ci = C + l * cfg.growth_ch;
                    bool last = (l == cfg.convs_per_dense_block - 1);
                    int co = last ? C : cfg.growth_ch;
                    db.convs.push_back(make_conv(mk + ".r" + std::to_string(i) + ".d" +
                                                     std::to_string(j) + ".c" + std::to_string(l),
                                                 co, ci, 3, rng, cfg.weight_norm,
                                                 last ? 0.1f : 1.0f));
                }
                rrdb.blocks.push_back(std::move(db));
            }
            mod.rrdbs.push_back(std::move(rrdb));
        }
        mod.out = make_conv(mk + ".out", cfg.out_ch, C, 3, rng, cfg.weight_norm, 0.1f);
        if (cfg.mapping_enabled) {
            int g = cfg.latent_global_dim;
            for (int l = 0; l < cfg.mapping_layers; ++l) {
                bool last = (l == cfg.mapping_layers - 1);
                int od = last ? 2 * C * cfg.rrdb_per_module : g;
                // final layer tapered so modulation sits at identity for z=0
                mod.mapping.push_back(make_dense_layer(mk + ".map" + std::to_string(l), od, g, rng,
                                                       last ? 0.1f : 1.0f));
            }
        }
        weights.modules.push_back(std::move(mod));
    }
    return weights;
}

std::vector<Param*> CascadeWeights::params() {
    std::vector<Param*> out;
    for (ModuleWeights& mod : modules) {
        out.push_back(&mod.fuse.w);
        out.push_back(&mod.fuse.b);
        for (RrdbWeights& r : mod.rrdbs)
            for (DenseBlockWeights& d : r.blocks)
                for (ConvLayer& c : d.convs) {
                    out.push_back(&c.w);
                    out.push_back(&c.b);
                }
        out.push_back(&mod.out.w);
        out.push_back(&mod.out.b);
        for (ConvLayer& c : mod.mapping) {
            out.push_back(&c.w);
            out.push_back(&c.b);
        }
    }
    return out;
}

std::vector<ParamSlot> CascadeWeights::slots() {
    std::vector<ParamSlot> out;
    for (Param* p : params()) append_slots(*p, out);
    return out;
}

void CascadeWeights::zero_grads() {
    for (Param* p : params()) p->zero_grad();
}

long long CascadeWeights::param_count() {
    long long n = 0;
    for (const ParamSlot& s : slots()) n += s.value->numel();
    return n;
}

Node* rrdb_forward(Tape& tape, const CascadeConfig& cfg, RrdbWeights& w, Node* x, Node* gamma,
                   Node* delta) {
    require(x->value.c() == cfg.feat_ch,
            "rrdb_forward: expected " + std::to_string(cfg.feat_ch) + " channels, got " +
                std::to_string(x->value.c()));
    Node* b = x;
    for (DenseBlockWeights& db : w.blocks) {
        std::vector<Node*> grown{b};
        Node* block_out = nullptr;
        for (size_t l = 0; l < db.convs.size(); ++l) {
            Node* in = grown.size() == 1 ? grown[0] : tape.concat_channels(grown);
            Node* o = tape.conv2d(in, db.convs[l].w, db.convs[l].b, 1, 1);
            if (l + 1 < db.convs.size()) {
                grown.push_back(tape.leaky_relu(o, cfg.leaky_slope));
            } else {
                block_out = o;
            }
        }
        b = tape.axpy(b, cfg.beta, block_out);
    }
    if (gamma) b = tape.channel_affine(b, gamma, delta);
    return b;
}

Node* module_forward(Tape& tape, const CascadeConfig& cfg, ModuleWeights& w, int k, Node* cond,
                     Node* prev, const LatentNodes& code) {
    const int r = cfg.res_at(k);
    require(cond->value.h() == r && cond->value.w() == r,
            "module_forward: conditioning input at " + shape_str(cond->value.shape) +
                " but module " + std::to_string(k) + " runs at " + std::to_string(r));
    require(code.spatial->value.h() == r && code.spatial->value.w() == r,
            "module_forward: spatial latent resolution mismatch");
    std::vector<Node*> parts{cond, code.spatial};
    if (k > 0) {
        require(prev != nullptr, "module_forward: missing previous-module output");
        require(prev->value.h() == r / 2, "module_forward: previous output must be one octave down");
        parts.push_back(tape.nearest_up2(prev));
    }
    Node* fused = tape.conv2d(tape.concat_channels(parts), w.fuse.w, w.fuse.b, 1, 1);

    // Per-RRDB modulation from the mapping network (identity when disabled).
    std::vector<Node*> gammas(cfg.rrdb_per_module, nullptr);
    std::vector<Node*> deltas(cfg.rrdb_per_module, nullptr);
    if (cfg.mapping_enabled) {
        Node* h = code.global;
        for (int l = 0; l + 1 < cfg.mapping_layers; ++l)
            h = tape.leaky_relu(tape.dense(h, w.mapping[l].w, w.mapping[l].b), cfg.leaky_slope);
        Node* raw = tape.dense(h, w.mapping[cfg.mapping_layers - 1].w,
                               w.mapping[cfg.mapping_layers - 1].b);
        const int C = cfg.feat_ch;
        for (int i = 0; i < cfg.rrdb_per_module; ++i) {
            gammas[i] = tape.add_scalar(tape.slice_cols(raw, 2 * i * C, 2 * i * C + C), 1.0f);
            deltas[i] = tape.slice_cols(raw, 2 * i * C + C, 2 * (i + 1) * C);
        }
    }

    Node* s = fused;
    for (int i = 0; i < cfg.rrdb_per_module; ++i)
        s = rrdb_forward(tape, cfg, w.rrdbs[i], s, gammas[i], deltas[i]);
    Node* feat = tape.axpy(fused, cfg.beta, s);
    return tape.conv2d(feat, w.out.w, w.out.b, 1, 1);  // no output activation
}

std::vector<Node*> cascade_forward(Tape& tape, CascadeWeights& weights,
                                   const std::vector<Node*>& cond_levels,
                                   const std::vector<LatentNodes>& latents, int up_to) {
    require(up_to >= 1 && up_to <= weights.cfg.K, "cascade_forward: up_to out of range");
    require(static_cast<int>(cond_levels.size()) >= up_to,
            "cascade_forward: conditioning pyramid shallower than up_to");
    require(static_cast<int>(latents.size()) >= up_to,
            "cascade_forward: latent pyramid shallower than up_to");
    std::vector<Node*> outputs;
    Node* prev = nullptr;
    for (int k = 0; k < up_to; ++k) {
        prev = module_forward(tape, weights.cfg, weights.modules[k], k, cond_levels[k], prev,
                              latents[k]);
        outputs.push_back(prev);
    }
    return outputs;
}

std::vector<LatentNodes> batch_latents(Tape& tape, const CascadeConfig& cfg,
                                       const std::vector<const LatentPyramid*>& items, int up_to) {
    const int N = static_cast<int>(items.size());
    std::vector<LatentNodes> out;
    for (int k = 0; k < up_to; ++k) {
        const Tensor& sp0 = items[0]->codes[k].spatial;
        Tensor sp({N, sp0.c(), sp0.h(), sp0.w()});
        Tensor gl({N, cfg.latent_global_dim});
        const size_t sp_sz = sp0.data.size();
        for (int n = 0; n < N; ++n) {
            const LatentCode& code = items[n]->codes[k];
            require(code.spatial.same_shape(sp0) &&
                        code.global.numel() == cfg.latent_global_dim,
                    "batch_latents: inconsistent latent shapes");
            std::copy_n(code.spatial.data.data(), sp_sz, sp.data.data() + n * sp_sz);
            std::copy_n(code.global.data.data(), cfg.latent_global_dim,
                        gl.data.data() + static_cast<size_t>(n) * cfg.latent_global_dim);
        }
        out.push_back({tape.leaf(std::move(sp)), tape.leaf(std::move(gl))});
    }
    return out;
}

std::vector<Tensor> cascade_apply(CascadeWeights& weights, const ImagePyramid& cond,
                                  const LatentPyramid& latents, int up_to) {
    require(up_to >= 1 && up_to <= weights.cfg.K, "cascade_apply: up_to out of range");
    require(cond.depth() >= up_to && static_cast<int>(latents.codes.size()) >= up_to,
            "cascade_apply: pyramid depth below up_to");
    Tape tape(/*record=*/false);
    std::vector<Node*> cond_nodes;
    for (int k = 0; k < up_to; ++k) cond_nodes.push_back(tape.leaf(cond.levels[k]));
    auto lat = batch_latents(tape, weights.cfg, {&latents}, up_to);
    auto outs = cascade_forward(tape, weights, cond_nodes, lat, up_to);
    std::vector<Tensor> result;
    for (Node* o : outs) result.push_back(o->value);
    return result;
}

}  // namespace camnet
