#include "camnet/imle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "camnet/rng.hpp"

namespace camnet {

namespace {

constexpr uint64_t kLatentTag = 0x6c6174656e74ULL;   // latent streams
constexpr uint64_t kShuffleTag = 0x73687566ULL;      // epoch shuffles

/// {1,...} -> {m,...} by repetition.
Tensor replicate(const Tensor& t, int m) {
    require(!t.shape.empty() && t.shape[0] == 1, "replicate: expected a batch of one");
    std::vector<int> s = t.shape;
    s[0] = m;
    Tensor out(s);
    for (int i = 0; i < m; ++i)
        std::copy_n(t.data.data(), t.data.size(), out.data.data() + i * t.data.size());
    return out;
}

/// Stack batch-of-one tensors along the batch axis.
Tensor stack(const std::vector<const Tensor*>& ts) {
    require(!ts.empty() && ts[0]->shape[0] == 1, "stack: expected batches of one");
    std::vector<int> s = ts[0]->shape;
    s[0] = static_cast<int>(ts.size());
    Tensor out(s);
    for (size_t i = 0; i < ts.size(); ++i) {
        require(ts[i]->same_shape(*ts[0]), "stack: inconsistent shapes");
        std::copy_n(ts[i]->data.data(), ts[i]->data.size(),
                    out.data.data() + i * ts[i]->data.size());
    }
    return out;
}

/// Extract row n of a batched tensor as a batch of one.
Tensor batch_row(const Tensor& t, int n) {
    std::vector<int> s = t.shape;
    s[0] = 1;
    Tensor out(s);
    std::copy_n(t.data.data() + static_cast<size_t>(n) * out.data.size(), out.data.size(),
                out.data.data());
    return out;
}

int argmin_lowest(const std::vector<float>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] < v[best]) best = i;  // strict: ties resolve to the lowest index
    return best;
}

Tensor clamp01_tensor(const Tensor& t) {
    Tensor out = t;
    for (float& v : out.data) v = std::min(1.0f, std::max(0.0f, v));
    return out;
}

}  // namespace

void TrainConfig::validate(int K) const {
    require(static_cast<int>(m_per_stage.size()) == K,
            "TrainConfig: m_per_stage must list one budget per module (" + std::to_string(K) +
                "), got " + std::to_string(m_per_stage.size()));
    for (int m : m_per_stage) require(m >= 1, "TrainConfig: candidate budgets must be >= 1");
    require(reselect_every >= 1, "TrainConfig: reselect_every must be >= 1");
    require(epochs >= 0, "TrainConfig: epochs must be >= 0");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(lr > 0.0f, "TrainConfig: lr must be positive");
}

uint64_t latent_key(uint64_t seed, LatentUse use, int64_t epoch, int64_t input_index, int stage,
                    int candidate) {
    return mix_key({seed, kLatentTag, static_cast<uint64_t>(use), static_cast<uint64_t>(epoch),
                    static_cast<uint64_t>(input_index), static_cast<uint64_t>(stage),
                    static_cast<uint64_t>(candidate)});
}

LatentCode sample_code(const CascadeConfig& cfg, int stage, uint64_t key) {
    require(stage >= 0 && stage < cfg.K, "sample_code: stage out of range");
    const int r = cfg.res_at(stage);
    LatentCode code{Tensor({1, cfg.latent_spatial_ch, r, r}), Tensor({1, cfg.latent_global_dim})};
    Rng rng(key);
    for (float& v : code.spatial.data) v = static_cast<float>(rng.gaussian());
    for (float& v : code.global.data) v = static_cast<float>(rng.gaussian());
    return code;
}

LatentPyramid sample_latents(const CascadeConfig& cfg, uint64_t seed, LatentUse use, int64_t epoch,
                             int64_t input_index, int candidate) {
    LatentPyramid lp;
    for (int k = 0; k < cfg.K; ++k)
        lp.codes.push_back(sample_code(cfg, k, latent_key(seed, use, epoch, input_index, k,
                                                          candidate)));
    return lp;
}

namespace {

/// Rank a batch of candidate pyramids at scale `k` (outputs clamped to the
/// image range before the distance is taken) and return per-candidate
/// distances.
std::vector<float> rank_candidates(CascadeWeights& weights, const ImagePyramid& cond,
                                   const Tensor& target_k,
                                   const std::vector<LatentPyramid>& cands, int k,
                                   PerceptualDistance& dist) {
    const int m = static_cast<int>(cands.size());
    Tape tape(/*record=*/false);
    std::vector<Node*> cond_nodes;
    for (int j = 0; j <= k; ++j) cond_nodes.push_back(tape.leaf(replicate(cond.levels[j], m)));
    std::vector<const LatentPyramid*> ptrs;
    for (const LatentPyramid& c : cands) ptrs.push_back(&c);
    auto lat = batch_latents(tape, weights.cfg, ptrs, k + 1);
    auto outs = cascade_forward(tape, weights, cond_nodes, lat, k + 1);
    Node* pred = tape.clamp01(outs[k]);
    Node* d = dist.distance_vec(tape, pred, tape.leaf(replicate(target_k, m)));
    return d->value.data;
}

}  // namespace

SelectionRecord hierarchical_select(CascadeWeights& weights, const ImagePyramid& cond,
                                    const ImagePyramid& target, const TrainConfig& cfg,
                                    PerceptualDistance& dist, int64_t input_index, int epoch) {
    const CascadeConfig& ccfg = weights.cfg;
    cfg.validate(ccfg.K);
    require(cond.depth() >= ccfg.K && target.depth() >= ccfg.K,
            "hierarchical_select: pyramids shallower than the cascade");
    SelectionRecord rec;
    rec.epoch = epoch;
    for (int k = 0; k < ccfg.K; ++k) {
        const int m = cfg.m_per_stage[k];
        // each candidate keeps the committed coarse codes and varies stage k
        std::vector<LatentPyramid> cands(m);
        for (int c = 0; c < m; ++c) {
            cands[c].codes = rec.latent.codes;
            cands[c].codes.push_back(sample_code(
                ccfg, k, latent_key(cfg.seed, LatentUse::select, epoch, input_index, k, c)));
        }
        auto d = rank_candidates(weights, cond, target.levels[k], cands, k, dist);
        int best = argmin_lowest(d);
        rec.latent.codes.push_back(std::move(cands[best].codes[k]));
        rec.chosen_index.push_back(best);
        rec.stage_distance.push_back(d[best]);
    }
    return rec;
}

SelectionRecord vanilla_select(CascadeWeights& weights, const ImagePyramid& cond,
                               const ImagePyramid& target, const TrainConfig& cfg,
                               PerceptualDistance& dist, int m_total, int64_t input_index,
                               int epoch) {
    const CascadeConfig& ccfg = weights.cfg;
    require(m_total >= 1, "vanilla_select: need at least one candidate");
    require(cond.depth() >= ccfg.K && target.depth() >= ccfg.K,
            "vanilla_select: pyramids shallower than the cascade");
    std::vector<LatentPyramid> cands;
    for (int c = 0; c < m_total; ++c)
        cands.push_back(sample_latents(ccfg, cfg.seed, LatentUse::select, epoch, input_index, c));
    auto d = rank_candidates(weights, cond, target.levels[ccfg.K - 1], cands, ccfg.K - 1, dist);
    int best = argmin_lowest(d);
    SelectionRecord rec;
    rec.epoch = epoch;
    rec.latent = std::move(cands[best]);
    rec.chosen_index.assign(ccfg.K, best);
    // record the chosen pyramid's distance at every scale for logging
    auto outs = cascade_apply(weights, cond, rec.latent, ccfg.K);
    for (int k = 0; k < ccfg.K; ++k)
        rec.stage_distance.push_back(
            selection_distance(dist, clamp01_tensor(outs[k]), target.levels[k]));
    rec.stage_distance[ccfg.K - 1] = d[best];
    return rec;
}

ObjectiveResult cimle_objective(Tape& tape, CascadeWeights& weights, PerceptualDistance& dist,
                                const std::vector<const TrainItem*>& batch,
                                const std::vector<const SelectionRecord*>& selections,
                                const TrainConfig& cfg, int epoch) {
    const CascadeConfig& ccfg = weights.cfg;
    require(!batch.empty() && batch.size() == selections.size(),
            "cimle_objective: batch/selection length mismatch");
    for (const SelectionRecord* s : selections) {
        int age = epoch - s->epoch;
        if (age < 0 || age >= cfg.reselect_every)
            throw TrainError("cimle_objective: selection from epoch " + std::to_string(s->epoch) +
                             " is stale at epoch " + std::to_string(epoch) +
                             " (reselect_every=" + std::to_string(cfg.reselect_every) + ")");
    }
    std::vector<Node*> cond_nodes, target_nodes;
    for (int k = 0; k < ccfg.K; ++k) {
        std::vector<const Tensor*> cs, ts;
        for (const TrainItem* it : batch) {
            cs.push_back(&it->cond.levels[k]);
            ts.push_back(&it->target.levels[k]);
        }
        cond_nodes.push_back(tape.leaf(stack(cs)));
        target_nodes.push_back(tape.leaf(stack(ts)));
    }
    std::vector<const LatentPyramid*> lat_ptrs;
    for (const SelectionRecord* s : selections) lat_ptrs.push_back(&s->latent);
    auto lat = batch_latents(tape, ccfg, lat_ptrs, ccfg.K);
    auto outs = cascade_forward(tape, weights, cond_nodes, lat, ccfg.K);
    MultiscaleLoss ml =
        multiscale_distance(tape, dist, outs, target_nodes, !cfg.intermediate_supervision);
    ObjectiveResult res;
    res.loss = tape.mean_all(ml.total);
    for (Node* lvl : ml.per_level) {
        double s = 0.0;
        for (float v : lvl->value.data) s += v;
        res.per_scale.push_back(s / static_cast<double>(lvl->value.data.size()));
    }
    return res;
}

void train(CascadeWeights& weights, const std::vector<TrainItem>& dataset, const TrainConfig& cfg,
           PerceptualDistance& dist, const TrainHooks& hooks) {
    const CascadeConfig& ccfg = weights.cfg;
    cfg.validate(ccfg.K);
    require(!dataset.empty(), "train: empty dataset");
    const int n = static_cast<int>(dataset.size());
    std::vector<SelectionRecord> sel(n);
    Adam opt;
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch % cfg.reselect_every == 0) {
            auto t0 = std::chrono::steady_clock::now();
            for (int i = 0; i < n; ++i)
                sel[i] = cfg.hs ? hierarchical_select(weights, dataset[i].cond, dataset[i].target,
                                                      cfg, dist, i, epoch)
                                : vanilla_select(weights, dataset[i].cond, dataset[i].target, cfg,
                                                 dist, cfg.m_total(), i, epoch);
            if (hooks.on_select) {
                SelectLog log;
                log.epoch = epoch;
                log.mean_stage_distance.assign(ccfg.K, 0.0);
                for (const SelectionRecord& s : sel)
                    for (int k = 0; k < ccfg.K; ++k)
                        log.mean_stage_distance[k] += s.stage_distance[k] / n;
                log.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                hooks.on_select(log);
            }
        }
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(mix_key({cfg.seed, kShuffleTag, static_cast<uint64_t>(epoch)}));
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.uniform_int(i + 1)]);
        for (int start = 0; start < n; start += cfg.batch_size) {
            int end = std::min(n, start + cfg.batch_size);
            std::vector<const TrainItem*> batch;
            std::vector<const SelectionRecord*> sels;
            for (int i = start; i < end; ++i) {
                batch.push_back(&dataset[order[i]]);
                sels.push_back(&sel[order[i]]);
            }
            Tape tape;
            ObjectiveResult obj = cimle_objective(tape, weights, dist, batch, sels, cfg, epoch);
            double loss = obj.loss->value.data[0];
            if (!std::isfinite(loss))
                throw TrainError("train: non-finite loss at step " + std::to_string(step + 1));
            tape.backward(obj.loss);
            opt.step(weights.slots(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                     ++step);
            if (hooks.on_step) hooks.on_step({step, epoch, loss, obj.per_scale, cfg.lr});
        }
        // round boundary: the weights trained against this selection are final
        bool round_end = ((epoch + 1) % cfg.reselect_every == 0) || epoch + 1 == cfg.epochs;
        if (round_end && hooks.on_round) hooks.on_round(epoch);
    }
}

std::vector<Tensor> test_sample(CascadeWeights& weights, const ImagePyramid& cond, int count,
                                uint64_t seed, int64_t input_index) {
    const CascadeConfig& ccfg = weights.cfg;
    require(count >= 1, "test_sample: count must be >= 1");
    require(cond.depth() >= ccfg.K, "test_sample: conditioning pyramid shallower than cascade");
    Tape tape(/*record=*/false);
    std::vector<Node*> cond_nodes;
    for (int k = 0; k < ccfg.K; ++k) cond_nodes.push_back(tape.leaf(replicate(cond.levels[k],
                                                                              count)));
    std::vector<LatentPyramid> lps;
    for (int c = 0; c < count; ++c)
        lps.push_back(sample_latents(ccfg, seed, LatentUse::test, /*epoch=*/0, input_index, c));
    std::vector<const LatentPyramid*> ptrs;
    for (const LatentPyramid& lp : lps) ptrs.push_back(&lp);
    auto lat = batch_latents(tape, ccfg, ptrs, ccfg.K);
    auto outs = cascade_forward(tape, weights, cond_nodes, lat, ccfg.K);
    Node* fin = tape.clamp01(outs[ccfg.K - 1]);
    std::vector<Tensor> result;
    for (int c = 0; c < count; ++c) result.push_back(batch_row(fin->value, c));
    return result;
}

}  // namespace camnet
