#include "camnet/distance.hpp"

#include <cmath>

#include "camnet/rng.hpp"

namespace camnet {

FeatureNet::FeatureNet(int in_ch, uint64_t seed) : in_ch_(in_ch), seed_(seed) {
    int chans[kStages + 1] = {in_ch, 8, 16, 32};
    for (int s = 0; s < kStages; ++s) {
        int ci = chans[s], co = chans[s + 1];
        Tensor w({co, ci, 3, 3});
        Rng rng(mix_key({seed, static_cast<uint64_t>(s), static_cast<uint64_t>(in_ch)}));
        double std = std::sqrt(2.0 / (ci * 9));
        for (float& v : w.data) v = static_cast<float>(rng.gaussian() * std);
        w_[s] = Param("featnet.s" + std::to_string(s) + ".w", std::move(w));
        b_[s] = Param("featnet.s" + std::to_string(s) + ".b", Tensor({co}));
    }
}

std::vector<Node*> FeatureNet::stages(Tape& tape, Node* x) {
    std::vector<Node*> out;
    Node* h = x;
    for (int s = 0; s < kStages; ++s) {
        h = tape.conv2d(h, w_[s], b_[s], /*stride=*/2, /*pad=*/1, /*train_params=*/false);
        h = tape.leaky_relu(h, 0.2f);
        out.push_back(h);
    }
    return out;
}

std::vector<std::vector<float>> FeatureNet::pooled_features(const Tensor& images) {
    Tape tape(/*record=*/false);
    Node* x = tape.leaf(images);
    Node* top = stages(tape, x).back();
    const int N = top->value.n(), C = top->value.c();
    const size_t plane = static_cast<size_t>(top->value.h()) * top->value.w();
    std::vector<std::vector<float>> out(N, std::vector<float>(C));
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            const float* p = top->value.data.data() + (static_cast<size_t>(n) * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) s += p[i];
            out[n][c] = static_cast<float>(s / static_cast<double>(plane));
        }
    return out;
}

DistanceBackend backend_from_string(const std::string& s) {
    if (s == "proxy") return DistanceBackend::proxy;
    if (s == "pixel_l2") return DistanceBackend::pixel_l2;
    throw ShapeError("unknown distance backend '" + s + "'");
}

FeatureNet& PerceptualDistance::features(int in_ch) {
    auto it = nets_.find(in_ch);
    if (it == nets_.end())
        it = nets_.emplace(in_ch, std::make_unique<FeatureNet>(in_ch, feature_seed_)).first;
    return *it->second;
}

Node* PerceptualDistance::distance_vec(Tape& tape, Node* a, Node* b) {
    require(a->value.same_shape(b->value), "perceptual_distance: shape mismatch " +
                                               shape_str(a->value.shape) + " vs " +
                                               shape_str(b->value.shape));
    require(a->value.ndim() == 4, "perceptual_distance: inputs must be 4-D images");
    Node* diff = tape.sub(a, b);
    if (backend_ == DistanceBackend::pixel_l2) {
        const float inv = 1.0f / static_cast<float>(diff->value.numel() / diff->value.n());
        return tape.per_sample_sum_sq(diff, inv);
    }
    FeatureNet& net = features(a->value.c());
    auto fa = net.stages(tape, a);
    auto fb = net.stages(tape, b);
    Node* total = nullptr;
    for (int s = 0; s < FeatureNet::kStages; ++s) {
        Node* d = tape.sub(tape.channel_unit_norm(fa[s]), tape.channel_unit_norm(fb[s]));
        const float inv_hw = 1.0f / static_cast<float>(d->value.h() * d->value.w());
        Node* term = tape.per_sample_sum_sq(d, inv_hw);
        total = total ? tape.add(total, term) : term;
    }
    Node* pix = tape.scale(tape.per_sample_mean_abs(diff), kLambdaPix);
    return tape.add(total, pix);
}

double PerceptualDistance::operator()(const Tensor& a, const Tensor& b) {
    auto d = per_sample(a, b);
    double s = 0.0;
    for (double v : d) s += v;
    return s / static_cast<double>(d.size());
}

std::vector<double> PerceptualDistance::per_sample(const Tensor& a, const Tensor& b) {
    Tape tape(/*record=*/false);
    Node* d = distance_vec(tape, tape.leaf(a), tape.leaf(b));
    return std::vector<double>(d->value.data.begin(), d->value.data.end());
}

MultiscaleLoss multiscale_distance(Tape& tape, PerceptualDistance& dist,
                                   const std::vector<Node*>& outputs,
                                   const std::vector<Node*>& targets, bool finest_only) {
    require(!outputs.empty() && outputs.size() == targets.size(),
            "multiscale_distance: outputs/targets length mismatch");
    MultiscaleLoss loss;
    for (size_t k = 0; k < outputs.size(); ++k) {
        Node* d = dist.distance_vec(tape, outputs[k], targets[k]);
        loss.per_level.push_back(d);
        if (finest_only && k + 1 < outputs.size()) continue;
        loss.total = loss.total ? tape.add(loss.total, d) : d;
    }
    return loss;
}

double multiscale_distance(PerceptualDistance& dist, const std::vector<Tensor>& outputs,
                           const ImagePyramid& targets) {
    require(static_cast<int>(outputs.size()) == targets.depth(),
            "multiscale_distance: depth mismatch");
    double total = 0.0;
    for (size_t k = 0; k < outputs.size(); ++k) total += dist(outputs[k], targets.levels[k]);
    return total;
}

double selection_distance(PerceptualDistance& dist, const Tensor& output_k,
                          const Tensor& target_k) {
    return dist(output_k, target_k);
}

}  // namespace camnet
