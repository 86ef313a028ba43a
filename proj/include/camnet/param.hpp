#pragma once

#include <cmath>
#include <string>

#include "camnet/tensor.hpp"

namespace camnet {

/// Trainable parameter. When weight-normalized the stored value is a cache
/// of g * v / ||v|| (per output channel, dim 0) and must be refreshed before
/// every forward pass; Adam then updates (v, g) instead of value.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    bool weight_norm = false;
    Tensor wn_v;       // direction, same shape as value
    Tensor wn_g;       // per-output-channel gain, shape [out_ch]
    Tensor wn_v_grad;
    Tensor wn_g_grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.shape);
    }

    long long per_channel_size() const {
        return value.numel() / value.shape[0];
    }

    void enable_weight_norm() {
        weight_norm = true;
        wn_v = value;
        int oc = value.shape[0];
        wn_g = Tensor({oc});
        long long cs = per_channel_size();
        for (int o = 0; o < oc; ++o) {
            double s = 0.0;
            for (long long i = 0; i < cs; ++i) {
                float x = wn_v.data[o * cs + i];
                s += static_cast<double>(x) * x;
            }
            wn_g.data[o] = static_cast<float>(std::sqrt(s));
        }
        wn_v_grad = Tensor(wn_v.shape);
        wn_g_grad = Tensor(wn_g.shape);
        refresh();
    }

    /// Recompute value = g * v / ||v|| per output channel.
    void refresh() {
        if (!weight_norm) return;
        int oc = value.shape[0];
        long long cs = per_channel_size();
        for (int o = 0; o < oc; ++o) {
            double s = 0.0;
            for (long long i = 0; i < cs; ++i) {
                float x = wn_v.data[o * cs + i];
                s += static_cast<double>(x) * x;
            }
            float inv = static_cast<float>(wn_g.data[o] / std::sqrt(s));
            for (long long i = 0; i < cs; ++i)
                value.data[o * cs + i] = wn_v.data[o * cs + i] * inv;
        }
    }

    /// Map an accumulated dL/d(value) in `grad` into (v, g) gradients.
    /// Called once per backward pass, after which `grad` is cleared.
    void push_weight_norm_grad() {
        if (!weight_norm) return;
        int oc = value.shape[0];
        long long cs = per_channel_size();
        for (int o = 0; o < oc; ++o) {
            double norm2 = 0.0, dot = 0.0;
            for (long long i = 0; i < cs; ++i) {
                float v = wn_v.data[o * cs + i];
                norm2 += static_cast<double>(v) * v;
                dot += static_cast<double>(v) * grad.data[o * cs + i];
            }
            double norm = std::sqrt(norm2);
            double g = wn_g.data[o];
            // dg = (dW . v) / ||v||;  dv = g/||v|| * (dW - (dW.v) v / ||v||^2)
            wn_g_grad.data[o] += static_cast<float>(dot / norm);
            double a = g / norm;
            double b = g * dot / (norm2 * norm);
            for (long long i = 0; i < cs; ++i)
                wn_v_grad.data[o * cs + i] += static_cast<float>(
                    a * grad.data[o * cs + i] - b * wn_v.data[o * cs + i]);
        }
        grad.fill(0.0f);
    }

    void zero_grad() {
        grad.fill(0.0f);
        if (weight_norm) {
            wn_v_grad.fill(0.0f);
            wn_g_grad.fill(0.0f);
        }
    }
};

/// One flat trainable tensor as seen by the optimizer.
struct ParamSlot {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

/// Flatten a parameter into its optimizer slots: (v, g) when weight
/// normalized, the raw value otherwise.
inline void append_slots(Param& p, std::vector<ParamSlot>& out) {
    if (p.weight_norm) {
        out.push_back({p.name + ".v", &p.wn_v, &p.wn_v_grad});
        out.push_back({p.name + ".g", &p.wn_g, &p.wn_g_grad});
    } else {
        out.push_back({p.name, &p.value, &p.grad});
    }
}

}  // namespace camnet
