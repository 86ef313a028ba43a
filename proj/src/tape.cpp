#include "camnet/tape.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

namespace camnet {

namespace {

void im2col(const float* src, int C, int H, int W, int kh, int kw, int stride, int pad,
            int Ho, int Wo, float* col) {
    // col is (C*kh*kw) x (Ho*Wo)
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                float* row = col + ((c * kh + ki) * kw + kj) * (Ho * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    int ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= H) {
                        std::fill(row + oh * Wo, row + (oh + 1) * Wo, 0.0f);
                        continue;
                    }
                    const float* srow = src + (c * H + ih) * W;
                    for (int ow = 0; ow < Wo; ++ow) {
                        int iw = ow * stride - pad + kj;
                        row[oh * Wo + ow] = (iw < 0 || iw >= W) ? 0.0f : srow[iw];
                    }
                }
            }
        }
    }
}

void col2im_add(const float* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                int Ho, int Wo, float* dst) {
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const float* row = col + ((c * kh + ki) * kw + kj) * (Ho * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    int ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= H) continue;
                    float* drow = dst + (c * H + ih) * W;
                    for (int ow = 0; ow < Wo; ++ow) {
                        int iw = ow * stride - pad + kj;
                        if (iw >= 0 && iw < W) drow[iw] += row[oh * Wo + ow];
                    }
                }
            }
        }
    }
}

}  // namespace

Node* Tape::make(Tensor v, bool rg) {
    auto node = std::make_unique<Node>();
    node->value = std::move(v);
    node->requires_grad = record_ && rg;
    if (node->requires_grad) node->grad = Tensor(node->value.shape);
    Node* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
}

void Tape::touch(Param& p) {
    if (std::find(touched_.begin(), touched_.end(), &p) == touched_.end())
        touched_.push_back(&p);
}

Node* Tape::leaf(Tensor v, bool requires_grad) { return make(std::move(v), requires_grad); }

Node* Tape::conv2d(Node* x, Param& w, Param& b, int stride, int pad, bool train_params) {
    require(x->value.ndim() == 4, "conv2d: input must be 4-D, got " + shape_str(x->value.shape));
    require(w.value.ndim() == 4, "conv2d: weight must be 4-D, got " + shape_str(w.value.shape));
    const int N = x->value.n(), Cin = x->value.c(), H = x->value.h(), W = x->value.w();
    const int Cout = w.value.shape[0], kh = w.value.shape[2], kw = w.value.shape[3];
    require(w.value.shape[1] == Cin,
            "conv2d: weight expects " + std::to_string(w.value.shape[1]) + " input channels, input has " +
                std::to_string(Cin));
    require(b.value.ndim() == 1 && b.value.shape[0] == Cout, "conv2d: bias shape mismatch");
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    require(Ho >= 1 && Wo >= 1, "conv2d: kernel larger than padded input");

    w.refresh();
    const int K = Cin * kh * kw;
    Tensor out({N, Cout, Ho, Wo});
    std::vector<float> col(static_cast<size_t>(K) * Ho * Wo);
    for (int n = 0; n < N; ++n) {
        im2col(x->value.data.data() + static_cast<size_t>(n) * Cin * H * W, Cin, H, W, kh, kw,
               stride, pad, Ho, Wo, col.data());
        float* y = out.data.data() + static_cast<size_t>(n) * Cout * Ho * Wo;
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, Cout, Ho * Wo, K, 1.0f,
                    w.value.data.data(), K, col.data(), Ho * Wo, 0.0f, y, Ho * Wo);
        for (int co = 0; co < Cout; ++co) {
            float bias = b.value.data[co];
            float* row = y + static_cast<size_t>(co) * Ho * Wo;
            for (int i = 0; i < Ho * Wo; ++i) row[i] += bias;
        }
    }

    bool rg = x->requires_grad || (record_ && train_params);
    Node* out_node = make(std::move(out), rg);
    if (record_ && rg) {
        if (train_params) {
            touch(w);
            touch(b);
        }
        Param* wp = &w;
        Param* bp = &b;
        out_node->backward = [=]() {
            const int HoWo = Ho * Wo;
            std::vector<float> colbuf(static_cast<size_t>(K) * HoWo);
            std::vector<float> dcol(static_cast<size_t>(K) * HoWo);
            for (int n = 0; n < N; ++n) {
                const float* dy = out_node->grad.data.data() + static_cast<size_t>(n) * Cout * HoWo;
                if (train_params) {
                    im2col(x->value.data.data() + static_cast<size_t>(n) * Cin * H * W, Cin, H, W,
                           kh, kw, stride, pad, Ho, Wo, colbuf.data());
                    // dW += dY * col^T
                    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, Cout, K, HoWo, 1.0f, dy,
                                HoWo, colbuf.data(), HoWo, 1.0f, wp->grad.data.data(), K);
                    for (int co = 0; co < Cout; ++co) {
                        double s = 0.0;
                        const float* row = dy + static_cast<size_t>(co) * HoWo;
                        for (int i = 0; i < HoWo; ++i) s += row[i];
                        bp->grad.data[co] += static_cast<float>(s);
                    }
                }
                if (x->requires_grad) {
                    // dcol = W^T * dY, scattered back into dX
                    cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, K, HoWo, Cout, 1.0f,
                                wp->value.data.data(), K, dy, HoWo, 0.0f, dcol.data(), HoWo);
                    col2im_add(dcol.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                               x->grad.data.data() + static_cast<size_t>(n) * Cin * H * W);
                }
            }
        };
    }
    return out_node;
}

Node* Tape::dense(Node* x, Param& w, Param& b, bool train_params) {
    require(x->value.ndim() == 2, "dense: input must be 2-D, got " + shape_str(x->value.shape));
    const int N = x->value.shape[0], F = x->value.shape[1];
    const int O = w.value.shape[0];
    require(w.value.ndim() == 2 && w.value.shape[1] == F,
            "dense: weight " + shape_str(w.value.shape) + " does not match input features " +
                std::to_string(F));
    require(b.value.ndim() == 1 && b.value.shape[0] == O, "dense: bias shape mismatch");

    w.refresh();
    Tensor out({N, O});
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, N, O, F, 1.0f, x->value.data.data(), F,
                w.value.data.data(), F, 0.0f, out.data.data(), O);
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) out.data[n * O + o] += b.value.data[o];

    bool rg = x->requires_grad || (record_ && train_params);
    Node* out_node = make(std::move(out), rg);
    if (record_ && rg) {
        if (train_params) {
            touch(w);
            touch(b);
        }
        Param* wp = &w;
        Param* bp = &b;
        out_node->backward = [=]() {
            const float* dy = out_node->grad.data.data();
            if (train_params) {
                cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, O, F, N, 1.0f, dy, O,
                            x->value.data.data(), F, 1.0f, wp->grad.data.data(), F);
                for (int o = 0; o < O; ++o) {
                    double s = 0.0;
                    for (int n = 0; n < N; ++n) s += dy[n * O + o];
                    bp->grad.data[o] += static_cast<float>(s);
                }
            }
            if (x->requires_grad) {
                cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, N, F, O, 1.0f, dy, O,
                            wp->value.data.data(), F, 1.0f, x->grad.data.data(), F);
            }
        };
    }
    return out_node;
}

Node* Tape::leaky_relu(Node* x, float slope) {
    require(slope >= 0.0f && slope < 1.0f, "leaky_relu: slope must be in [0,1)");
    Tensor out = x->value;
    for (float& v : out.data)
        if (v < 0.0f) v *= slope;
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (size_t i = 0; i < x->grad.data.size(); ++i) {
                // gradient at exactly 0 is defined as slope
                float g = x->value.data[i] > 0.0f ? 1.0f : slope;
                x->grad.data[i] += out_node->grad.data[i] * g;
            }
        };
    }
    return out_node;
}

Node* Tape::nearest_up2(Node* x) {
    require(x->value.ndim() == 4, "nearest_up2: input must be 4-D");
    const int N = x->value.n(), C = x->value.c(), H = x->value.h(), W = x->value.w();
    Tensor out({N, C, 2 * H, 2 * W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    float v = x->value.at4(n, c, h, w);
                    out.at4(n, c, 2 * h, 2 * w) = v;
                    out.at4(n, c, 2 * h, 2 * w + 1) = v;
                    out.at4(n, c, 2 * h + 1, 2 * w) = v;
                    out.at4(n, c, 2 * h + 1, 2 * w + 1) = v;
                }
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int h = 0; h < H; ++h)
                        for (int w = 0; w < W; ++w)
                            x->grad.at4(n, c, h, w) +=
                                out_node->grad.at4(n, c, 2 * h, 2 * w) +
                                out_node->grad.at4(n, c, 2 * h, 2 * w + 1) +
                                out_node->grad.at4(n, c, 2 * h + 1, 2 * w) +
                                out_node->grad.at4(n, c, 2 * h + 1, 2 * w + 1);
        };
    }
    return out_node;
}

Node* Tape::box_down2(Node* x) {
    require(x->value.ndim() == 4, "box_down2: input must be 4-D");
    const int N = x->value.n(), C = x->value.c(), H = x->value.h(), W = x->value.w();
    require(H % 2 == 0 && W % 2 == 0,
            "box_down2: spatial dims must be even, got " + shape_str(x->value.shape));
    Tensor out({N, C, H / 2, W / 2});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H / 2; ++h)
                for (int w = 0; w < W / 2; ++w)
                    out.at4(n, c, h, w) = 0.25f * (x->value.at4(n, c, 2 * h, 2 * w) +
                                                   x->value.at4(n, c, 2 * h, 2 * w + 1) +
                                                   x->value.at4(n, c, 2 * h + 1, 2 * w) +
                                                   x->value.at4(n, c, 2 * h + 1, 2 * w + 1));
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int h = 0; h < H / 2; ++h)
                        for (int w = 0; w < W / 2; ++w) {
                            float g = 0.25f * out_node->grad.at4(n, c, h, w);
                            x->grad.at4(n, c, 2 * h, 2 * w) += g;
                            x->grad.at4(n, c, 2 * h, 2 * w + 1) += g;
                            x->grad.at4(n, c, 2 * h + 1, 2 * w) += g;
                            x->grad.at4(n, c, 2 * h + 1, 2 * w + 1) += g;
                        }
        };
    }
    return out_node;
}

Node* Tape::concat_channels(const std::vector<Node*>& xs) {
    require(!xs.empty(), "concat_channels: empty input list");
    const int N = xs[0]->value.n(), H = xs[0]->value.h(), W = xs[0]->value.w();
    int Ctot = 0;
    bool rg = false;
    for (Node* x : xs) {
        require(x->value.ndim() == 4 && x->value.n() == N && x->value.h() == H && x->value.w() == W,
                "concat_channels: mismatched shapes");
        Ctot += x->value.c();
        rg = rg || x->requires_grad;
    }
    Tensor out({N, Ctot, H, W});
    const size_t plane = static_cast<size_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        size_t off = static_cast<size_t>(n) * Ctot * plane;
        for (Node* x : xs) {
            const int C = x->value.c();
            std::copy_n(x->value.data.data() + static_cast<size_t>(n) * C * plane, C * plane,
                        out.data.data() + off);
            off += C * plane;
        }
    }
    Node* out_node = make(std::move(out), rg);
    if (out_node->requires_grad) {
        std::vector<Node*> parts = xs;
        out_node->backward = [=]() {
            for (int n = 0; n < N; ++n) {
                size_t off = static_cast<size_t>(n) * Ctot * plane;
                for (Node* x : parts) {
                    const int C = x->value.c();
                    if (x->requires_grad) {
                        float* dst = x->grad.data.data() + static_cast<size_t>(n) * C * plane;
                        const float* src = out_node->grad.data.data() + off;
                        for (size_t i = 0; i < C * plane; ++i) dst[i] += src[i];
                    }
                    off += C * plane;
                }
            }
        };
    }
    return out_node;
}

Node* Tape::add(Node* x, Node* y) { return axpy(x, 1.0f, y); }

Node* Tape::axpy(Node* x, float beta, Node* y) {
    require(x->value.same_shape(y->value), "axpy: shape mismatch " + shape_str(x->value.shape) +
                                               " vs " + shape_str(y->value.shape));
    Tensor out = x->value;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += beta * y->value.data[i];
    Node* out_node = make(std::move(out), x->requires_grad || y->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            if (x->requires_grad)
                for (size_t i = 0; i < x->grad.data.size(); ++i)
                    x->grad.data[i] += out_node->grad.data[i];
            if (y->requires_grad)
                for (size_t i = 0; i < y->grad.data.size(); ++i)
                    y->grad.data[i] += beta * out_node->grad.data[i];
        };
    }
    return out_node;
}

Node* Tape::sub(Node* x, Node* y) { return axpy(x, -1.0f, y); }

Node* Tape::add_scalar(Node* x, float s) {
    Tensor out = x->value;
    for (float& v : out.data) v += s;
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += out_node->grad.data[i];
        };
    }
    return out_node;
}

Node* Tape::scale(Node* x, float s) {
    Tensor out = x->value;
    for (float& v : out.data) v *= s;
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += s * out_node->grad.data[i];
        };
    }
    return out_node;
}

Node* Tape::slice_cols(Node* x, int c0, int c1) {
    require(x->value.ndim() == 2, "slice_cols: input must be 2-D");
    const int N = x->value.shape[0], F = x->value.shape[1];
    require(0 <= c0 && c0 < c1 && c1 <= F, "slice_cols: column range out of bounds");
    const int C = c1 - c0;
    Tensor out({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) out.data[n * C + c] = x->value.data[n * F + c0 + c];
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    x->grad.data[n * F + c0 + c] += out_node->grad.data[n * C + c];
        };
    }
    return out_node;
}

Node* Tape::channel_affine(Node* x, Node* gamma, Node* delta) {
    require(x->value.ndim() == 4, "channel_affine: input must be 4-D");
    const int N = x->value.n(), C = x->value.c(), H = x->value.h(), W = x->value.w();
    require(gamma->value.ndim() == 2 && gamma->value.shape[0] == N && gamma->value.shape[1] == C,
            "channel_affine: gamma must be N x C");
    require(delta->value.same_shape(gamma->value), "channel_affine: delta shape mismatch");
    Tensor out({N, C, H, W});
    const size_t plane = static_cast<size_t>(H) * W;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            float g = gamma->value.data[n * C + c];
            float d = delta->value.data[n * C + c];
            const float* src = x->value.data.data() + (static_cast<size_t>(n) * C + c) * plane;
            float* dst = out.data.data() + (static_cast<size_t>(n) * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] = g * src[i] + d;
        }
    bool rg = x->requires_grad || gamma->requires_grad || delta->requires_grad;
    Node* out_node = make(std::move(out), rg);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const size_t base = (static_cast<size_t>(n) * C + c) * plane;
                    const float* dy = out_node->grad.data.data() + base;
                    if (x->requires_grad) {
                        float g = gamma->value.data[n * C + c];
                        float* dx = x->grad.data.data() + base;
                        for (size_t i = 0; i < plane; ++i) dx[i] += g * dy[i];
                    }
                    if (gamma->requires_grad) {
                        const float* src = x->value.data.data() + base;
                        double s = 0.0;
                        for (size_t i = 0; i < plane; ++i) s += static_cast<double>(dy[i]) * src[i];
                        gamma->grad.data[n * C + c] += static_cast<float>(s);
                    }
                    if (delta->requires_grad) {
                        double s = 0.0;
                        for (size_t i = 0; i < plane; ++i) s += dy[i];
                        delta->grad.data[n * C + c] += static_cast<float>(s);
                    }
                }
        };
    }
    return out_node;
}

Node* Tape::clamp01(Node* x) {
    Tensor out = x->value;
    for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (size_t i = 0; i < x->grad.data.size(); ++i) {
                float v = x->value.data[i];
                if (v > 0.0f && v < 1.0f) x->grad.data[i] += out_node->grad.data[i];
            }
        };
    }
    return out_node;
}

Node* Tape::channel_unit_norm(Node* x) {
    require(x->value.ndim() == 4, "channel_unit_norm: input must be 4-D");
    const int N = x->value.n(), C = x->value.c(), H = x->value.h(), W = x->value.w();
    const float eps = 1e-10f;
    Tensor out({N, C, H, W});
    const size_t plane = static_cast<size_t>(H) * W;
    for (int n = 0; n < N; ++n)
        for (size_t i = 0; i < plane; ++i) {
            double s = eps;
            for (int c = 0; c < C; ++c) {
                float v = x->value.data[(static_cast<size_t>(n) * C + c) * plane + i];
                s += static_cast<double>(v) * v;
            }
            float inv = static_cast<float>(1.0 / std::sqrt(s));
            for (int c = 0; c < C; ++c) {
                size_t k = (static_cast<size_t>(n) * C + c) * plane + i;
                out.data[k] = x->value.data[k] * inv;
            }
        }
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (int n = 0; n < N; ++n)
                for (size_t i = 0; i < plane; ++i) {
                    double s = eps, dot = 0.0;
                    for (int c = 0; c < C; ++c) {
                        size_t k = (static_cast<size_t>(n) * C + c) * plane + i;
                        float v = x->value.data[k];
                        s += static_cast<double>(v) * v;
                        dot += static_cast<double>(v) * out_node->grad.data[k];
                    }
                    double inv = 1.0 / std::sqrt(s);
                    double inv3 = inv * inv * inv;
                    for (int c = 0; c < C; ++c) {
                        size_t k = (static_cast<size_t>(n) * C + c) * plane + i;
                        x->grad.data[k] += static_cast<float>(out_node->grad.data[k] * inv -
                                                              x->value.data[k] * dot * inv3);
                    }
                }
        };
    }
    return out_node;
}

Node* Tape::per_sample_sum_sq(Node* x, float scale) {
    const int N = x->value.shape[0];
    const size_t per = x->value.data.size() / N;
    Tensor out({N});
    for (int n = 0; n < N; ++n) {
        double s = 0.0;
        const float* src = x->value.data.data() + n * per;
        for (size_t i = 0; i < per; ++i) s += static_cast<double>(src[i]) * src[i];
        out.data[n] = static_cast<float>(s * scale);
    }
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            for (int n = 0; n < N; ++n) {
                float g = 2.0f * scale * out_node->grad.data[n];
                const float* src = x->value.data.data() + n * per;
                float* dst = x->grad.data.data() + n * per;
                for (size_t i = 0; i < per; ++i) dst[i] += g * src[i];
            }
        };
    }
    return out_node;
}

Node* Tape::per_sample_mean_abs(Node* x) {
    const int N = x->value.shape[0];
    const size_t per = x->value.data.size() / N;
    Tensor out({N});
    for (int n = 0; n < N; ++n) {
        double s = 0.0;
        const float* src = x->value.data.data() + n * per;
        for (size_t i = 0; i < per; ++i) s += std::fabs(src[i]);
        out.data[n] = static_cast<float>(s / static_cast<double>(per));
    }
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            const float inv = 1.0f / static_cast<float>(per);
            for (int n = 0; n < N; ++n) {
                float g = inv * out_node->grad.data[n];
                const float* src = x->value.data.data() + n * per;
                float* dst = x->grad.data.data() + n * per;
                for (size_t i = 0; i < per; ++i)
                    dst[i] += src[i] > 0.0f ? g : (src[i] < 0.0f ? -g : 0.0f);
            }
        };
    }
    return out_node;
}

Node* Tape::mean_all(Node* x) {
    const size_t n = x->value.data.size();
    double s = 0.0;
    for (float v : x->value.data) s += v;
    Tensor out({1});
    out.data[0] = static_cast<float>(s / static_cast<double>(n));
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        out_node->backward = [=]() {
            float g = out_node->grad.data[0] / static_cast<float>(n);
            for (size_t i = 0; i < n; ++i) x->grad.data[i] += g;
        };
    }
    return out_node;
}

Node* Tape::inner(Node* x, Tensor weights) {
    require(x->value.data.size() == weights.data.size(), "inner: size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < weights.data.size(); ++i)
        s += static_cast<double>(x->value.data[i]) * weights.data[i];
    Tensor out({1});
    out.data[0] = static_cast<float>(s);
    Node* out_node = make(std::move(out), x->requires_grad);
    if (out_node->requires_grad) {
        auto w = std::make_shared<Tensor>(std::move(weights));
        out_node->backward = [=]() {
            float g = out_node->grad.data[0];
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += g * w->data[i];
        };
    }
    return out_node;
}

void Tape::backward(Node* root) {
    require(record_, "backward on a non-recording tape");
    require(root->requires_grad, "backward: root does not require grad");
    root->grad.fill(1.0f);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node* n = it->get();
        if (n->requires_grad && n->backward) n->backward();
    }
    for (Param* p : touched_) p->push_weight_norm_grad();
}

double finite_difference(const std::function<double(const Tensor&)>& f, Tensor x, size_t index,
                         double h) {
    float orig = x.data[index];
    auto eval = [&](double d) {
        x.data[index] = static_cast<float>(orig + d);
        return f(x);
    };
    // 4th-order central stencil; forward evaluation is float32 so the extra
    // taps buy truncation headroom at modest noise cost
    double d1 = eval(h) - eval(-h);
    double d2 = eval(2.0 * h) - eval(-2.0 * h);
    x.data[index] = orig;
    return (8.0 * d1 - d2) / (12.0 * h);
}

}  // namespace camnet
