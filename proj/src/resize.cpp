#include "camnet/resize.hpp"

#include <algorithm>
#include <cmath>

namespace camnet {

Tensor nearest_up2(const Tensor& x) {
    require(x.ndim() == 4, "nearest_up2: input must be 4-D");
    Tensor out({x.n(), x.c(), 2 * x.h(), 2 * x.w()});
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) {
                    float v = x.at4(n, c, h, w);
                    out.at4(n, c, 2 * h, 2 * w) = v;
                    out.at4(n, c, 2 * h, 2 * w + 1) = v;
                    out.at4(n, c, 2 * h + 1, 2 * w) = v;
                    out.at4(n, c, 2 * h + 1, 2 * w + 1) = v;
                }
    return out;
}

Tensor box_down2(const Tensor& x) {
    require(x.ndim() == 4, "box_down2: input must be 4-D");
    require(x.h() % 2 == 0 && x.w() % 2 == 0,
            "box_down2: spatial dims must be even, got " + shape_str(x.shape));
    Tensor out({x.n(), x.c(), x.h() / 2, x.w() / 2});
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < out.h(); ++h)
                for (int w = 0; w < out.w(); ++w)
                    out.at4(n, c, h, w) =
                        0.25f * (x.at4(n, c, 2 * h, 2 * w) + x.at4(n, c, 2 * h, 2 * w + 1) +
                                 x.at4(n, c, 2 * h + 1, 2 * w) + x.at4(n, c, 2 * h + 1, 2 * w + 1));
    return out;
}

namespace {

// Catmull-Rom kernel, a = -0.5.
double cubic(double t) {
    t = std::fabs(t);
    if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

struct TapWeights {
    int base;
    double w[4];
};

std::vector<TapWeights> cubic_taps(int in, int out) {
    std::vector<TapWeights> taps(out);
    const double scale = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        double s = (i + 0.5) * scale - 0.5;
        int i0 = static_cast<int>(std::floor(s)) - 1;
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
            taps[i].w[k] = cubic(s - (i0 + k));
            sum += taps[i].w[k];
        }
        for (int k = 0; k < 4; ++k) taps[i].w[k] /= sum;
        taps[i].base = i0;
    }
    return taps;
}

}  // namespace

Tensor bicubic_to(const Tensor& x, int out_h, int out_w) {
    require(x.ndim() == 4, "bicubic_to: input must be 4-D");
    require(out_h >= 1 && out_w >= 1, "bicubic_to: output dims must be positive");
    const int H = x.h(), W = x.w();
    auto th = cubic_taps(H, out_h);
    auto tw = cubic_taps(W, out_w);
    Tensor out({x.n(), x.c(), out_h, out_w});
    std::vector<double> row(W);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int oh = 0; oh < out_h; ++oh) {
                // vertical pass for this output row, then horizontal taps
                for (int w = 0; w < W; ++w) {
                    double acc = 0.0;
                    for (int k = 0; k < 4; ++k) {
                        int ih = std::clamp(th[oh].base + k, 0, H - 1);
                        acc += th[oh].w[k] * x.at4(n, c, ih, w);
                    }
                    row[w] = acc;
                }
                for (int ow = 0; ow < out_w; ++ow) {
                    double acc = 0.0;
                    for (int k = 0; k < 4; ++k) {
                        int iw = std::clamp(tw[ow].base + k, 0, W - 1);
                        acc += tw[ow].w[k] * row[iw];
                    }
                    out.at4(n, c, oh, ow) = static_cast<float>(acc);
                }
            }
    return out;
}

Tensor resize_pow2(const Tensor& x, int res) {
    require(x.ndim() == 4 && x.h() == x.w(), "resize_pow2: square 4-D input required");
    Tensor t = x;
    while (t.h() > res) t = box_down2(t);
    while (t.h() < res) t = nearest_up2(t);
    require(t.h() == res, "resize_pow2: size " + std::to_string(x.h()) +
                              " not reachable from " + std::to_string(res) + " by powers of 2");
    return t;
}

}  // namespace camnet
