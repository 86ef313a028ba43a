#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace camnet {

/// Error for any shape/contract violation surfaced to callers.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense N-dimensional float32 array, row-major. Images are NCHW.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    }
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<size_t>(numel_of(shape)) != data.size())
            throw ShapeError("Tensor: data length does not match shape");
    }

    static long long numel_of(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("Tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    long long numel() const { return static_cast<long long>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }

    // NCHW accessors; valid only for 4-D tensors.
    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int h() const { return shape[2]; }
    int w() const { return shape[3]; }

    float& at4(int n_, int c_, int h_, int w_) {
        return data[((static_cast<size_t>(n_) * shape[1] + c_) * shape[2] + h_) * shape[3] + w_];
    }
    float at4(int n_, int c_, int h_, int w_) const {
        return data[((static_cast<size_t>(n_) * shape[1] + c_) * shape[2] + h_) * shape[3] + w_];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace camnet
