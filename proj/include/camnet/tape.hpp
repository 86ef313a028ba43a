#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "camnet/param.hpp"
#include "camnet/tensor.hpp"

namespace camnet {

struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backward;
    bool requires_grad = false;
};

/**
 * Reverse-mode tape over exactly the op set the cascade and the distance
 * network need. Nodes are activations; parameters are captured by the ops
 * that consume them and receive their gradients directly.
 *
 * With recording disabled the tape is a plain forward evaluator (used for
 * candidate selection, where no gradients are needed).
 */
class Tape {
public:
    explicit Tape(bool record = true) : record_(record) {}

    bool recording() const { return record_; }

    Node* leaf(Tensor v, bool requires_grad = false);

    Node* conv2d(Node* x, Param& w, Param& b, int stride, int pad, bool train_params = true);
    Node* dense(Node* x, Param& w, Param& b, bool train_params = true);
    Node* leaky_relu(Node* x, float slope);
    Node* nearest_up2(Node* x);
    Node* box_down2(Node* x);
    Node* concat_channels(const std::vector<Node*>& xs);
    Node* add(Node* x, Node* y);
    Node* axpy(Node* x, float beta, Node* y);          // x + beta * y
    Node* sub(Node* x, Node* y);
    Node* add_scalar(Node* x, float s);
    Node* scale(Node* x, float s);
    Node* slice_cols(Node* x, int c0, int c1);         // 2-D N x F
    Node* channel_affine(Node* x, Node* gamma, Node* delta);  // gamma, delta: N x C
    Node* clamp01(Node* x);

    // Distance building blocks. Per-sample reductions yield shape {N}.
    Node* channel_unit_norm(Node* x);
    Node* per_sample_sum_sq(Node* x, float scale);
    Node* per_sample_mean_abs(Node* x);
    Node* mean_all(Node* x);                           // {N} (or any) -> {1}
    Node* inner(Node* x, Tensor weights);              // sum(x * weights) -> {1}

    /// Seeds d(root)/d(root) = 1 and runs the tape in reverse. Weight-norm
    /// parameter gradients are folded into (v, g) at the end.
    void backward(Node* root);

private:
    Node* make(Tensor v, bool rg);
    void touch(Param& p);

    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<Param*> touched_;
    bool record_;
};

/// Central-difference check helper shared by tests: numeric d(loss)/d(x[i]).
double finite_difference(const std::function<double(const Tensor&)>& f, Tensor x,
                         size_t index, double h = 1e-3);

}  // namespace camnet
