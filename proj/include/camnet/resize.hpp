#pragma once

#include "camnet/tensor.hpp"

namespace camnet {

// Forward-only (non-tape) resizers on NCHW tensors. The differentiable
// nearest_up2/box_down2 pair lives on the Tape; bicubic is dataset-prep only.
Tensor nearest_up2(const Tensor& x);
Tensor box_down2(const Tensor& x);

/// Catmull-Rom (a = -0.5) separable resize, edge-clamped.
Tensor bicubic_to(const Tensor& x, int out_h, int out_w);

/// Repeated box_down2 / nearest_up2 until the spatial size reaches `res`
/// (square images, power-of-two ratio required).
Tensor resize_pow2(const Tensor& x, int res);

}  // namespace camnet
