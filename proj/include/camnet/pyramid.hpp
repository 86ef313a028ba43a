#pragma once

#include <vector>

#include "camnet/tensor.hpp"

namespace camnet {

/// Multi-resolution image stack. Level k lives at base_res * 2^k; the top
/// level is the full-resolution image and every lower level is its exact
/// box_down2.
struct ImagePyramid {
    std::vector<Tensor> levels;

    int depth() const { return static_cast<int>(levels.size()); }
};

/// Downsample `full` K-1 times by box filtering. levels[K-1] == full.
ImagePyramid build_pyramid(const Tensor& full, int K);

/// Supervision targets share the construction of build_pyramid.
ImagePyramid target_pyramid(const Tensor& y, int K);

/// Per-module conditioning inputs: the input image resized to every cascade
/// resolution (box-filtered downward, nearest-duplicated upward, so a
/// low-resolution input reaches modules above its native scale unchanged in
/// content).
ImagePyramid conditioning_pyramid(const Tensor& input, int K, int base_res);

}  // namespace camnet
