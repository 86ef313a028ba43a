#pragma once

#include <vector>

#include "camnet/imle.hpp"
#include "camnet/tasks.hpp"

namespace camnet {

/// Dataset items expanded into cascade-ready pyramids plus the side data the
/// metrics need.
struct PreparedData {
    std::vector<TrainItem> items;
    std::vector<Tensor> inputs;   // raw conditioning images
    std::vector<Tensor> targets;  // full-resolution targets
    std::vector<Tensor> masks;
    std::vector<int> palette_index;
};

PreparedData prepare_items(const std::vector<ShapeItem>& shapes, const TaskSpec& task, int K,
                           int base_res);

/// Held-out items drawn from indices past the training set — deterministic
/// and disjoint by construction.
std::vector<ShapeItem> held_out_shapes(const ShapesSpec& spec, int count);

/// Horizontal strip per input of (conditioning | samples... | target),
/// stacked vertically; single-channel panels are replicated to RGB and
/// low-resolution panels nearest-upsampled to the target size.
Tensor sample_grid(const std::vector<Tensor>& inputs, const std::vector<std::vector<Tensor>>& rows,
                   const std::vector<Tensor>& targets);

}  // namespace camnet
