#include "camnet/pipeline.hpp"

#include "camnet/resize.hpp"

namespace camnet {

PreparedData prepare_items(const std::vector<ShapeItem>& shapes, const TaskSpec& task, int K,
                           int base_res) {
    PreparedData out;
    for (const ShapeItem& s : shapes) {
        auto [input, target] = make_pair(task, s.image);
        out.items.push_back(
            {conditioning_pyramid(input, K, base_res), target_pyramid(target, K)});
        out.inputs.push_back(std::move(input));
        out.targets.push_back(target);
        out.masks.push_back(s.mask);
        out.palette_index.push_back(s.palette_index);
    }
    return out;
}

std::vector<ShapeItem> held_out_shapes(const ShapesSpec& spec, int count) {
    std::vector<ShapeItem> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(gen_shape(spec, spec.count + i));
    return out;
}

namespace {

/// Panel normalization: RGB at the reference resolution.
Tensor to_panel(const Tensor& img, int res) {
    Tensor t = img;
    while (t.h() < res) t = nearest_up2(t);
    require(t.h() == res && t.w() == res, "sample_grid: panel resolution " +
                                              shape_str(img.shape) +
                                              " does not reach the target by doubling");
    if (t.c() == 3) return t;
    require(t.c() == 1, "sample_grid: panels must be gray or RGB");
    Tensor rgb({1, 3, res, res});
    for (int c = 0; c < 3; ++c)
        std::copy_n(t.data.data(), t.data.size(), rgb.data.data() + c * t.data.size());
    return rgb;
}

}  // namespace

Tensor sample_grid(const std::vector<Tensor>& inputs, const std::vector<std::vector<Tensor>>& rows,
                   const std::vector<Tensor>& targets) {
    require(!inputs.empty() && inputs.size() == rows.size() && rows.size() == targets.size(),
            "sample_grid: inputs/samples/targets must align");
    const int res = targets[0].h();
    const int cols = 2 + static_cast<int>(rows[0].size());
    const int n = static_cast<int>(inputs.size());
    const int pad = 2;
    Tensor grid({1, 3, n * (res + pad) - pad, cols * (res + pad) - pad});
    grid.fill(1.0f);
    auto blit = [&](const Tensor& panel, int row, int col) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x)
                    grid.at4(0, c, row * (res + pad) + y, col * (res + pad) + x) =
                        std::min(1.0f, std::max(0.0f, panel.at4(0, c, y, x)));
    };
    for (int i = 0; i < n; ++i) {
        require(rows[i].size() == rows[0].size(), "sample_grid: ragged sample rows");
        blit(to_panel(inputs[i], res), i, 0);
        for (size_t j = 0; j < rows[i].size(); ++j)
            blit(to_panel(rows[i][j], res), i, 1 + static_cast<int>(j));
        blit(to_panel(targets[i], res), i, cols - 1);
    }
    return grid;
}

}  // namespace camnet
