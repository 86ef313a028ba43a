#include "camnet/pyramid.hpp"

#include "camnet/resize.hpp"

namespace camnet {

ImagePyramid build_pyramid(const Tensor& full, int K) {
    require(full.ndim() == 4, "build_pyramid: input must be 4-D");
    require(K >= 1, "build_pyramid: K must be >= 1");
    const int div = 1 << (K - 1);
    require(full.h() % div == 0 && full.w() % div == 0,
            "build_pyramid: dims " + shape_str(full.shape) + " not divisible by 2^(K-1)=" +
                std::to_string(div));
    ImagePyramid pyr;
    pyr.levels.resize(K);
    pyr.levels[K - 1] = full;
    for (int k = K - 2; k >= 0; --k) pyr.levels[k] = box_down2(pyr.levels[k + 1]);
    return pyr;
}

ImagePyramid target_pyramid(const Tensor& y, int K) { return build_pyramid(y, K); }

ImagePyramid conditioning_pyramid(const Tensor& input, int K, int base_res) {
    require(input.ndim() == 4 && input.h() == input.w(),
            "conditioning_pyramid: square 4-D input required");
    ImagePyramid pyr;
    pyr.levels.resize(K);
    for (int k = 0; k < K; ++k) pyr.levels[k] = resize_pow2(input, base_res << k);
    return pyr;
}

}  // namespace camnet
