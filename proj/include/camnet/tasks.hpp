#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "camnet/tensor.hpp"

namespace camnet {

enum class ShapeKind { circle, square, triangle };

std::string shape_kind_name(ShapeKind k);
ShapeKind shape_kind_from_name(const std::string& s);

/// Synthetic colored-shapes dataset: one anti-aliased shape per image on a
/// gray-0.5 background, colored uniformly from an iso-luminant palette so
/// the grayscale view never reveals the color.
struct ShapesSpec {
    int image_size = 32;
    int count = 3000;
    uint64_t seed = 0;
};

struct ShapeItem {
    Tensor image;       // {1,3,S,S}
    Tensor mask;        // {1,1,S,S}, 1 inside the shape
    int palette_index;  // ground-truth color mode
    ShapeKind kind;
};

/// Three colors of equal luminance (L = 0.299 R + 0.587 G + 0.114 B = 0.5
/// within 1e-3): gray plus chroma vectors orthogonal to the luminance axis
/// at angles 0, 2pi/3, 4pi/3.
std::vector<std::array<float, 3>> iso_luminant_palette();

/// Deterministic per (spec.seed, index).
ShapeItem gen_shape(const ShapesSpec& spec, int index);
std::vector<ShapeItem> gen_shapes(const ShapesSpec& spec);

/// Conditional-synthesis task family.
struct TaskSpec {
    enum class Kind { super_resolution, colourization, decompression };
    Kind kind = Kind::colourization;
    int factor = 4;    // super_resolution: power-of-2 downscale
    int quality = 10;  // decompression: 1..100

    void validate() const;
};

TaskSpec::Kind task_kind_from_name(const std::string& s);
std::string task_kind_name(TaskSpec::Kind k);

/// Derive the conditioning input for a target image: bicubic downscale,
/// luminance channel, or codec round trip. The target is returned unchanged.
std::pair<Tensor, Tensor> make_pair(const TaskSpec& task, const Tensor& target);

/// Simplified per-channel JPEG-style codec: 8x8 orthonormal DCT on
/// 255-scaled values, quantization by the standard luminance table scaled by
/// quality (each divisor clamped >= 1, rounding half away from zero),
/// dequantization, inverse DCT, clamp to [0,1]. Quality 100 (scale 0) is
/// lossless: coefficients pass through unquantized.
Tensor dct_codec(const Tensor& image, int quality);

/// Forward + inverse 8x8 DCT with no quantization — reconstruction check for
/// the orthonormal basis.
Tensor dct_roundtrip(const Tensor& image);

/// On-disk dataset: PNG images and masks plus manifest.json.
void save_dataset(const std::string& dir, const ShapesSpec& spec,
                  const std::vector<ShapeItem>& items);

struct Dataset {
    ShapesSpec spec;
    std::vector<ShapeItem> items;
};

Dataset load_dataset(const std::string& dir);

}  // namespace camnet
