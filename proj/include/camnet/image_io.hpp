#pragma once

#include <stdexcept>
#include <string>

#include "camnet/tensor.hpp"

namespace camnet {

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Write an image tensor ({1,C,H,W}, values in [0,1], C in {1,3,4}) as an
/// 8-bit PNG. Values are clamped and rounded to the nearest level.
void write_png(const std::string& path, const Tensor& img);

/// Read an 8-bit PNG (gray, RGB, or RGBA; any scanline filter) back into a
/// {1,C,H,W} tensor scaled to [0,1].
Tensor read_png(const std::string& path);

}  // namespace camnet
