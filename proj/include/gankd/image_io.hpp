#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gankd/tensor.hpp"

namespace gankd::img {

// Interleaved 8-bit RGB raster.
struct Rgb8 {
    int w = 0, h = 0;
    std::vector<uint8_t> pix; // 3*w*h, row-major RGB

    Rgb8() = default;
    Rgb8(int w_, int h_, uint8_t fill = 0) : w(w_), h(h_), pix(static_cast<size_t>(3) * w_ * h_, fill) {}
    uint8_t* at(int x, int y) { return &pix[(static_cast<size_t>(y) * w + x) * 3]; }
};

// Deterministic PNG output (fixed compression settings, no ancillary chunks).
void write_png(const std::string& path, const Rgb8& image);

// [-1,1] planar tensor sample -> interleaved RGB, rounding to 8 bits.
Rgb8 tensor_to_rgb(const Tensor<float>& batch, int index);

Rgb8 colorize_label(const std::vector<uint8_t>& label, int h, int w);

// Grid of equally sized cells with a margin between them.
Rgb8 make_grid(const std::vector<Rgb8>& cells, int cols, int margin = 2, int upscale = 1);

} // namespace gankd::img
