#pragma once

#include <string>
#include <vector>

#include "gankd/data.hpp"
#include "gankd/image_io.hpp"
#include "gankd/unet.hpp"

namespace gankd::report {

// Contact sheet of (colorized label, photo) pairs from the train split.
void write_preview(const std::string& path, const data::Dataset& ds, int n_pairs = 8);

// Qualitative grid with fixed column order:
// Input | Ground truth | Scratch | Vanilla-KD | Ours | Teacher.
// Generators may be null; their cells render black.
struct GridColumns {
    const nn::UNetGenerator<float>* scratch = nullptr;
    const nn::UNetGenerator<float>* vanilla = nullptr;
    const nn::UNetGenerator<float>* ours = nullptr;
    const nn::UNetGenerator<float>* teacher = nullptr;
};

constexpr int kGridColumns = 6;

img::Rgb8 comparison_grid(const data::Dataset& ds, const std::string& split, const std::vector<int>& sample_ids,
                          const GridColumns& cols, int upscale = 2);

} // namespace gankd::report
