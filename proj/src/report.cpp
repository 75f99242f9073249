#include "gankd/report.hpp"

namespace gankd::report {

void write_preview(const std::string& path, const data::Dataset& ds, int n_pairs) {
    if (static_cast<size_t>(n_pairs) > ds.train.size()) n_pairs = static_cast<int>(ds.train.size());
    const int hw = ds.spec.image_size;
    std::vector<img::Rgb8> cells;
    for (int i = 0; i < n_pairs; ++i) {
        const auto& smp = ds.train[i];
        cells.push_back(img::colorize_label(smp.label, hw, hw));
        data::Batch b = data::make_batch(ds.train, {i}, ds.spec.n_classes, hw);
        cells.push_back(img::tensor_to_rgb(b.y, 0));
    }
    img::write_png(path, img::make_grid(cells, /*cols=*/2, /*margin=*/2, /*upscale=*/2));
}

img::Rgb8 comparison_grid(const data::Dataset& ds, const std::string& split, const std::vector<int>& sample_ids,
                          const GridColumns& cols, int upscale) {
    const auto& samples = ds.split(split);
    const int hw = ds.spec.image_size;
    std::vector<img::Rgb8> cells;
    for (int sid : sample_ids) {
        if (sid < 0 || static_cast<size_t>(sid) >= samples.size())
            throw DataError("sample index " + std::to_string(sid) + " outside split '" + split + "'");
        data::Batch b = data::make_batch(samples, {sid}, ds.spec.n_classes, hw);
        cells.push_back(img::colorize_label(samples[sid].label, hw, hw));
        cells.push_back(img::tensor_to_rgb(b.y, 0));
        for (const nn::UNetGenerator<float>* gen : {cols.scratch, cols.vanilla, cols.ours, cols.teacher}) {
            if (gen) {
                Tensor<float> z = gen->forward(b.x);
                cells.push_back(img::tensor_to_rgb(z, 0));
            } else {
                cells.emplace_back(hw, hw, 0);
            }
        }
    }
    return img::make_grid(cells, kGridColumns, /*margin=*/2, upscale);
}

} // namespace gankd::report
