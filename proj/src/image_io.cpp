#include "gankd/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <png.h>

#include "gankd/data.hpp"
#include "gankd/errors.hpp"

namespace gankd::img {

void write_png(const std::string& path, const Rgb8& image) {
    if (image.w <= 0 || image.h <= 0) throw ShapeError("write_png: empty image");
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng write failed for " + path);
    }
    png_init_io(png, fp);
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.w), static_cast<png_uint_32>(image.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(image.h);
    for (int y = 0; y < image.h; ++y)
        rows[y] = const_cast<png_bytep>(&image.pix[static_cast<size_t>(y) * image.w * 3]);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

Rgb8 tensor_to_rgb(const Tensor<float>& batch, int index) {
    if (batch.c() != 3) throw ShapeError("tensor_to_rgb expects 3 channels");
    Rgb8 out(batch.w(), batch.h());
    const size_t plane = static_cast<size_t>(batch.h()) * batch.w();
    for (int y = 0; y < batch.h(); ++y) {
        for (int x = 0; x < batch.w(); ++x) {
            const size_t p = static_cast<size_t>(y) * batch.w() + x;
            for (int ch = 0; ch < 3; ++ch) {
                const float v = batch.data[(static_cast<size_t>(index) * 3 + ch) * plane + p];
                const int q = static_cast<int>(std::lround((static_cast<double>(v) + 1.0) * 127.5));
                out.at(x, y)[ch] = static_cast<uint8_t>(std::clamp(q, 0, 255));
            }
        }
    }
    return out;
}

Rgb8 colorize_label(const std::vector<uint8_t>& label, int h, int w) {
    Rgb8 out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto c = data::class_color(label[static_cast<size_t>(y) * w + x]);
            uint8_t* px = out.at(x, y);
            px[0] = c[0];
            px[1] = c[1];
            px[2] = c[2];
        }
    }
    return out;
}

Rgb8 make_grid(const std::vector<Rgb8>& cells, int cols, int margin, int upscale) {
    if (cells.empty() || cols < 1) throw ShapeError("make_grid: no cells");
    const int cw = cells.front().w, ch = cells.front().h;
    for (const auto& c : cells)
        if (c.w != cw || c.h != ch) throw ShapeError("make_grid: cells differ in size");
    const int rows = (static_cast<int>(cells.size()) + cols - 1) / cols;
    const int cw_s = cw * upscale, ch_s = ch * upscale;
    Rgb8 out(cols * cw_s + (cols + 1) * margin, rows * ch_s + (rows + 1) * margin, 255);
    for (size_t i = 0; i < cells.size(); ++i) {
        const int gx = static_cast<int>(i) % cols, gy = static_cast<int>(i) / cols;
        const int x0 = margin + gx * (cw_s + margin), y0 = margin + gy * (ch_s + margin);
        for (int y = 0; y < ch_s; ++y)
            for (int x = 0; x < cw_s; ++x) {
                const uint8_t* src = cells[i].pix.data() + ((static_cast<size_t>(y / upscale) * cw) + x / upscale) * 3;
                uint8_t* dst = out.at(x0 + x, y0 + y);
                dst[0] = src[0];
                dst[1] = src[1];
                dst[2] = src[2];
            }
    }
    return out;
}

} // namespace gankd::img
