#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gankd/config.hpp"
#include "gankd/rng.hpp"
#include "gankd/tensor.hpp"

namespace gankd::data {

// One paired label-map -> photo sample. Both stored as bytes: labels are
// class ids, photos 8-bit planar RGB, dequantized to [-1,1] on tensor load.
// Byte content depends only on (dataset seed, sample_id); generation is pure
// integer arithmetic, so files are identical across machines.
struct PairedSample {
    int sample_id = 0;
    std::vector<uint8_t> label; // H*W
    std::vector<uint8_t> photo; // 3*H*W planar
};

struct Dataset {
    DatasetSpec spec;
    std::vector<PairedSample> train, val, test;

    const std::vector<PairedSample>& split(const std::string& name) const;
};

std::array<uint8_t, 3> class_color(int cls);

// Largest per-pixel photo deviation from the class base color, in [-1,1]
// units, for each texture complexity.
double texture_amplitude_bound(Complexity c);

PairedSample generate_sample(const DatasetSpec& spec, int sample_id);
Dataset generate_dataset(const DatasetSpec& spec);

void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// --- tensor assembly ---

inline float dequant(uint8_t v) { return (static_cast<float>(v) - 127.5f) / 127.5f; }

// K channels in {-1,+1}; exactly one +1 per pixel.
Tensor<float> one_hot_encode(const std::vector<uint8_t>& label, int n_classes, int h, int w);

struct Batch {
    Tensor<float> x;                               // one-hot label maps [n,K,H,W]
    Tensor<float> y;                               // photos [n,3,H,W]
    std::vector<const std::vector<uint8_t>*> labels; // raw label maps
};

Batch make_batch(const std::vector<PairedSample>& samples, const std::vector<int>& indices, int n_classes, int hw);

// Seed-determined permutation split into full batches; the final partial
// batch is dropped so every batch has the same shape.
std::vector<std::vector<int>> epoch_batches(size_t split_size, int batch_size, uint64_t epoch_seed);

} // namespace gankd::data
