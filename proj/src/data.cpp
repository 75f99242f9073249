#include "gankd/data.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace gankd::data {

namespace fs = std::filesystem;

const std::vector<PairedSample>& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw DataError("unknown split '" + name + "'");
}

std::array<uint8_t, 3> class_color(int cls) {
    static const std::array<std::array<uint8_t, 3>, 8> base = {{
        {96, 96, 96},    // background
        {200, 64, 64},
        {64, 180, 64},
        {64, 96, 200},
        {200, 200, 64},
        {180, 64, 180},
        {64, 190, 190},
        {208, 140, 64},
    }};
    if (cls < 8) return base[cls];
    // procedurally colored extra classes, kept away from the clamp range
    const uint64_t h = mix64(0x636c617373ULL ^ static_cast<uint64_t>(cls));
    return {static_cast<uint8_t>(48 + (h & 0xff) % 161), static_cast<uint8_t>(48 + ((h >> 8) & 0xff) % 161),
            static_cast<uint8_t>(48 + ((h >> 16) & 0xff) % 161)};
}

namespace {

constexpr int kStripeAmp = 14;
constexpr int kSpeckleAmpNoisy = 10;
constexpr int kSpeckleAmpTextured = 8;
constexpr int kJitterAmp = 8;

int speckle_offset(uint64_t key, int pix, int amp) {
    const uint64_t h = mix64(key ^ (static_cast<uint64_t>(pix) * 0x9e3779b97f4a7c15ULL));
    return static_cast<int>(h % static_cast<uint64_t>(2 * amp + 1)) - amp;
}

uint8_t clamp_u8(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

// integer half-plane test rasterization
void fill_triangle(std::vector<uint8_t>& label, int s, int x0, int y0, int x1, int y1, int x2, int y2, uint8_t cls) {
    const int minx = std::max(0, std::min({x0, x1, x2}));
    const int maxx = std::min(s - 1, std::max({x0, x1, x2}));
    const int miny = std::max(0, std::min({y0, y1, y2}));
    const int maxy = std::min(s - 1, std::max({y0, y1, y2}));
    const long long area = static_cast<long long>(x1 - x0) * (y2 - y0) - static_cast<long long>(x2 - x0) * (y1 - y0);
    if (area == 0) return;
    for (int y = miny; y <= maxy; ++y) {
        for (int x = minx; x <= maxx; ++x) {
            const long long w0 = static_cast<long long>(x1 - x0) * (y - y0) - static_cast<long long>(y1 - y0) * (x - x0);
            const long long w1 = static_cast<long long>(x2 - x1) * (y - y1) - static_cast<long long>(y2 - y1) * (x - x1);
            const long long w2 = static_cast<long long>(x0 - x2) * (y - y2) - static_cast<long long>(y0 - y2) * (x - x2);
            const bool inside = area > 0 ? (w0 >= 0 && w1 >= 0 && w2 >= 0) : (w0 <= 0 && w1 <= 0 && w2 <= 0);
            if (inside) label[static_cast<size_t>(y) * s + x] = cls;
        }
    }
}

} // namespace

double texture_amplitude_bound(Complexity c) {
    switch (c) {
        case Complexity::flat: return 0.0;
        case Complexity::noisy: return kSpeckleAmpNoisy / 127.5;
        case Complexity::textured: return (kStripeAmp + kSpeckleAmpTextured + kJitterAmp) / 127.5;
    }
    return 0.0;
}

PairedSample generate_sample(const DatasetSpec& spec, int sample_id) {
    const int s = spec.image_size;
    PairedSample out;
    out.sample_id = sample_id;
    out.label.assign(static_cast<size_t>(s) * s, 0);

    Rng rng(stream_seed(spec.seed, "sample", static_cast<uint64_t>(sample_id)));
    const int n_shapes = rng.next_int(3, 8);
    for (int i = 0; i < n_shapes; ++i) {
        const uint8_t cls = spec.n_classes > 1 ? static_cast<uint8_t>(rng.next_int(1, spec.n_classes - 1)) : 0;
        if (rng.next_u64() & 1) {
            const int w = rng.next_int(s / 8, s / 2);
            const int h = rng.next_int(s / 8, s / 2);
            const int x0 = rng.next_int(0, s - 1 - w / 2);
            const int y0 = rng.next_int(0, s - 1 - h / 2);
            for (int y = y0; y < std::min(s, y0 + h); ++y)
                for (int x = x0; x < std::min(s, x0 + w); ++x) out.label[static_cast<size_t>(y) * s + x] = cls;
        } else {
            const int cx = rng.next_int(0, s - 1), cy = rng.next_int(0, s - 1);
            const int r = rng.next_int(s / 8, s / 2);
            const int x0 = cx + rng.next_int(-r, r), y0 = cy + rng.next_int(-r, r);
            const int x1 = cx + rng.next_int(-r, r), y1 = cy + rng.next_int(-r, r);
            const int x2 = cx + rng.next_int(-r, r), y2 = cy + rng.next_int(-r, r);
            fill_triangle(out.label, s, x0, y0, x1, y1, x2, y2, cls);
        }
    }

    const int jitter = spec.complexity == Complexity::textured ? rng.next_int(-kJitterAmp, kJitterAmp) : 0;
    const uint64_t speckle_key = stream_seed(spec.seed, "speckle", static_cast<uint64_t>(sample_id));

    out.photo.assign(static_cast<size_t>(3) * s * s, 0);
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            const int pix = y * s + x;
            const int cls = out.label[pix];
            const auto base = class_color(cls);
            int offset = jitter;
            if (spec.complexity == Complexity::noisy) {
                offset += speckle_offset(speckle_key, pix, kSpeckleAmpNoisy);
            } else if (spec.complexity == Complexity::textured) {
                offset += speckle_offset(speckle_key, pix, kSpeckleAmpTextured);
                const int phase = (cls % 2 == 0 ? x + y : x - y) + cls * 3;
                const int period = 3 + cls % 3;
                offset += ((phase / period) % 2 + 2) % 2 == 0 ? kStripeAmp : -kStripeAmp;
            }
            for (int ch = 0; ch < 3; ++ch)
                out.photo[static_cast<size_t>(ch) * s * s + pix] = clamp_u8(base[ch] + offset);
        }
    }
    return out;
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    int id = 0;
    auto fill = [&](std::vector<PairedSample>& split, int count) {
        split.resize(count);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < count; ++i) split[i] = generate_sample(spec, id + i);
        id += count;
    };
    fill(ds.train, spec.n_train);
    fill(ds.val, spec.n_val);
    fill(ds.test, spec.n_test);
    return ds;
}

namespace {

constexpr char kMagic[8] = {'G', 'A', 'N', 'K', 'D', 'D', 'S', '1'};

void save_split(const std::string& path, const DatasetSpec& spec, const std::string& split,
                const std::vector<PairedSample>& samples) {
    json header;
    header["spec"] = spec;
    header["split"] = split;
    header["count"] = samples.size();
    const std::string hs = header.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write dataset split " + path);
    f.write(kMagic, 8);
    uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& smp : samples) {
        int32_t sid = smp.sample_id;
        f.write(reinterpret_cast<const char*>(&sid), 4);
        f.write(reinterpret_cast<const char*>(smp.label.data()), static_cast<std::streamsize>(smp.label.size()));
        f.write(reinterpret_cast<const char*>(smp.photo.data()), static_cast<std::streamsize>(smp.photo.size()));
    }
    if (!f) throw IoError("short write on dataset split " + path);
}

std::vector<PairedSample> load_split(const std::string& path, DatasetSpec& spec_out) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open dataset split " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) throw DataError("not a dataset file: " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    if (!f || hlen > (1ull << 24)) throw DataError("corrupt dataset header in " + path);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    json header = json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw DataError("corrupt dataset header in " + path);
    spec_out = header.at("spec").get<DatasetSpec>();
    const size_t count = header.at("count").get<size_t>();
    const int s = spec_out.image_size;
    std::vector<PairedSample> samples(count);
    for (auto& smp : samples) {
        int32_t sid = 0;
        f.read(reinterpret_cast<char*>(&sid), 4);
        smp.sample_id = sid;
        smp.label.resize(static_cast<size_t>(s) * s);
        smp.photo.resize(static_cast<size_t>(3) * s * s);
        f.read(reinterpret_cast<char*>(smp.label.data()), static_cast<std::streamsize>(smp.label.size()));
        f.read(reinterpret_cast<char*>(smp.photo.data()), static_cast<std::streamsize>(smp.photo.size()));
        if (!f) throw DataError("truncated dataset split " + path);
    }
    return samples;
}

} // namespace

void save_dataset(const std::string& dir, const Dataset& ds) {
    fs::create_directories(dir);
    save_split(dir + "/train.bin", ds.spec, "train", ds.train);
    save_split(dir + "/val.bin", ds.spec, "val", ds.val);
    save_split(dir + "/test.bin", ds.spec, "test", ds.test);
}

Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    DatasetSpec s1, s2, s3;
    ds.train = load_split(dir + "/train.bin", s1);
    ds.val = load_split(dir + "/val.bin", s2);
    ds.test = load_split(dir + "/test.bin", s3);
    json j1 = s1, j2 = s2, j3 = s3;
    if (j1 != j2 || j1 != j3) throw DataError("dataset splits in " + dir + " disagree on the spec");
    ds.spec = s1;
    return ds;
}

Tensor<float> one_hot_encode(const std::vector<uint8_t>& label, int n_classes, int h, int w) {
    if (label.size() != static_cast<size_t>(h) * w) throw DataError("label map size mismatch");
    Tensor<float> out(1, n_classes, h, w);
    out.fill(-1.0f);
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < plane; ++i) {
        const int cls = label[i];
        if (cls >= n_classes) throw DataError("label id " + std::to_string(cls) + " >= n_classes");
        out.data[static_cast<size_t>(cls) * plane + i] = 1.0f;
    }
    return out;
}

Batch make_batch(const std::vector<PairedSample>& samples, const std::vector<int>& indices, int n_classes, int hw) {
    if (indices.empty()) throw DataError("empty batch");
    Batch b;
    const int n = static_cast<int>(indices.size());
    b.x = Tensor<float>(n, n_classes, hw, hw);
    b.y = Tensor<float>(n, 3, hw, hw);
    b.x.fill(-1.0f);
    b.labels.resize(n);
    const size_t plane = static_cast<size_t>(hw) * hw;
    for (int i = 0; i < n; ++i) {
        const auto& smp = samples.at(static_cast<size_t>(indices[i]));
        b.labels[i] = &smp.label;
        for (size_t p = 0; p < plane; ++p) {
            const int cls = smp.label[p];
            if (cls >= n_classes) throw DataError("label id >= n_classes in batch");
            b.x.data[(static_cast<size_t>(i) * n_classes + cls) * plane + p] = 1.0f;
        }
        for (int ch = 0; ch < 3; ++ch)
            for (size_t p = 0; p < plane; ++p)
                b.y.data[(static_cast<size_t>(i) * 3 + ch) * plane + p] = dequant(smp.photo[ch * plane + p]);
    }
    return b;
}

std::vector<std::vector<int>> epoch_batches(size_t split_size, int batch_size, uint64_t epoch_seed) {
    if (split_size == 0) throw DataError("empty split");
    if (batch_size > static_cast<int>(split_size)) throw DataError("batch_size exceeds split size");
    std::vector<int> order(split_size);
    for (size_t i = 0; i < split_size; ++i) order[i] = static_cast<int>(i);
    Rng rng(epoch_seed);
    shuffle_indices(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> batches;
    for (size_t i = 0; i + batch_size <= split_size; i += batch_size)
        batches.emplace_back(order.begin() + i, order.begin() + i + batch_size);
    return batches;
}

} // namespace gankd::data
