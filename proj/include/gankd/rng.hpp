#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace gankd {

// splitmix64: the standard 64-bit mixer. Used both as a stream generator and
// as a stateless per-index hash so parameter init and data noise can be
// evaluated in any order (and in parallel) with identical results.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t x) {
    uint64_t s = x;
    return splitmix64(s);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2) + mix64(b)));
}

// FNV-1a over a string, for deriving named substreams.
inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t stream_seed(uint64_t seed, std::string_view name, uint64_t index = 0) {
    return hash_combine(hash_combine(seed, fnv1a(name)), index);
}

// Small counter RNG. Fully specified here, so sequences are identical across
// platforms and trivially serializable (one word).
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(mix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

    uint64_t next_u64() { return splitmix64(state_); }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // [0, n), unbiased enough for experiment plumbing (n << 2^64).
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    int next_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi_inclusive - lo + 1)));
    }

    // [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller, one output per call.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

// Stateless normal draw for parameter init: value depends only on (key, index).
inline float normal_at(uint64_t key, uint64_t index, float stddev) {
    uint64_t s = hash_combine(key, index);
    uint64_t a = splitmix64(s);
    uint64_t b = splitmix64(s);
    double u1 = static_cast<double>(a >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    if (u1 < 1e-300) u1 = 1e-300;
    double n = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return static_cast<float>(n * stddev);
}

template <typename It>
void shuffle_indices(It first, It last, Rng& rng) {
    auto n = static_cast<uint64_t>(last - first);
    for (uint64_t i = n; i > 1; --i) {
        uint64_t j = rng.next_below(i);
        std::swap(first[i - 1], first[j]);
    }
}

} // namespace gankd
