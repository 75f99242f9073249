#pragma once

#include <cmath>
#include <string>

#include "gankd/kernels.hpp"
#include "gankd/rng.hpp"
#include "gankd/tensor.hpp"

namespace gankd::nn {

constexpr double kInitStd = 0.02;      // zero-mean normal, pix2pix convention
constexpr double kNormEps = 1e-5;
constexpr double kLeakySlope = 0.2;
constexpr double kDropoutKeep = 0.5;

// Fills a parameter tensor from a stateless stream keyed by (seed, name), so
// init order and thread count cannot change the result.
template <typename T>
void init_normal(Tensor<T>& p, uint64_t seed, const std::string& name, double stddev = kInitStd) {
    const uint64_t key = stream_seed(seed, name);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(p.numel()); ++i)
        p.data[i] = static_cast<T>(normal_at(key, static_cast<uint64_t>(i), static_cast<float>(stddev)));
}

template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 4, stride = 2, pad = 1;
    Tensor<T> w, b;    // w: [out,in,k,k], b: [out,1,1,1]
    Tensor<T> gw, gb;

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k_, int stride_, int pad_)
        : in_ch(in_c), out_ch(out_c), k(k_), stride(stride_), pad(pad_), w(out_c, in_c, k_, k_), b(out_c, 1, 1, 1) {}

    void init(uint64_t seed, const std::string& name) {
        init_normal(w, seed, name + ".w");
        b.zero();
    }

    kern::ConvGeom geom(const Tensor<T>& x) const {
        if (x.c() != in_ch)
            throw ShapeError("conv expects " + std::to_string(in_ch) + " input channels, got " + std::to_string(x.c()));
        return kern::conv_geom(x.n(), in_ch, x.h(), x.w(), out_ch, k, k, stride, pad);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto g = geom(x);
        Tensor<T> y(g.n, g.co, g.oh, g.ow);
        kern::conv2d_forward(x.data.data(), w.data.data(), b.data.data(), y.data.data(), g);
        return y;
    }

    // Returns grad wrt input; accumulates parameter grads when accum is set.
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy, bool accum) {
        auto g = geom(x);
        if (accum) {
            ensure_grads();
            kern::conv2d_backward_params(gy.data.data(), x.data.data(), gw.data.data(), gb.data.data(), g);
        }
        Tensor<T> gx = Tensor<T>::zeros_like(x);
        kern::conv2d_backward_input(gy.data.data(), w.data.data(), gx.data.data(), g);
        return gx;
    }

    void ensure_grads() {
        if (gw.numel() != w.numel()) gw = Tensor<T>::zeros_like(w);
        if (gb.numel() != b.numel()) gb = Tensor<T>::zeros_like(b);
    }
    void zero_grads() {
        ensure_grads();
        gw.zero();
        gb.zero();
    }
    size_t param_count() const { return w.numel() + b.numel(); }
};

template <typename T>
struct ConvTranspose2d {
    int in_ch = 0, out_ch = 0, k = 4, stride = 2, pad = 1;
    Tensor<T> w, b;    // w: [in,out,k,k]
    Tensor<T> gw, gb;

    ConvTranspose2d() = default;
    ConvTranspose2d(int in_c, int out_c, int k_, int stride_, int pad_)
        : in_ch(in_c), out_ch(out_c), k(k_), stride(stride_), pad(pad_), w(in_c, out_c, k_, k_), b(out_c, 1, 1, 1) {}

    void init(uint64_t seed, const std::string& name) {
        init_normal(w, seed, name + ".w");
        b.zero();
    }

    kern::ConvGeom geom(const Tensor<T>& x) const {
        if (x.c() != in_ch)
            throw ShapeError("conv_transpose expects " + std::to_string(in_ch) + " input channels, got " +
                             std::to_string(x.c()));
        return kern::convt_geom(x.n(), in_ch, x.h(), x.w(), out_ch, k, k, stride, pad);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto g = geom(x);
        Tensor<T> y(g.n, g.co, g.oh, g.ow);
        kern::convt2d_forward(x.data.data(), w.data.data(), b.data.data(), y.data.data(), g);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy, bool accum) {
        auto g = geom(x);
        if (accum) {
            ensure_grads();
            kern::convt2d_backward_params(gy.data.data(), x.data.data(), gw.data.data(), gb.data.data(), g);
        }
        Tensor<T> gx = Tensor<T>::zeros_like(x);
        kern::convt2d_backward_input(gy.data.data(), w.data.data(), gx.data.data(), g);
        return gx;
    }

    void ensure_grads() {
        if (gw.numel() != w.numel()) gw = Tensor<T>::zeros_like(w);
        if (gb.numel() != b.numel()) gb = Tensor<T>::zeros_like(b);
    }
    void zero_grads() {
        ensure_grads();
        gw.zero();
        gb.zero();
    }
    size_t param_count() const { return w.numel() + b.numel(); }
};

// Instance normalization without affine parameters or tracked statistics:
// identical in train and eval mode. Backward recomputes the per-(n,c) stats.
template <typename T>
struct InstanceNorm {
    static Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> y = Tensor<T>::zeros_like(x);
        const int planes = x.n() * x.c();
        const size_t m = static_cast<size_t>(x.h()) * x.w();
#pragma omp parallel for schedule(static)
        for (int p = 0; p < planes; ++p) {
            const T* xp = x.data.data() + static_cast<size_t>(p) * m;
            T* yp = y.data.data() + static_cast<size_t>(p) * m;
            T mean = T(0);
            for (size_t i = 0; i < m; ++i) mean += xp[i];
            mean /= static_cast<T>(m);
            T var = T(0);
            for (size_t i = 0; i < m; ++i) {
                const T d = xp[i] - mean;
                var += d * d;
            }
            var /= static_cast<T>(m);
            const T inv = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
            for (size_t i = 0; i < m; ++i) yp[i] = (xp[i] - mean) * inv;
        }
        return y;
    }

    static Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy) {
        Tensor<T> gx = Tensor<T>::zeros_like(x);
        const int planes = x.n() * x.c();
        const size_t m = static_cast<size_t>(x.h()) * x.w();
#pragma omp parallel for schedule(static)
        for (int p = 0; p < planes; ++p) {
            const T* xp = x.data.data() + static_cast<size_t>(p) * m;
            const T* gp = gy.data.data() + static_cast<size_t>(p) * m;
            T* op = gx.data.data() + static_cast<size_t>(p) * m;
            T mean = T(0);
            for (size_t i = 0; i < m; ++i) mean += xp[i];
            mean /= static_cast<T>(m);
            T var = T(0);
            for (size_t i = 0; i < m; ++i) {
                const T d = xp[i] - mean;
                var += d * d;
            }
            var /= static_cast<T>(m);
            const T inv = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
            T gsum = T(0), gxhat = T(0);
            for (size_t i = 0; i < m; ++i) {
                const T xhat = (xp[i] - mean) * inv;
                gsum += gp[i];
                gxhat += gp[i] * xhat;
            }
            const T inv_m = T(1) / static_cast<T>(m);
            for (size_t i = 0; i < m; ++i) {
                const T xhat = (xp[i] - mean) * inv;
                op[i] = inv * (gp[i] - gsum * inv_m - xhat * gxhat * inv_m);
            }
        }
        return gx;
    }
};

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = static_cast<T>(kLeakySlope)) {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    for (size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : slope * x.data[i];
    return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& gy, T slope = static_cast<T>(kLeakySlope)) {
    Tensor<T> gx = Tensor<T>::zeros_like(x);
    for (size_t i = 0; i < x.numel(); ++i) gx.data[i] = x.data[i] > T(0) ? gy.data[i] : slope * gy.data[i];
    return gx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return leaky_relu(x, T(0));
}
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    return leaky_relu_backward(x, gy, T(0));
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    for (size_t i = 0; i < x.numel(); ++i) y.data[i] = std::tanh(x.data[i]);
    return y;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx = Tensor<T>::zeros_like(x);
    for (size_t i = 0; i < x.numel(); ++i) {
        const T t = std::tanh(x.data[i]);
        gx.data[i] = gy.data[i] * (T(1) - t * t);
    }
    return gx;
}

// Inverted dropout; the mask is drawn serially from the given stream so the
// draw count is independent of threading.
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, Rng& rng, Tensor<T>& mask_out, double keep = kDropoutKeep) {
    mask_out = Tensor<T>::zeros_like(x);
    Tensor<T> y = Tensor<T>::zeros_like(x);
    const T scale = static_cast<T>(1.0 / keep);
    for (size_t i = 0; i < x.numel(); ++i) {
        const T m = rng.next_double() < keep ? scale : T(0);
        mask_out.data[i] = m;
        y.data[i] = x.data[i] * m;
    }
    return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& mask, const Tensor<T>& gy) {
    Tensor<T> gx = Tensor<T>::zeros_like(gy);
    for (size_t i = 0; i < gy.numel(); ++i) gx.data[i] = gy.data[i] * mask.data[i];
    return gx;
}

} // namespace gankd::nn
