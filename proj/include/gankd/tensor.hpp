#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "gankd/errors.hpp"

namespace gankd {

// Dense NCHW tensor. Parameters reuse the same container: conv weights are
// [out,in,kh,kw], biases [n,1,1,1].
template <typename T>
struct Tensor {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n, int c, int h, int w) : shape{n, c, h, w}, data(static_cast<size_t>(n) * c * h * w, T(0)) {}

    static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }
    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape[0], o.shape[1], o.shape[2], o.shape[3]); }
    static Tensor full(int n, int c, int h, int w, T v) {
        Tensor t(n, c, h, w);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int h() const { return shape[2]; }
    int w() const { return shape[3]; }
    size_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }

    T& at(int n_, int c_, int y_, int x_) {
        return data[((static_cast<size_t>(n_) * shape[1] + c_) * shape[2] + y_) * shape[3] + x_];
    }
    const T& at(int n_, int c_, int y_, int x_) const {
        return data[((static_cast<size_t>(n_) * shape[1] + c_) * shape[2] + y_) * shape[3] + x_];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        return "[" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) + "," + std::to_string(shape[2]) +
               "," + std::to_string(shape[3]) + "]";
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(T(0)); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Concatenate along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
        throw ShapeError("concat_channels: incompatible shapes " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
    const size_t plane = static_cast<size_t>(a.h()) * a.w();
    for (int n = 0; n < a.n(); ++n) {
        std::memcpy(&out.data[(static_cast<size_t>(n) * out.c()) * plane], &a.data[(static_cast<size_t>(n) * a.c()) * plane],
                    sizeof(T) * a.c() * plane);
        std::memcpy(&out.data[(static_cast<size_t>(n) * out.c() + a.c()) * plane],
                    &b.data[(static_cast<size_t>(n) * b.c()) * plane], sizeof(T) * b.c() * plane);
    }
    return out;
}

// Slice channels [c0, c1) into a new tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int c1) {
    if (c0 < 0 || c1 > x.c() || c0 >= c1) throw ShapeError("slice_channels: bad range");
    Tensor<T> out(x.n(), c1 - c0, x.h(), x.w());
    const size_t plane = static_cast<size_t>(x.h()) * x.w();
    for (int n = 0; n < x.n(); ++n)
        std::memcpy(&out.data[(static_cast<size_t>(n) * out.c()) * plane],
                    &x.data[(static_cast<size_t>(n) * x.c() + c0) * plane], sizeof(T) * out.c() * plane);
    return out;
}

template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
    require_same_shape(x, y, "axpy");
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
    for (T v : x.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape && std::memcmp(a.data.data(), b.data.data(), sizeof(T) * a.data.size()) == 0;
}

} // namespace gankd
