#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "gankd/errors.hpp"

namespace gankd::kern {

// Geometry shared by conv2d and conv_transpose2d kernels.
// conv2d:  x[n,ci,h,w] * w[co,ci,kh,kw] -> y[n,co,oh,ow]
// convt2d: x[n,ci,h,w] * w[ci,co,kh,kw] -> y[n,co,oh,ow]
struct ConvGeom {
    int n = 0, ci = 0, h = 0, w = 0;
    int co = 0, kh = 0, kw = 0;
    int stride = 1, pad = 0;
    int oh = 0, ow = 0;
};

inline ConvGeom conv_geom(int n, int ci, int h, int w, int co, int kh, int kw, int stride, int pad) {
    ConvGeom g{n, ci, h, w, co, kh, kw, stride, pad};
    g.oh = (h + 2 * pad - kh) / stride + 1;
    g.ow = (w + 2 * pad - kw) / stride + 1;
    if (g.oh <= 0 || g.ow <= 0)
        throw ShapeError("conv output would be empty for input " + std::to_string(h) + "x" + std::to_string(w));
    return g;
}

inline ConvGeom convt_geom(int n, int ci, int h, int w, int co, int kh, int kw, int stride, int pad) {
    ConvGeom g{n, ci, h, w, co, kh, kw, stride, pad};
    g.oh = (h - 1) * stride - 2 * pad + kh;
    g.ow = (w - 1) * stride - 2 * pad + kw;
    if (g.oh <= 0 || g.ow <= 0) throw ShapeError("conv_transpose output would be empty");
    return g;
}

// conv as seen from the transposed op's output side; convt kernels reuse the
// conv primitives through this swap (same weight memory layout).
inline ConvGeom convt_as_conv(const ConvGeom& g) {
    ConvGeom c{g.n, g.co, g.oh, g.ow, g.ci, g.kh, g.kw, g.stride, g.pad};
    c.oh = g.h;
    c.ow = g.w;
    return c;
}

inline long long conv_macs(const ConvGeom& g) {
    return 1LL * g.n * g.co * g.oh * g.ow * g.ci * g.kh * g.kw;
}
inline long long convt_macs(const ConvGeom& g) {
    return 1LL * g.n * g.ci * g.h * g.w * g.co * g.kh * g.kw;
}

enum class Backend { serial, omp };

// Process-wide kernel backend. Both run the same blocked GEMM engine, and
// every accumulation runs in the same per-element order, so results are
// bitwise identical and independent of the thread count.
inline Backend& backend() {
    static Backend b = Backend::omp;
    return b;
}

// =====================================================================
// naive reference kernels: straight per-output-element loops, kept as the
// independent oracle the unit tests compare the blocked engine against.
// =====================================================================
namespace naive {

template <typename T>
void conv2d_forward(const T* x, const T* wgt, const T* b, T* y, const ConvGeom& g) {
    for (int n = 0; n < g.n; ++n)
        for (int co = 0; co < g.co; ++co)
            for (int oy = 0; oy < g.oh; ++oy)
                for (int ox = 0; ox < g.ow; ++ox) {
                    T acc = b ? b[co] : T(0);
                    for (int ci = 0; ci < g.ci; ++ci)
                        for (int ky = 0; ky < g.kh; ++ky)
                            for (int kx = 0; kx < g.kw; ++kx) {
                                const int iy = oy * g.stride + ky - g.pad;
                                const int ix = ox * g.stride + kx - g.pad;
                                if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
                                acc += x[((static_cast<size_t>(n) * g.ci + ci) * g.h + iy) * g.w + ix] *
                                       wgt[((static_cast<size_t>(co) * g.ci + ci) * g.kh + ky) * g.kw + kx];
                            }
                    y[((static_cast<size_t>(n) * g.co + co) * g.oh + oy) * g.ow + ox] = acc;
                }
}

template <typename T>
void conv2d_backward_input(const T* gy, const T* wgt, T* gx, const ConvGeom& g) {
    for (int n = 0; n < g.n; ++n)
        for (int ci = 0; ci < g.ci; ++ci)
            for (int iy = 0; iy < g.h; ++iy)
                for (int ix = 0; ix < g.w; ++ix) {
                    T acc = T(0);
                    for (int co = 0; co < g.co; ++co)
                        for (int ky = 0; ky < g.kh; ++ky)
                            for (int kx = 0; kx < g.kw; ++kx) {
                                const int ty = iy + g.pad - ky;
                                const int tx = ix + g.pad - kx;
                                if (ty % g.stride != 0 || tx % g.stride != 0) continue;
                                const int oy = ty / g.stride, ox = tx / g.stride;
                                if (oy < 0 || oy >= g.oh || ox < 0 || ox >= g.ow) continue;
                                acc += gy[((static_cast<size_t>(n) * g.co + co) * g.oh + oy) * g.ow + ox] *
                                       wgt[((static_cast<size_t>(co) * g.ci + ci) * g.kh + ky) * g.kw + kx];
                            }
                    gx[((static_cast<size_t>(n) * g.ci + ci) * g.h + iy) * g.w + ix] = acc;
                }
}

template <typename T>
void conv2d_backward_params(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g) {
    for (int co = 0; co < g.co; ++co) {
        if (gb) {
            T acc = T(0);
            for (int n = 0; n < g.n; ++n)
                for (int oy = 0; oy < g.oh; ++oy)
                    for (int ox = 0; ox < g.ow; ++ox)
                        acc += gy[((static_cast<size_t>(n) * g.co + co) * g.oh + oy) * g.ow + ox];
            gb[co] += acc;
        }
        for (int ci = 0; ci < g.ci; ++ci)
            for (int ky = 0; ky < g.kh; ++ky)
                for (int kx = 0; kx < g.kw; ++kx) {
                    T acc = T(0);
                    for (int n = 0; n < g.n; ++n)
                        for (int oy = 0; oy < g.oh; ++oy)
                            for (int ox = 0; ox < g.ow; ++ox) {
                                const int iy = oy * g.stride + ky - g.pad;
                                const int ix = ox * g.stride + kx - g.pad;
                                if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
                                acc += gy[((static_cast<size_t>(n) * g.co + co) * g.oh + oy) * g.ow + ox] *
                                       x[((static_cast<size_t>(n) * g.ci + ci) * g.h + iy) * g.w + ix];
                            }
                    gw[((static_cast<size_t>(co) * g.ci + ci) * g.kh + ky) * g.kw + kx] += acc;
                }
    }
}

template <typename T>
void convt2d_forward(const T* x, const T* wgt, const T* b, T* y, const ConvGeom& g) {
    for (int n = 0; n < g.n; ++n)
        for (int co = 0; co < g.co; ++co)
            for (int oy = 0; oy < g.oh; ++oy)
                for (int ox = 0; ox < g.ow; ++ox) {
                    T acc = b ? b[co] : T(0);
                    for (int ci = 0; ci < g.ci; ++ci)
                        for (int ky = 0; ky < g.kh; ++ky)
                            for (int kx = 0; kx < g.kw; ++kx) {
                                const int ty = oy + g.pad - ky;
                                const int tx = ox + g.pad - kx;
                                if (ty % g.stride != 0 || tx % g.stride != 0) continue;
                                const int iy = ty / g.stride, ix = tx / g.stride;
                                if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
                                acc += x[((static_cast<size_t>(n) * g.ci + ci) * g.h + iy) * g.w + ix] *
                                       wgt[((static_cast<size_t>(ci) * g.co + co) * g.kh + ky) * g.kw + kx];
                            }
                    y[((static_cast<size_t>(n) * g.co + co) * g.oh + oy) * g.ow + ox] = acc;
                }
}

} // namespace naive

// =====================================================================
// blocked engine: im2col + register-tiled GEMM. The reduction axis is never
// split, so each output element accumulates serially in a fixed order.
// =====================================================================
namespace detail {

// C[M,N] += A * B, where A[m,k] = a[m*ars + k*acs] and B is row-major [K,N].
// C row-major. Parallel over row blocks when par is set.
template <typename T>
void gemm_acc(int M, int N, int K, const T* a, long long ars, long long acs, const T* b, T* c, bool par) {
    constexpr int MR = 4;
    constexpr int NR = 64;
#pragma omp parallel for schedule(static) if (par)
    for (int m0 = 0; m0 < M; m0 += MR) {
        const int mend = std::min(M, m0 + MR);
        for (int n0 = 0; n0 < N; n0 += NR) {
            const int nend = std::min(N, n0 + NR);
            const int nb = nend - n0;
            T acc[MR][NR];
            for (int mr = 0; mr < mend - m0; ++mr)
                for (int nr = 0; nr < nb; ++nr) acc[mr][nr] = T(0);
            for (int k = 0; k < K; ++k) {
                const T* brow = b + static_cast<size_t>(k) * N + n0;
                for (int mr = 0; mr < mend - m0; ++mr) {
                    const T av = a[static_cast<long long>(m0 + mr) * ars + static_cast<long long>(k) * acs];
                    T* arow = acc[mr];
#pragma omp simd
                    for (int nr = 0; nr < nb; ++nr) arow[nr] += av * brow[nr];
                }
            }
            for (int mr = 0; mr < mend - m0; ++mr) {
                T* crow = c + static_cast<size_t>(m0 + mr) * N + n0;
                for (int nr = 0; nr < nb; ++nr) crow[nr] += acc[mr][nr];
            }
        }
    }
}

// X_col[K = ci*kh*kw][N = n*oh*ow]; zero where the kernel overhangs the pad.
template <typename T>
void im2col(const T* x, T* col, const ConvGeom& g, bool par) {
    const int N = g.n * g.oh * g.ow;
    const size_t in_plane = static_cast<size_t>(g.h) * g.w;
#pragma omp parallel for schedule(static) if (par)
    for (int ci = 0; ci < g.ci; ++ci) {
        for (int ky = 0; ky < g.kh; ++ky)
            for (int kx = 0; kx < g.kw; ++kx) {
                T* row = col + (static_cast<size_t>(ci) * g.kh * g.kw + ky * g.kw + kx) * N;
                for (int n = 0; n < g.n; ++n) {
                    const T* xc = x + (static_cast<size_t>(n) * g.ci + ci) * in_plane;
                    for (int oy = 0; oy < g.oh; ++oy) {
                        const int iy = oy * g.stride + ky - g.pad;
                        T* dst = row + (static_cast<size_t>(n) * g.oh + oy) * g.ow;
                        if (iy < 0 || iy >= g.h) {
                            for (int ox = 0; ox < g.ow; ++ox) dst[ox] = T(0);
                            continue;
                        }
                        const T* xrow = xc + static_cast<size_t>(iy) * g.w;
                        for (int ox = 0; ox < g.ow; ++ox) {
                            const int ix = ox * g.stride + kx - g.pad;
                            dst[ox] = (ix < 0 || ix >= g.w) ? T(0) : xrow[ix];
                        }
                    }
                }
            }
    }
}

// X_colT[N][K], transposed layout for the parameter-gradient GEMM.
template <typename T>
void im2colT(const T* x, T* colT, const ConvGeom& g, bool par) {
    const int K = g.ci * g.kh * g.kw;
    const size_t in_plane = static_cast<size_t>(g.h) * g.w;
    const int planes = g.n * g.oh;
#pragma omp parallel for schedule(static) if (par)
    for (int p = 0; p < planes; ++p) {
        const int n = p / g.oh, oy = p % g.oh;
        for (int ox = 0; ox < g.ow; ++ox) {
            T* dst = colT + (static_cast<size_t>(p) * g.ow + ox) * K;
            for (int ci = 0; ci < g.ci; ++ci) {
                const T* xc = x + (static_cast<size_t>(n) * g.ci + ci) * in_plane;
                for (int ky = 0; ky < g.kh; ++ky) {
                    const int iy = oy * g.stride + ky - g.pad;
                    for (int kx = 0; kx < g.kw; ++kx) {
                        const int ix = ox * g.stride + kx - g.pad;
                        *dst++ = (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) ? T(0)
                                                                              : xc[static_cast<size_t>(iy) * g.w + ix];
                    }
                }
            }
        }
    }
}

// gx += col2im(gX_col); rows sharing ci touch the same planes, so the
// parallel axis is ci.
template <typename T>
void col2im_add(const T* col, T* gx, const ConvGeom& g, bool par) {
    const int N = g.n * g.oh * g.ow;
    const size_t in_plane = static_cast<size_t>(g.h) * g.w;
#pragma omp parallel for schedule(static) if (par)
    for (int ci = 0; ci < g.ci; ++ci) {
        for (int ky = 0; ky < g.kh; ++ky)
            for (int kx = 0; kx < g.kw; ++kx) {
                const T* row = col + (static_cast<size_t>(ci) * g.kh * g.kw + ky * g.kw + kx) * N;
                for (int n = 0; n < g.n; ++n) {
                    T* xc = gx + (static_cast<size_t>(n) * g.ci + ci) * in_plane;
                    for (int oy = 0; oy < g.oh; ++oy) {
                        const int iy = oy * g.stride + ky - g.pad;
                        if (iy < 0 || iy >= g.h) continue;
                        const T* src = row + (static_cast<size_t>(n) * g.oh + oy) * g.ow;
                        T* xrow = xc + static_cast<size_t>(iy) * g.w;
                        for (int ox = 0; ox < g.ow; ++ox) {
                            const int ix = ox * g.stride + kx - g.pad;
                            if (ix >= 0 && ix < g.w) xrow[ix] += src[ox];
                        }
                    }
                }
            }
    }
}

template <typename T>
void conv2d_forward_engine(const T* x, const T* wgt, const T* b, T* y, const ConvGeom& g, bool par) {
    const int K = g.ci * g.kh * g.kw;
    const int N = g.n * g.oh * g.ow;
    std::vector<T> col(static_cast<size_t>(K) * N);
    im2col(x, col.data(), g, par);
    // y is [n][co][plane] but the GEMM wants [co][n*plane]; compute into a
    // scratch laid out [co][N] and scatter rows back per (n, co).
    std::vector<T> out(static_cast<size_t>(g.co) * N);
    const size_t out_plane = static_cast<size_t>(g.oh) * g.ow;
    for (int co = 0; co < g.co; ++co) {
        T* row = out.data() + static_cast<size_t>(co) * N;
        const T bias = b ? b[co] : T(0);
        for (int j = 0; j < N; ++j) row[j] = bias;
    }
    gemm_acc(g.co, N, K, wgt, K, 1, col.data(), out.data(), par);
    const int planes = g.n * g.co;
#pragma omp parallel for schedule(static) if (par)
    for (int p = 0; p < planes; ++p) {
        const int n = p / g.co, co = p % g.co;
        const T* src = out.data() + static_cast<size_t>(co) * N + static_cast<size_t>(n) * out_plane;
        std::copy(src, src + out_plane, y + static_cast<size_t>(p) * out_plane);
    }
}

template <typename T>
void conv2d_backward_input_engine(const T* gy, const T* wgt, T* gx, const ConvGeom& g, bool par) {
    const int K = g.ci * g.kh * g.kw;
    const int N = g.n * g.oh * g.ow;
    const size_t out_plane = static_cast<size_t>(g.oh) * g.ow;
    // gY reordered to [co][N]
    std::vector<T> gyr(static_cast<size_t>(g.co) * N);
    const int planes = g.n * g.co;
#pragma omp parallel for schedule(static) if (par)
    for (int p = 0; p < planes; ++p) {
        const int n = p / g.co, co = p % g.co;
        const T* src = gy + static_cast<size_t>(p) * out_plane;
        std::copy(src, src + out_plane, gyr.data() + static_cast<size_t>(co) * N + static_cast<size_t>(n) * out_plane);
    }
    std::vector<T> col(static_cast<size_t>(K) * N, T(0));
    // gX_col[K,N] = W^T[K,co] * gY[co,N]; A = W viewed column-major
    gemm_acc(K, N, g.co, wgt, 1, K, gyr.data(), col.data(), par);
    const size_t in_count = static_cast<size_t>(g.n) * g.ci * g.h * g.w;
    std::fill(gx, gx + in_count, T(0));
    col2im_add(col.data(), gx, g, par);
}

template <typename T>
void conv2d_backward_params_engine(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g, bool par) {
    const int K = g.ci * g.kh * g.kw;
    const int N = g.n * g.oh * g.ow;
    const size_t out_plane = static_cast<size_t>(g.oh) * g.ow;
    std::vector<T> gyr(static_cast<size_t>(g.co) * N);
    const int planes = g.n * g.co;
#pragma omp parallel for schedule(static) if (par)
    for (int p = 0; p < planes; ++p) {
        const int n = p / g.co, co = p % g.co;
        const T* src = gy + static_cast<size_t>(p) * out_plane;
        std::copy(src, src + out_plane, gyr.data() + static_cast<size_t>(co) * N + static_cast<size_t>(n) * out_plane);
    }
    std::vector<T> colT(static_cast<size_t>(N) * K);
    im2colT(x, colT.data(), g, par);
    // gW[co,K] += gY[co,N] * X_colT[N,K]
    gemm_acc(g.co, K, N, gyr.data(), N, 1, colT.data(), gw, par);
    if (gb) {
#pragma omp parallel for schedule(static) if (par)
        for (int co = 0; co < g.co; ++co) {
            T acc = T(0);
            const T* row = gyr.data() + static_cast<size_t>(co) * N;
            for (int j = 0; j < N; ++j) acc += row[j];
            gb[co] += acc;
        }
    }
}

template <typename T>
void convt_bias_add(T* y, const T* b, const ConvGeom& g, bool par) {
    if (!b) return;
    const size_t out_plane = static_cast<size_t>(g.oh) * g.ow;
    const int planes = g.n * g.co;
#pragma omp parallel for schedule(static) if (par)
    for (int p = 0; p < planes; ++p) {
        const T bias = b[p % g.co];
        T* row = y + static_cast<size_t>(p) * out_plane;
        for (size_t i = 0; i < out_plane; ++i) row[i] += bias;
    }
}

} // namespace detail

// ---- public kernels, serial and OpenMP backends ----

namespace serial {
template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const ConvGeom& g) {
    detail::conv2d_forward_engine(x, w, b, y, g, false);
}
template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const ConvGeom& g) {
    detail::conv2d_backward_input_engine(gy, w, gx, g, false);
}
template <typename T>
void conv2d_backward_params(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g) {
    detail::conv2d_backward_params_engine(gy, x, gw, gb, g, false);
}
template <typename T>
void convt2d_forward(const T* x, const T* w, const T* b, T* y, const ConvGeom& g) {
    detail::conv2d_backward_input_engine(x, w, y, convt_as_conv(g), false);
    detail::convt_bias_add(y, b, g, false);
}
template <typename T>
void convt2d_backward_input(const T* gy, const T* w, T* gx, const ConvGeom& g) {
    detail::conv2d_forward_engine(gy, w, static_cast<const T*>(nullptr), gx, convt_as_conv(g), false);
}
template <typename T>
void convt2d_backward_params(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g) {
    detail::conv2d_backward_params_engine(x, gy, gw, static_cast<T*>(nullptr), convt_as_conv(g), false);
    if (gb) {
        const size_t out_plane = static_cast<size_t>(g.oh) * g.ow;
        for (int co = 0; co < g.co; ++co) {
            T acc = T(0);
            for (int n = 0; n < g.n; ++n) {
                const T* row = gy + (static_cast<size_t>(n) * g.co + co) * out_plane;
                for (size_t i = 0; i < out_plane; ++i) acc += row[i];
            }
            gb[co] += acc;
        }
    }
}
} // namespace serial

namespace omp {
template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const ConvGeom& g) {
    detail::conv2d_forward_engine(x, w, b, y, g, true);
}
template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const ConvGeom& g) {
    detail::conv2d_backward_input_engine(gy, w, gx, g, true);
}
template <typename T>
void conv2d_backward_params(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g) {
    detail::conv2d_backward_params_engine(gy, x, gw, gb, g, true);
}
template <typename T>
void convt2d_forward(const T* x, const T* w, const T* b, T* y, const ConvGeom& g) {
    detail::conv2d_backward_input_engine(x, w, y, convt_as_conv(g), true);
    detail::convt_bias_add(y, b, g, true);
}
template <typename T>
void convt2d_backward_input(const T* gy, const T* w, T* gx, const ConvGeom& g) {
    detail::conv2d_forward_engine(gy, w, static_cast<const T*>(nullptr), gx, convt_as_conv(g), true);
}
template <typename T>
void convt2d_backward_params(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g) {
    detail::conv2d_backward_params_engine(x, gy, gw, static_cast<T*>(nullptr), convt_as_conv(g), true);
    if (gb) {
        const size_t out_plane = static_cast<size_t>(g.oh) * g.ow;
#pragma omp parallel for schedule(static)
        for (int co = 0; co < g.co; ++co) {
            T acc = T(0);
            for (int n = 0; n < g.n; ++n) {
                const T* row = gy + (static_cast<size_t>(n) * g.co + co) * out_plane;
                for (size_t i = 0; i < out_plane; ++i) acc += row[i];
            }
            gb[co] += acc;
        }
    }
}
} // namespace omp

// ---- dispatch ----
#define GANKD_KERN_DISPATCH(fn, ...)                    \
    do {                                                \
        if (backend() == Backend::omp)                  \
            omp::fn(__VA_ARGS__);                       \
        else                                            \
            serial::fn(__VA_ARGS__);                    \
    } while (0)

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, const ConvGeom& g) {
    GANKD_KERN_DISPATCH(conv2d_forward, x, w, b, y, g);
}
template <typename T>
void conv2d_backward_input(const T* gy, const T* w, T* gx, const ConvGeom& g) {
    GANKD_KERN_DISPATCH(conv2d_backward_input, gy, w, gx, g);
}
template <typename T>
void conv2d_backward_params(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g) {
    GANKD_KERN_DISPATCH(conv2d_backward_params, gy, x, gw, gb, g);
}
template <typename T>
void convt2d_forward(const T* x, const T* w, const T* b, T* y, const ConvGeom& g) {
    GANKD_KERN_DISPATCH(convt2d_forward, x, w, b, y, g);
}
template <typename T>
void convt2d_backward_input(const T* gy, const T* w, T* gx, const ConvGeom& g) {
    GANKD_KERN_DISPATCH(convt2d_backward_input, gy, w, gx, g);
}
template <typename T>
void convt2d_backward_params(const T* gy, const T* x, T* gw, T* gb, const ConvGeom& g) {
    GANKD_KERN_DISPATCH(convt2d_backward_params, gy, x, gw, gb, g);
}

#undef GANKD_KERN_DISPATCH

} // namespace gankd::kern
