// Compares the serial reference kernels against the OpenMP backend on the
// conv shapes the training loop actually runs, and checks that both produce
// bit-identical outputs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "gankd/kernels.hpp"
#include "gankd/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace gankd;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<float> random_vec(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.next_double() * 2 - 1);
    return v;
}

struct Case {
    const char* name;
    kern::ConvGeom g;
    bool transpose;
};

template <typename F>
double time_loop(F&& fn, int iters) {
    fn(); // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    return seconds_since(t0) / iters;
}

} // namespace

int main(int argc, char** argv) {
    int iters = 5;
    if (argc > 1) iters = std::atoi(argv[1]);
#ifdef _OPENMP
    std::printf("OpenMP max threads: %d\n", omp_get_max_threads());
#endif
    const std::vector<Case> cases = {
        {"conv 4x4 s2  8x32x48x48->64", kern::conv_geom(8, 32, 48, 48, 64, 4, 4, 2, 1), false},
        {"conv 4x4 s2  8x9x48x48->32", kern::conv_geom(8, 9, 48, 48, 32, 4, 4, 2, 1), false},
        {"conv 4x4 s1  8x128x11x11->256", kern::conv_geom(8, 128, 11, 11, 256, 4, 4, 1, 1), false},
        {"convT 4x4 s2 8x256x6x6->64", kern::convt_geom(8, 256, 6, 6, 64, 4, 4, 2, 1), true},
        {"convT 4x4 s2 8x64x24x24->3", kern::convt_geom(8, 64, 24, 24, 3, 4, 4, 2, 1), true},
    };

    std::printf("%-32s %12s %12s %12s %8s  %s\n", "kernel", "GFLOP/s ser", "GFLOP/s omp", "speedup", "pass",
                "(fwd / bwd_in / bwd_par)");
    for (const auto& c : cases) {
        const auto& g = c.g;
        const size_t xin = static_cast<size_t>(g.n) * g.ci * g.h * g.w;
        const size_t wn = static_cast<size_t>(c.transpose ? g.ci * g.co : g.co * g.ci) * g.kh * g.kw;
        const size_t yn = static_cast<size_t>(g.n) * g.co * g.oh * g.ow;
        const std::vector<float> x = random_vec(xin, 1), w = random_vec(wn, 2), b = random_vec(g.co, 3),
                                 gy = random_vec(yn, 4);
        std::vector<float> y_s(yn), y_o(yn), gx_s(xin), gx_o(xin), gw_s(wn), gw_o(wn), gb_s(g.co), gb_o(g.co);
        const double macs = static_cast<double>(c.transpose ? kern::convt_macs(g) : kern::conv_macs(g));

        auto fwd = [&](bool omp_b, float* y) {
            if (c.transpose)
                omp_b ? kern::omp::convt2d_forward(x.data(), w.data(), b.data(), y, g)
                      : kern::serial::convt2d_forward(x.data(), w.data(), b.data(), y, g);
            else
                omp_b ? kern::omp::conv2d_forward(x.data(), w.data(), b.data(), y, g)
                      : kern::serial::conv2d_forward(x.data(), w.data(), b.data(), y, g);
        };
        auto bwd_in = [&](bool omp_b, float* gx) {
            if (c.transpose)
                omp_b ? kern::omp::convt2d_backward_input(gy.data(), w.data(), gx, g)
                      : kern::serial::convt2d_backward_input(gy.data(), w.data(), gx, g);
            else
                omp_b ? kern::omp::conv2d_backward_input(gy.data(), w.data(), gx, g)
                      : kern::serial::conv2d_backward_input(gy.data(), w.data(), gx, g);
        };
        auto bwd_par = [&](bool omp_b, float* gw, float* gb) {
            std::memset(gw, 0, wn * sizeof(float));
            std::memset(gb, 0, g.co * sizeof(float));
            if (c.transpose)
                omp_b ? kern::omp::convt2d_backward_params(gy.data(), x.data(), gw, gb, g)
                      : kern::serial::convt2d_backward_params(gy.data(), x.data(), gw, gb, g);
            else
                omp_b ? kern::omp::conv2d_backward_params(gy.data(), x.data(), gw, gb, g)
                      : kern::serial::conv2d_backward_params(gy.data(), x.data(), gw, gb, g);
        };

        const double tsf = time_loop([&] { fwd(false, y_s.data()); }, iters);
        const double tof = time_loop([&] { fwd(true, y_o.data()); }, iters);
        const double tsi = time_loop([&] { bwd_in(false, gx_s.data()); }, iters);
        const double toi = time_loop([&] { bwd_in(true, gx_o.data()); }, iters);
        const double tsp = time_loop([&] { bwd_par(false, gw_s.data(), gb_s.data()); }, iters);
        const double top = time_loop([&] { bwd_par(true, gw_o.data(), gb_o.data()); }, iters);

        const bool same = std::memcmp(y_s.data(), y_o.data(), yn * sizeof(float)) == 0 &&
                          std::memcmp(gx_s.data(), gx_o.data(), xin * sizeof(float)) == 0 &&
                          std::memcmp(gw_s.data(), gw_o.data(), wn * sizeof(float)) == 0 &&
                          std::memcmp(gb_s.data(), gb_o.data(), g.co * sizeof(float)) == 0;

        const double gs = 2.0 * macs / 1e9;
        std::printf("%-32s %12.2f %12.2f %11.2fx %8s  (%.2f/%.2f/%.2f ms omp)\n", c.name,
                    gs / ((tsf + tsi + tsp) / 3), gs / ((tof + toi + top) / 3),
                    (tsf + tsi + tsp) / (tof + toi + top), same ? "bitwise" : "MISMATCH", tof * 1e3, toi * 1e3,
                    top * 1e3);
        if (!same) return 1;
    }
    return 0;
}
