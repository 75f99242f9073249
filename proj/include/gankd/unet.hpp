#pragma once

#include <vector>

#include "gankd/layers.hpp"
#include "gankd/model.hpp"

namespace gankd::nn {

// U-net encoder/decoder with skip connections, pix2pix wiring:
//   enc level l:  [lrelu (l>0)] -> conv k4 s2 p1 -> [inorm (0<l<D-1)]
//   dec level l:  relu -> convT k4 s2 p1 -> [inorm (l>0)] -> [dropout] -> concat skip
//   outermost dec: relu -> convT -> tanh
// Skip at level l concatenates the input of encoder block l with the deeper
// decoder output, so decoder convT l sees 2*c(l) channels (except innermost).
template <typename T>
class UNetGenerator {
public:
    UNetGenerator() = default;

    UNetGenerator(const GeneratorSpec& spec, uint64_t seed, Role role = Role::student_generator)
        : spec_(spec), role_(role) {
        spec.validate();
        const int d = spec.depth;
        enc_.reserve(d);
        dec_.reserve(d);
        for (int l = 0; l < d; ++l) {
            const int in_c = l == 0 ? spec.in_channels : spec.width_at(l - 1);
            enc_.emplace_back(in_c, spec.width_at(l), 4, 2, 1);
            enc_.back().init(seed, "enc" + std::to_string(l));
        }
        for (int l = 0; l < d; ++l) {
            const int in_c = l == d - 1 ? spec.width_at(l) : 2 * spec.width_at(l);
            const int out_c = l == 0 ? spec.out_channels : spec.width_at(l - 1);
            dec_.emplace_back(in_c, out_c, 4, 2, 1);
            dec_.back().init(seed, "dec" + std::to_string(l));
        }
    }

    const GeneratorSpec& spec() const { return spec_; }
    Role role() const { return role_; }
    void set_role(Role r) { role_ = r; }
    int depth() const { return spec_.depth; }

    struct Ctx {
        std::vector<Tensor<T>> enc_pre;   // input of encoder block l; enc_pre[depth] = bottleneck
        std::vector<Tensor<T>> enc_act;   // conv input (post-lrelu)
        std::vector<Tensor<T>> enc_conv;  // conv output (norm input), only where normed
        std::vector<Tensor<T>> dec_pre;   // decoder block input
        std::vector<Tensor<T>> dec_act;   // convT input (post-relu)
        std::vector<Tensor<T>> dec_conv;  // convT output
        std::vector<Tensor<T>> drop_mask; // dropout masks, where applied
    };

    bool enc_normed(int l) const { return l > 0 && l < spec_.depth - 1; }
    bool dec_normed(int l) const { return l > 0; }
    bool dropped(int l) const { return spec_.use_dropout && l >= 1 && l <= spec_.depth - 2; }

    void check_input(const Tensor<T>& x) const {
        if (x.c() != spec_.in_channels)
            throw ShapeError("generator expects " + std::to_string(spec_.in_channels) + " channels, got " +
                             std::to_string(x.c()));
        const int div = 1 << spec_.depth;
        if (x.h() % div != 0 || x.w() % div != 0)
            throw ShapeError("generator input " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
                             " not divisible by 2^depth = " + std::to_string(div));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        Rng unused(0);
        return run(x, /*train=*/false, unused, nullptr);
    }

    Tensor<T> forward_train(const Tensor<T>& x, Rng& dropout_rng, Ctx& ctx) const {
        return run(x, /*train=*/true, dropout_rng, &ctx);
    }

    // Grad wrt input; parameter grads accumulate when accum is set.
    Tensor<T> backward(const Ctx& ctx, const Tensor<T>& gy, bool accum = true) {
        const int d = spec_.depth;
        std::vector<Tensor<T>> genc(d + 1);

        // decoder chain, level 0 upward
        Tensor<T> g = tanh_backward(ctx.dec_conv[0], gy);
        g = dec_[0].backward(ctx.dec_act[0], g, accum);
        g = relu_backward(ctx.dec_pre[0], g);
        for (int l = 1; l < d; ++l) {
            const int skip_c = ctx.enc_pre[l].c();
            genc[l] = slice_channels(g, 0, skip_c);
            Tensor<T> gd = slice_channels(g, skip_c, g.c());
            if (dropped(l)) gd = dropout_backward(ctx.drop_mask[l], gd);
            gd = InstanceNorm<T>::backward(ctx.dec_conv[l], gd);
            gd = dec_[l].backward(ctx.dec_act[l], gd, accum);
            g = relu_backward(ctx.dec_pre[l], gd);
        }
        genc[d] = std::move(g);

        // encoder chain, innermost downward
        Tensor<T> ge = std::move(genc[d]);
        for (int l = d - 1; l >= 0; --l) {
            if (enc_normed(l)) ge = InstanceNorm<T>::backward(ctx.enc_conv[l], ge);
            ge = enc_[l].backward(ctx.enc_act[l], ge, accum);
            if (l > 0) {
                ge = leaky_relu_backward(ctx.enc_pre[l], ge);
                axpy(T(1), genc[l], ge);
            }
        }
        return ge;
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (size_t l = 0; l < enc_.size(); ++l) {
            out.push_back({"enc" + std::to_string(l) + ".w", &enc_[l].w, &enc_[l].gw});
            out.push_back({"enc" + std::to_string(l) + ".b", &enc_[l].b, &enc_[l].gb});
        }
        for (size_t l = 0; l < dec_.size(); ++l) {
            out.push_back({"dec" + std::to_string(l) + ".w", &dec_[l].w, &dec_[l].gw});
            out.push_back({"dec" + std::to_string(l) + ".b", &dec_[l].b, &dec_[l].gb});
        }
        return out;
    }

    void zero_grads() {
        for (auto& c : enc_) c.zero_grads();
        for (auto& c : dec_) c.zero_grads();
    }

    size_t param_count() const {
        size_t total = 0;
        for (const auto& c : enc_) total += c.param_count();
        for (const auto& c : dec_) total += c.param_count();
        return total;
    }

    // Multiply-accumulates of one forward pass at the given spatial size.
    long long macs(int h, int w, int batch = 1) const {
        check_shape_for_macs(h, w);
        long long total = 0;
        int hh = h, ww = w;
        for (const auto& c : enc_) {
            auto g = kern::conv_geom(batch, c.in_ch, hh, ww, c.out_ch, c.k, c.k, c.stride, c.pad);
            total += kern::conv_macs(g);
            hh = g.oh;
            ww = g.ow;
        }
        for (int l = spec_.depth - 1; l >= 0; --l) {
            auto g = kern::convt_geom(batch, dec_[l].in_ch, hh, ww, dec_[l].out_ch, 4, 4, 2, 1);
            total += kern::convt_macs(g);
            hh = g.oh;
            ww = g.ow;
        }
        return total;
    }

private:
    void check_shape_for_macs(int h, int w) const {
        const int div = 1 << spec_.depth;
        if (h <= 0 || w <= 0 || h % div != 0 || w % div != 0)
            throw ShapeError("input " + std::to_string(h) + "x" + std::to_string(w) +
                             " incompatible with generator depth " + std::to_string(spec_.depth));
    }

    Tensor<T> run(const Tensor<T>& x, bool train, Rng& rng, Ctx* ctx) const {
        check_input(x);
        const int d = spec_.depth;
        Ctx local;
        Ctx& s = ctx ? *ctx : local;
        s.enc_pre.assign(d + 1, {});
        s.enc_act.assign(d, {});
        s.enc_conv.assign(d, {});
        s.dec_pre.assign(d, {});
        s.dec_act.assign(d, {});
        s.dec_conv.assign(d, {});
        s.drop_mask.assign(d, {});

        s.enc_pre[0] = x;
        for (int l = 0; l < d; ++l) {
            s.enc_act[l] = l == 0 ? s.enc_pre[0] : leaky_relu(s.enc_pre[l]);
            Tensor<T> t = enc_[l].forward(s.enc_act[l]);
            if (enc_normed(l)) {
                s.enc_conv[l] = std::move(t);
                t = InstanceNorm<T>::forward(s.enc_conv[l]);
            }
            s.enc_pre[l + 1] = std::move(t);
        }

        Tensor<T> dec = s.enc_pre[d];
        Tensor<T> y;
        for (int l = d - 1; l >= 0; --l) {
            s.dec_pre[l] = std::move(dec);
            s.dec_act[l] = relu(s.dec_pre[l]);
            Tensor<T> t = dec_[l].forward(s.dec_act[l]);
            if (l > 0) {
                s.dec_conv[l] = std::move(t);
                t = InstanceNorm<T>::forward(s.dec_conv[l]);
                if (dropped(l) && train) {
                    t = dropout_forward(t, rng, s.drop_mask[l]);
                }
                dec = concat_channels(s.enc_pre[l], t);
            } else {
                s.dec_conv[0] = std::move(t);
                y = tanh_forward(s.dec_conv[0]);
            }
        }
        return y;
    }

    GeneratorSpec spec_;
    Role role_ = Role::student_generator;
    std::vector<Conv2d<T>> enc_;
    std::vector<ConvTranspose2d<T>> dec_;
};

// Parameter count from the spec alone (matches a built model exactly).
inline size_t unet_param_count(const GeneratorSpec& spec) {
    spec.validate();
    size_t total = 0;
    for (int l = 0; l < spec.depth; ++l) {
        const int in_c = l == 0 ? spec.in_channels : spec.width_at(l - 1);
        total += static_cast<size_t>(in_c) * spec.width_at(l) * 16 + spec.width_at(l);
    }
    for (int l = 0; l < spec.depth; ++l) {
        const int in_c = l == spec.depth - 1 ? spec.width_at(l) : 2 * spec.width_at(l);
        const int out_c = l == 0 ? spec.out_channels : spec.width_at(l - 1);
        total += static_cast<size_t>(in_c) * out_c * 16 + out_c;
    }
    return total;
}

} // namespace gankd::nn
