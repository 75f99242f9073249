#pragma once

#include <utility>
#include <vector>

#include "gankd/layers.hpp"
#include "gankd/model.hpp"

namespace gankd::nn {

// PatchGAN discriminator on the concatenated (condition, image) input.
// Output is a grid of patch logits. Block layout (all convs k4 p1):
//   block 0:            conv s2, lrelu
//   blocks 1..L-1:      conv s2, inorm, lrelu
//   block L:            conv s1, inorm, lrelu
//   block L+1:          conv s1 -> 1 channel (logits)
// The truncated discriminator is the prefix up to a tap block index.
template <typename T>
class PatchDiscriminator {
public:
    PatchDiscriminator() = default;

    PatchDiscriminator(const DiscriminatorSpec& spec, uint64_t seed, Role role = Role::student_discriminator)
        : spec_(spec), role_(role) {
        spec.validate();
        const int L = spec.num_layers;
        int prev = spec.in_channels;
        for (int i = 0; i < L; ++i) {
            const int w = width_at(i);
            convs_.emplace_back(prev, w, 4, 2, 1);
            prev = w;
        }
        convs_.emplace_back(prev, width_at(L), 4, 1, 1);
        convs_.emplace_back(width_at(L), 1, 4, 1, 1);
        for (size_t i = 0; i < convs_.size(); ++i) convs_[i].init(seed, "disc" + std::to_string(i));
    }

    const DiscriminatorSpec& spec() const { return spec_; }
    Role role() const { return role_; }
    void set_role(Role r) { role_ = r; }
    int num_blocks() const { return static_cast<int>(convs_.size()); }
    int width_at(int i) const {
        int m = 1;
        for (int j = 0; j < i && m < 8; ++j) m *= 2;
        return spec_.base_width * m;
    }
    bool normed(int i) const { return i > 0 && i < num_blocks() - 1; }

    struct Ctx {
        std::vector<Tensor<T>> block_in;  // conv input per block
        std::vector<Tensor<T>> conv_out;  // conv output (norm input)
        std::vector<Tensor<T>> norm_out;  // norm output (lrelu input), where normed
        std::vector<Tensor<T>> block_out; // block output (saved so taps can be read back)
        int top = -1;                     // highest block computed
    };

    void check_tap(int tap) const {
        if (tap < 0 || tap >= num_blocks())
            throw ConfigError("feature tap " + std::to_string(tap) + " out of range [0, " +
                              std::to_string(num_blocks() - 1) + "]");
    }

    // Runs blocks 0..upto and returns the output of block `upto`.
    Tensor<T> forward_upto(const Tensor<T>& x, int upto, Ctx* ctx = nullptr) const {
        check_tap(upto);
        if (x.c() != spec_.in_channels)
            throw ShapeError("discriminator expects " + std::to_string(spec_.in_channels) + " channels, got " +
                             std::to_string(x.c()));
        Ctx local;
        Ctx& s = ctx ? *ctx : local;
        const int nb = num_blocks();
        s.block_in.assign(nb, {});
        s.conv_out.assign(nb, {});
        s.norm_out.assign(nb, {});
        s.block_out.assign(nb, {});
        s.top = upto;
        Tensor<T> t = x;
        for (int i = 0; i <= upto; ++i) {
            s.block_in[i] = std::move(t);
            Tensor<T> c = convs_[i].forward(s.block_in[i]);
            if (i == nb - 1) {
                t = std::move(c);
            } else if (normed(i)) {
                s.conv_out[i] = std::move(c);
                s.norm_out[i] = InstanceNorm<T>::forward(s.conv_out[i]);
                t = leaky_relu(s.norm_out[i]);
            } else {
                s.conv_out[i] = std::move(c);
                t = leaky_relu(s.conv_out[i]);
            }
            s.block_out[i] = t;
        }
        return t;
    }

    Tensor<T> forward(const Tensor<T>& x, Ctx* ctx = nullptr) const { return forward_upto(x, num_blocks() - 1, ctx); }

    // Truncated forward on (condition, image) pairs; gradient flows to the
    // image via backward(), never to these parameters unless accum is set.
    Tensor<T> forward_features(const Tensor<T>& image, const Tensor<T>& condition, int tap, Ctx* ctx = nullptr) const {
        return forward_upto(concat_channels(condition, image), tap, ctx);
    }

    // Backward with gradients injected at arbitrary block outputs.
    // `grads` pairs (block index, grad at that block's output); indices must
    // be <= ctx.top. Returns grad wrt the concatenated input.
    Tensor<T> backward(const Ctx& ctx, const std::vector<std::pair<int, const Tensor<T>*>>& grads, bool accum) {
        if (grads.empty()) throw ConfigError("discriminator backward needs at least one gradient injection");
        int top = -1;
        for (auto& [i, gp] : grads) {
            check_tap(i);
            if (i > ctx.top) throw ConfigError("gradient injected above computed blocks");
            top = std::max(top, i);
        }
        Tensor<T> g;
        for (int i = top; i >= 0; --i) {
            if (g.empty()) g = Tensor<T>::zeros_like(ctx.block_out[i]);
            for (auto& [bi, gp] : grads)
                if (bi == i) axpy(T(1), *gp, g);
            const int nb = num_blocks();
            if (i == nb - 1) {
                g = convs_[i].backward(ctx.block_in[i], g, accum);
            } else if (normed(i)) {
                g = leaky_relu_backward(ctx.norm_out[i], g);
                g = InstanceNorm<T>::backward(ctx.conv_out[i], g);
                g = convs_[i].backward(ctx.block_in[i], g, accum);
            } else {
                g = leaky_relu_backward(ctx.conv_out[i], g);
                g = convs_[i].backward(ctx.block_in[i], g, accum);
            }
        }
        return g;
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (size_t i = 0; i < convs_.size(); ++i) {
            out.push_back({"disc" + std::to_string(i) + ".w", &convs_[i].w, &convs_[i].gw});
            out.push_back({"disc" + std::to_string(i) + ".b", &convs_[i].b, &convs_[i].gb});
        }
        return out;
    }

    void zero_grads() {
        for (auto& c : convs_) c.zero_grads();
    }

    size_t param_count() const {
        size_t total = 0;
        for (const auto& c : convs_) total += c.param_count();
        return total;
    }

    // Receptive field of one output logit, by stride/kernel arithmetic.
    int receptive_field() const {
        int rf = 1, jump = 1;
        for (const auto& c : convs_) {
            rf += (c.k - 1) * jump;
            jump *= c.stride;
        }
        return rf;
    }

    std::pair<int, int> output_shape(int h, int w) const {
        for (const auto& c : convs_) {
            h = (h + 2 * c.pad - c.k) / c.stride + 1;
            w = (w + 2 * c.pad - c.k) / c.stride + 1;
            if (h <= 0 || w <= 0) throw ShapeError("discriminator input too small");
        }
        return {h, w};
    }

    long long macs(int h, int w, int batch = 1) const {
        long long total = 0;
        for (const auto& c : convs_) {
            auto g = kern::conv_geom(batch, c.in_ch, h, w, c.out_ch, c.k, c.k, c.stride, c.pad);
            total += kern::conv_macs(g);
            h = g.oh;
            w = g.ow;
        }
        return total;
    }

private:
    DiscriminatorSpec spec_;
    Role role_ = Role::student_discriminator;
    std::vector<Conv2d<T>> convs_;
};

} // namespace gankd::nn
