#pragma once

#include <bit>
#include <map>
#include <string>
#include <vector>

#include "gankd/config.hpp"
#include "gankd/patch_disc.hpp"
#include "gankd/unet.hpp"

namespace gankd {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

// Single-archive checkpoint: magic, version, JSON header (spec + metadata +
// array directory), then contiguous float32 payload. Save/load round-trips
// bit-exactly.
struct Checkpoint {
    json meta;
    // insertion-ordered array list; lookup map points into it
    std::vector<std::pair<std::string, Tensor<float>>> arrays;

    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : arrays)
            if (n == name) return &t;
        return nullptr;
    }
    void add(const std::string& name, Tensor<float> t) { arrays.emplace_back(name, std::move(t)); }
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// --- model adapters ---

template <typename Net>
Checkpoint checkpoint_of(Net& net, json extra_meta = {}) {
    Checkpoint ck;
    ck.meta["role"] = nn::role_name(net.role());
    ck.meta["spec"] = net.spec();
    if (!extra_meta.is_null()) ck.meta["extra"] = std::move(extra_meta);
    for (auto& p : net.params()) ck.add(p.name, *p.value);
    return ck;
}

template <typename Net>
void restore_params(Net& net, const Checkpoint& ck) {
    for (auto& p : net.params()) {
        const Tensor<float>* src = ck.find(p.name);
        if (!src) throw DataError("checkpoint missing array '" + p.name + "'");
        if (src->shape != p.value->shape)
            throw DataError("checkpoint array '" + p.name + "' has shape " + src->shape_str() + ", expected " +
                            p.value->shape_str());
        *p.value = *src;
    }
}

inline nn::UNetGenerator<float> load_generator(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    nn::GeneratorSpec spec = ck.meta.at("spec").get<nn::GeneratorSpec>();
    nn::UNetGenerator<float> net(spec, 0);
    const std::string role = ck.meta.value("role", "");
    net.set_role(role == "teacher_generator" ? nn::Role::teacher_generator : nn::Role::student_generator);
    restore_params(net, ck);
    return net;
}

inline nn::PatchDiscriminator<float> load_discriminator(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    nn::DiscriminatorSpec spec = ck.meta.at("spec").get<nn::DiscriminatorSpec>();
    nn::PatchDiscriminator<float> net(spec, 0);
    const std::string role = ck.meta.value("role", "");
    net.set_role(role == "teacher_discriminator" ? nn::Role::teacher_discriminator
                                                 : nn::Role::student_discriminator);
    restore_params(net, ck);
    return net;
}

} // namespace gankd
