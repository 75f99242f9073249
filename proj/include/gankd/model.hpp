#pragma once

#include <string>
#include <vector>

#include "gankd/tensor.hpp"

namespace gankd::nn {

enum class Role { teacher_generator, student_generator, teacher_discriminator, student_discriminator, segmenter };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::teacher_generator: return "teacher_generator";
        case Role::student_generator: return "student_generator";
        case Role::teacher_discriminator: return "teacher_discriminator";
        case Role::student_discriminator: return "student_discriminator";
        case Role::segmenter: return "segmenter";
    }
    return "?";
}

struct GeneratorSpec {
    int in_channels = 3;
    int out_channels = 3;
    int base_width = 64;   // channels of the first encoder level
    int depth = 8;         // number of down/up-sampling levels
    bool use_dropout = true;

    void validate() const {
        if (base_width < 1) throw ConfigError("GeneratorSpec.base_width must be >= 1");
        if (depth < 1) throw ConfigError("GeneratorSpec.depth must be >= 1");
        if (in_channels < 1) throw ConfigError("GeneratorSpec.in_channels must be >= 1");
        if (out_channels < 1) throw ConfigError("GeneratorSpec.out_channels must be >= 1");
    }
    // width at encoder level l, doubling and capped at 8x base
    int width_at(int l) const {
        int m = 1;
        for (int i = 0; i < l && m < 8; ++i) m *= 2;
        return base_width * m;
    }
};

struct DiscriminatorSpec {
    int in_channels = 6;   // conditional input: source + target channels
    int base_width = 64;
    int num_layers = 3;    // stride-2 blocks; 3 gives the 70x70 patch classifier
    int feature_tap = -1;  // block index for truncated features; -1 = penultimate conv block

    void validate() const {
        if (base_width < 1) throw ConfigError("DiscriminatorSpec.base_width must be >= 1");
        if (num_layers < 1) throw ConfigError("DiscriminatorSpec.num_layers must be >= 1");
        if (in_channels < 1) throw ConfigError("DiscriminatorSpec.in_channels must be >= 1");
    }
    int num_blocks() const { return num_layers + 2; }
    int default_tap() const { return num_blocks() - 2; }
    int resolve_tap() const { return feature_tap < 0 ? default_tap() : feature_tap; }
};

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;
};

template <typename T>
size_t count_params(const std::vector<ParamRef<T>>& params) {
    size_t total = 0;
    for (const auto& p : params) total += p.value->numel();
    return total;
}

} // namespace gankd::nn
