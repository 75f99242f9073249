#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "gankd/losses.hpp"
#include "gankd/model.hpp"

namespace gankd {

using json = nlohmann::json;

enum class Complexity { flat, noisy, textured };

inline const char* complexity_name(Complexity c) {
    switch (c) {
        case Complexity::flat: return "flat";
        case Complexity::noisy: return "noisy";
        case Complexity::textured: return "textured";
    }
    return "?";
}

inline Complexity complexity_from(const std::string& s) {
    if (s == "flat") return Complexity::flat;
    if (s == "noisy") return Complexity::noisy;
    if (s == "textured") return Complexity::textured;
    throw ConfigError("unknown texture complexity '" + s + "' (flat|noisy|textured)");
}

struct DatasetSpec {
    uint64_t seed = 1;
    int n_classes = 6;
    int image_size = 48;
    int n_train = 512;
    int n_val = 64;
    int n_test = 128;
    Complexity complexity = Complexity::noisy;

    void validate() const {
        if (n_classes < 1 || n_classes > 64) throw ConfigError("DatasetSpec.n_classes must be in [1, 64]");
        if (image_size < 8) throw ConfigError("DatasetSpec.image_size must be >= 8");
        if (n_train < 1 || n_val < 1 || n_test < 1) throw ConfigError("DatasetSpec split counts must be >= 1");
    }
};

struct OptimConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct EarlyStop {
    bool enabled = false;
    int patience = 5;
};

// Ablation toggles; when a mask is present, terms not listed have their
// weights zeroed (L1 -> beta1, perc -> gamma1, GT -> beta2, tri -> gamma2).
using AblationMask = std::set<std::string>;

struct ExperimentConfig {
    uint64_t seed = 1;
    DatasetSpec dataset;
    nn::GeneratorSpec teacher_gen{0, 3, 32, 4, true};   // in_channels 0 = derive from dataset
    nn::GeneratorSpec student_gen{0, 3, 16, 4, true};
    nn::DiscriminatorSpec disc{0, 32, 2, -1};
    int student_disc_tap = -1;                          // -1 = same tap as disc.feature_tap
    loss::LossWeights weights;
    OptimConfig optim;
    int epochs = 30;
    int batch_size = 4;
    int eval_every = 1;
    int checkpoint_every = 1;
    std::optional<AblationMask> ablation_mask;
    EarlyStop early_stop;

    void derive_channels() {
        if (teacher_gen.in_channels == 0) teacher_gen.in_channels = dataset.n_classes;
        if (student_gen.in_channels == 0) student_gen.in_channels = dataset.n_classes;
        if (disc.in_channels == 0) disc.in_channels = dataset.n_classes + teacher_gen.out_channels;
    }

    void validate() const {
        dataset.validate();
        teacher_gen.validate();
        student_gen.validate();
        disc.validate();
        weights.validate();
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (eval_every < 1 || checkpoint_every < 1) throw ConfigError("eval_every/checkpoint_every must be >= 1");
        if (dataset.n_train < batch_size) throw ConfigError("n_train must be >= batch_size");
        if (dataset.image_size % (1 << teacher_gen.depth) != 0 || dataset.image_size % (1 << student_gen.depth) != 0)
            throw ConfigError("image_size must be divisible by 2^depth of both generators");
        if (teacher_gen.in_channels != student_gen.in_channels || teacher_gen.out_channels != student_gen.out_channels)
            throw ConfigError("teacher and student generators must share in/out channels");
        if (disc.in_channels != teacher_gen.in_channels + teacher_gen.out_channels)
            throw ConfigError("disc.in_channels must equal generator in_channels + out_channels");
        if (ablation_mask) {
            for (const auto& t : *ablation_mask)
                if (t != "L1" && t != "perc" && t != "GT" && t != "tri")
                    throw ConfigError("unknown ablation toggle '" + t + "' (L1|perc|GT|tri)");
        }
    }

    // Weights after applying the ablation mask.
    loss::LossWeights effective_weights() const {
        loss::LossWeights w = weights;
        if (ablation_mask) {
            if (!ablation_mask->count("L1")) w.beta1 = 0;
            if (!ablation_mask->count("perc")) w.gamma1 = 0;
            if (!ablation_mask->count("GT")) w.beta2 = 0;
            if (!ablation_mask->count("tri")) w.gamma2 = 0;
        }
        return w;
    }

    int teacher_tap() const { return disc.resolve_tap(); }
    int student_tap() const {
        if (student_disc_tap < 0) return disc.resolve_tap();
        return student_disc_tap;
    }
};

// --- json ---

namespace nn {
inline void to_json(json& j, const GeneratorSpec& s) {
    j = json{{"in_channels", s.in_channels}, {"out_channels", s.out_channels}, {"base_width", s.base_width},
             {"depth", s.depth},             {"use_dropout", s.use_dropout}};
}
inline void from_json(const json& j, GeneratorSpec& s) {
    s = GeneratorSpec{};
    if (j.contains("in_channels")) j.at("in_channels").get_to(s.in_channels);
    if (j.contains("out_channels")) j.at("out_channels").get_to(s.out_channels);
    if (j.contains("base_width")) j.at("base_width").get_to(s.base_width);
    if (j.contains("depth")) j.at("depth").get_to(s.depth);
    if (j.contains("use_dropout")) j.at("use_dropout").get_to(s.use_dropout);
}
inline void to_json(json& j, const DiscriminatorSpec& s) {
    j = json{{"in_channels", s.in_channels},
             {"base_width", s.base_width},
             {"num_layers", s.num_layers},
             {"feature_tap", s.feature_tap}};
}
inline void from_json(const json& j, DiscriminatorSpec& s) {
    s = DiscriminatorSpec{};
    if (j.contains("in_channels")) j.at("in_channels").get_to(s.in_channels);
    if (j.contains("base_width")) j.at("base_width").get_to(s.base_width);
    if (j.contains("num_layers")) j.at("num_layers").get_to(s.num_layers);
    if (j.contains("feature_tap")) j.at("feature_tap").get_to(s.feature_tap);
}
} // namespace nn

namespace loss {
inline void to_json(json& j, const LossWeights& w) {
    j = json{{"lambda_sup", w.lambda_sup}, {"gamma_g", w.gamma_g},           {"beta1", w.beta1},
             {"gamma1", w.gamma1},         {"beta2", w.beta2},               {"gamma2", w.gamma2},
             {"alpha_margin", w.alpha_margin}, {"square_l1", w.square_l1}};
}
inline void from_json(const json& j, LossWeights& w) {
    w = LossWeights{};
    if (j.contains("lambda_sup")) j.at("lambda_sup").get_to(w.lambda_sup);
    if (j.contains("gamma_g")) j.at("gamma_g").get_to(w.gamma_g);
    if (j.contains("beta1")) j.at("beta1").get_to(w.beta1);
    if (j.contains("gamma1")) j.at("gamma1").get_to(w.gamma1);
    if (j.contains("beta2")) j.at("beta2").get_to(w.beta2);
    if (j.contains("gamma2")) j.at("gamma2").get_to(w.gamma2);
    if (j.contains("alpha_margin")) j.at("alpha_margin").get_to(w.alpha_margin);
    if (j.contains("square_l1")) j.at("square_l1").get_to(w.square_l1);
}
} // namespace loss

inline void to_json(json& j, const DatasetSpec& s) {
    j = json{{"seed", s.seed},       {"n_classes", s.n_classes}, {"image_size", s.image_size},
             {"n_train", s.n_train}, {"n_val", s.n_val},         {"n_test", s.n_test},
             {"complexity", complexity_name(s.complexity)}};
}
inline void from_json(const json& j, DatasetSpec& s) {
    s = DatasetSpec{};
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
    if (j.contains("n_classes")) j.at("n_classes").get_to(s.n_classes);
    if (j.contains("image_size")) j.at("image_size").get_to(s.image_size);
    if (j.contains("n_train")) j.at("n_train").get_to(s.n_train);
    if (j.contains("n_val")) j.at("n_val").get_to(s.n_val);
    if (j.contains("n_test")) j.at("n_test").get_to(s.n_test);
    if (j.contains("complexity")) s.complexity = complexity_from(j.at("complexity").get<std::string>());
}

inline void to_json(json& j, const OptimConfig& o) {
    j = json{{"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}};
}
inline void from_json(const json& j, OptimConfig& o) {
    o = OptimConfig{};
    if (j.contains("lr")) j.at("lr").get_to(o.lr);
    if (j.contains("beta1")) j.at("beta1").get_to(o.beta1);
    if (j.contains("beta2")) j.at("beta2").get_to(o.beta2);
    if (j.contains("eps")) j.at("eps").get_to(o.eps);
}

inline void to_json(json& j, const EarlyStop& e) {
    j = json{{"enabled", e.enabled}, {"patience", e.patience}};
}
inline void from_json(const json& j, EarlyStop& e) {
    e = EarlyStop{};
    if (j.contains("enabled")) j.at("enabled").get_to(e.enabled);
    if (j.contains("patience")) j.at("patience").get_to(e.patience);
}

inline void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"seed", c.seed},
             {"dataset", c.dataset},
             {"teacher_gen", c.teacher_gen},
             {"student_gen", c.student_gen},
             {"disc", c.disc},
             {"student_disc_tap", c.student_disc_tap},
             {"weights", c.weights},
             {"optim", c.optim},
             {"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"eval_every", c.eval_every},
             {"checkpoint_every", c.checkpoint_every},
             {"early_stop", c.early_stop}};
    if (c.ablation_mask)
        j["ablation_mask"] = std::vector<std::string>(c.ablation_mask->begin(), c.ablation_mask->end());
    else
        j["ablation_mask"] = nullptr;
}
inline void from_json(const json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("dataset")) j.at("dataset").get_to(c.dataset);
    if (j.contains("teacher_gen")) j.at("teacher_gen").get_to(c.teacher_gen);
    if (j.contains("student_gen")) j.at("student_gen").get_to(c.student_gen);
    if (j.contains("disc")) j.at("disc").get_to(c.disc);
    if (j.contains("student_disc_tap")) j.at("student_disc_tap").get_to(c.student_disc_tap);
    if (j.contains("weights")) j.at("weights").get_to(c.weights);
    if (j.contains("optim")) j.at("optim").get_to(c.optim);
    if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
    if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
    if (j.contains("eval_every")) j.at("eval_every").get_to(c.eval_every);
    if (j.contains("checkpoint_every")) j.at("checkpoint_every").get_to(c.checkpoint_every);
    if (j.contains("early_stop")) j.at("early_stop").get_to(c.early_stop);
    if (j.contains("ablation_mask") && !j.at("ablation_mask").is_null()) {
        AblationMask m;
        for (const auto& t : j.at("ablation_mask")) m.insert(t.get<std::string>());
        c.ablation_mask = m;
    }
    c.derive_channels();
}

ExperimentConfig load_config_file(const std::string& path);

} // namespace gankd
