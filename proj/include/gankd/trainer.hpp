#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gankd/adam.hpp"
#include "gankd/checkpoint.hpp"
#include "gankd/data.hpp"
#include "gankd/eval.hpp"

namespace gankd::train {

enum class RunKind { teacher, scratch, distill };

inline const char* run_kind_name(RunKind k) {
    switch (k) {
        case RunKind::teacher: return "teacher";
        case RunKind::scratch: return "scratch";
        case RunKind::distill: return "distill";
    }
    return "?";
}

inline RunKind run_kind_from(const std::string& s) {
    if (s == "teacher") return RunKind::teacher;
    if (s == "scratch") return RunKind::scratch;
    if (s == "distill") return RunKind::distill;
    throw ConfigError("unknown role '" + s + "' (teacher|scratch|distill)");
}

struct TeacherNets {
    nn::UNetGenerator<float> gen;
    nn::PatchDiscriminator<float> disc;
};

struct TraceEntry {
    int step = 0;
    int epoch = 0;
    std::string term;
    double value = 0;
};

struct TrainHooks {
    // observation point for update ordering tests: called once per applied
    // parameter update with "G" or "D"
    std::function<void(int step, const char* which)> on_update;
};

struct TrainOptions {
    std::string run_dir;                    // empty = keep everything in memory
    std::string run_label;
    std::string config_hash;
    std::string dataset_hash;
    const eval::Segmenter* segmenter = nullptr;
    int resume_from_epoch = -1;             // 1-based epoch whose checkpoints to resume from
    const nn::UNetGenerator<float>* init_student_from = nullptr;
    TrainHooks hooks;
    bool quiet = true;
};

struct TrainResult {
    std::vector<TraceEntry> trace;
    std::vector<eval::MetricsRecord> metrics;
    int final_epoch = 0;
    bool bound_warning = false;
    double sample_bound_value = 0;
    nn::UNetGenerator<float> gen;
    nn::PatchDiscriminator<float> disc;
};

// Unified training loop. teacher/scratch run the supervised adversarial
// objective (gan + lambda * L1 to ground truth); distill runs Algorithm-1
// style updates against a frozen teacher (five discriminator evaluations per
// batch, generator update then discriminator update, both computed from the
// pre-update state).
TrainResult train_gan(const ExperimentConfig& cfg, RunKind kind, const data::Dataset& ds,
                      TeacherNets* teacher, const TrainOptions& opts);

// Convenience wrappers matching the three run kinds.
TrainResult train_teacher(const ExperimentConfig& cfg, const data::Dataset& ds, const TrainOptions& opts);
TrainResult train_student_scratch(const ExperimentConfig& cfg, const data::Dataset& ds, const TrainOptions& opts);
TrainResult distill(const ExperimentConfig& cfg, TeacherNets& teacher, const data::Dataset& ds,
                    const TrainOptions& opts);

TeacherNets load_teacher(const std::string& run_dir);

// Evaluates a generator on a split: pseudo-FCN scores (when a segmenter is
// given) plus the supervised L1 to ground truth.
eval::MetricsRecord evaluate_generator(const nn::UNetGenerator<float>& gen, const data::Dataset& ds,
                                       const std::string& split, const eval::Segmenter* seg);

std::string checkpoint_name(nn::Role role, int epoch);

} // namespace gankd::train
