#pragma once

#include <string>
#include <vector>

#include "gankd/data.hpp"
#include "gankd/layers.hpp"

namespace gankd::eval {

// K x K integer counts; rows are ground-truth classes, columns predictions.
struct ConfusionMatrix {
    int k = 0;
    std::vector<long long> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k_) : k(k_), counts(static_cast<size_t>(k_) * k_, 0) {}

    long long& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * k + pred]; }
    long long at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * k + pred]; }

    void add(const std::vector<uint8_t>& truth, const std::vector<uint8_t>& pred);
    void merge(const ConfusionMatrix& other);
    long long total() const;
};

// Pseudo-FCN scores plus run metadata; the confusion matrix is carried along
// so the three scores can always be recomputed from it.
struct MetricsRecord {
    double per_pixel_acc = 0;
    double per_class_acc = 0;
    double mean_iou = 0;
    long long n_images = 0;
    int epoch = -1;
    double val_l1 = -1;        // supervised l1 on the evaluated split, when available
    std::string run_label;     // teacher | scratch | vanilla | ours | ablation row name
    std::string config_hash;
    std::string dataset_hash;
    ConfusionMatrix confusion;
};

// per_pixel = trace/total; per_class and IoU average over classes that have
// ground-truth pixels.
void scores_from_confusion(const ConfusionMatrix& cm, double& per_pixel, double& per_class, double& mean_iou);

json record_to_json(const MetricsRecord& r);
MetricsRecord record_from_json(const json& j);

// Minimum training-set size under which the distillation error bound orders
// the students: (p_teacher / p_student)^4.
double sample_bound(size_t p_teacher, size_t p_student);

// --- reference segmenter (frozen scorer shared by all methods) ---

class Segmenter {
public:
    Segmenter() = default;
    Segmenter(int n_classes, uint64_t seed);

    Tensor<float> forward(const Tensor<float>& photos) const;                    // logits [n,K,H,W]
    std::vector<uint8_t> predict(const Tensor<float>& photos, int index) const;  // argmax labels of one image

    int n_classes() const { return n_classes_; }
    std::vector<nn::ParamRef<float>> params();
    static Tensor<float> slice_batch(const Tensor<float>& x, int index);
    double val_acc = -1; // held-out accuracy recorded at train time

private:
    int n_classes_ = 0;
    std::vector<nn::Conv2d<float>> convs_;
    friend Segmenter train_reference_segmenter(const data::Dataset& ds, int epochs);
};

constexpr double kSegmenterGate = 0.90;

// Trains the small fully convolutional segmenter on real (photo, label)
// pairs. Throws DataError (reporting the reached accuracy) when the held-out
// gate is not met, in which case generators must not be scored.
Segmenter train_reference_segmenter(const data::Dataset& ds, int epochs = 3);

// Cached by dataset content hash so every method is scored by the identical
// frozen segmenter.
Segmenter get_or_train_segmenter(const data::Dataset& ds, const std::string& cache_dir,
                                 const std::string& dataset_hash);

void save_segmenter(const std::string& path, Segmenter& seg, const std::string& dataset_hash);
Segmenter load_segmenter(const std::string& path);

// Scores generated photos against the input label maps.
MetricsRecord fcn_scores(const Segmenter& seg, const Tensor<float>& generated,
                         const std::vector<const std::vector<uint8_t>*>& label_maps);

// --- run comparison ---

struct ComparisonReport {
    std::string text;
    json table;
};

// Table of metrics with best-per-column marking. Records must share a
// dataset hash. When the six ablation row labels are present, rows follow
// the ablation layout order.
ComparisonReport compare_runs(const std::vector<MetricsRecord>& records);

// Canonical ablation row labels, in report order.
const std::vector<std::string>& ablation_row_labels();

} // namespace gankd::eval
