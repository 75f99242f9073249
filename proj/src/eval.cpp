#include "gankd/eval.hpp"

#include <algorithm>
#include <filesystem>

#include "gankd/adam.hpp"
#include "gankd/checkpoint.hpp"

namespace gankd::eval {

namespace fs = std::filesystem;

void ConfusionMatrix::add(const std::vector<uint8_t>& truth, const std::vector<uint8_t>& pred) {
    if (truth.size() != pred.size()) throw ShapeError("confusion add: size mismatch");
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || pred[i] >= k) throw DataError("confusion add: class id out of range");
        ++at(truth[i], pred[i]);
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k != k) throw ShapeError("confusion merge: class count mismatch");
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

long long ConfusionMatrix::total() const {
    long long t = 0;
    for (long long c : counts) t += c;
    return t;
}

void scores_from_confusion(const ConfusionMatrix& cm, double& per_pixel, double& per_class, double& mean_iou) {
    const long long total = cm.total();
    if (total == 0) throw DataError("no evaluated pixels");
    long long trace = 0;
    double acc_sum = 0, iou_sum = 0;
    int present = 0;
    for (int c = 0; c < cm.k; ++c) {
        long long row = 0, col = 0;
        for (int j = 0; j < cm.k; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const long long diag = cm.at(c, c);
        trace += diag;
        if (row == 0) continue; // classes absent from ground truth are excluded
        ++present;
        acc_sum += static_cast<double>(diag) / static_cast<double>(row);
        iou_sum += static_cast<double>(diag) / static_cast<double>(row + col - diag);
    }
    per_pixel = static_cast<double>(trace) / static_cast<double>(total);
    per_class = present ? acc_sum / present : 0.0;
    mean_iou = present ? iou_sum / present : 0.0;
}

json record_to_json(const MetricsRecord& r) {
    json j{{"per_pixel_acc", r.per_pixel_acc},
           {"per_class_acc", r.per_class_acc},
           {"mean_iou", r.mean_iou},
           {"n_images", r.n_images},
           {"epoch", r.epoch},
           {"val_l1", r.val_l1},
           {"run_label", r.run_label},
           {"config_hash", r.config_hash},
           {"dataset_hash", r.dataset_hash},
           {"confusion_k", r.confusion.k},
           {"confusion", r.confusion.counts}};
    return j;
}

MetricsRecord record_from_json(const json& j) {
    MetricsRecord r;
    j.at("per_pixel_acc").get_to(r.per_pixel_acc);
    j.at("per_class_acc").get_to(r.per_class_acc);
    j.at("mean_iou").get_to(r.mean_iou);
    r.n_images = j.value("n_images", 0LL);
    r.epoch = j.value("epoch", -1);
    r.val_l1 = j.value("val_l1", -1.0);
    r.run_label = j.value("run_label", "");
    r.config_hash = j.value("config_hash", "");
    r.dataset_hash = j.value("dataset_hash", "");
    r.confusion.k = j.value("confusion_k", 0);
    if (j.contains("confusion")) r.confusion.counts = j.at("confusion").get<std::vector<long long>>();
    return r;
}

double sample_bound(size_t p_teacher, size_t p_student) {
    if (p_student == 0) throw ConfigError("sample_bound: student parameter count must be >= 1");
    const double r = static_cast<double>(p_teacher) / static_cast<double>(p_student);
    return r * r * r * r;
}

// --- segmenter ---

namespace {
constexpr int kSegWidth = 32;
}

Segmenter::Segmenter(int n_classes, uint64_t seed) : n_classes_(n_classes) {
    convs_.emplace_back(3, kSegWidth, 3, 1, 1);
    convs_.emplace_back(kSegWidth, kSegWidth, 3, 1, 1);
    convs_.emplace_back(kSegWidth, kSegWidth, 3, 1, 1);
    convs_.emplace_back(kSegWidth, n_classes, 3, 1, 1);
    for (size_t i = 0; i < convs_.size(); ++i) convs_[i].init(seed, "seg" + std::to_string(i));
}

Tensor<float> Segmenter::forward(const Tensor<float>& photos) const {
    Tensor<float> t = convs_[0].forward(photos);
    for (size_t i = 1; i < convs_.size(); ++i) t = convs_[i].forward(nn::relu(t));
    return t;
}

std::vector<uint8_t> Segmenter::predict(const Tensor<float>& photos, int index) const {
    Tensor<float> logits = forward(slice_batch(photos, index));
    const size_t plane = static_cast<size_t>(logits.h()) * logits.w();
    std::vector<uint8_t> out(plane);
    for (size_t p = 0; p < plane; ++p) {
        int best = 0;
        float bv = logits.data[p];
        for (int c = 1; c < n_classes_; ++c) {
            const float v = logits.data[static_cast<size_t>(c) * plane + p];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        out[p] = static_cast<uint8_t>(best);
    }
    return out;
}

Tensor<float> Segmenter::slice_batch(const Tensor<float>& x, int index) {
    Tensor<float> out(1, x.c(), x.h(), x.w());
    const size_t sz = static_cast<size_t>(x.c()) * x.h() * x.w();
    std::copy_n(x.data.begin() + static_cast<size_t>(index) * sz, sz, out.data.begin());
    return out;
}

std::vector<nn::ParamRef<float>> Segmenter::params() {
    std::vector<nn::ParamRef<float>> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
        out.push_back({"seg" + std::to_string(i) + ".w", &convs_[i].w, &convs_[i].gw});
        out.push_back({"seg" + std::to_string(i) + ".b", &convs_[i].b, &convs_[i].gb});
    }
    return out;
}

namespace {

// mean softmax cross-entropy over pixels; fills glogits
double pixel_ce(const Tensor<float>& logits, const std::vector<const std::vector<uint8_t>*>& labels,
                Tensor<float>* glogits) {
    const int n = logits.n(), k = logits.c();
    const size_t plane = static_cast<size_t>(logits.h()) * logits.w();
    const double inv = 1.0 / (static_cast<double>(n) * plane);
    double total = 0;
    if (glogits) *glogits = Tensor<float>::zeros_like(logits);
    for (int b = 0; b < n; ++b) {
        const auto& lab = *labels[b];
        for (size_t p = 0; p < plane; ++p) {
            double mx = -1e30;
            for (int c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(logits.data[(static_cast<size_t>(b) * k + c) * plane + p]));
            double denom = 0;
            for (int c = 0; c < k; ++c) denom += std::exp(logits.data[(static_cast<size_t>(b) * k + c) * plane + p] - mx);
            const int t = lab[p];
            const double logp = logits.data[(static_cast<size_t>(b) * k + t) * plane + p] - mx - std::log(denom);
            total -= logp;
            if (glogits) {
                for (int c = 0; c < k; ++c) {
                    const size_t idx = (static_cast<size_t>(b) * k + c) * plane + p;
                    const double soft = std::exp(logits.data[idx] - mx) / denom;
                    glogits->data[idx] = static_cast<float>((soft - (c == t ? 1.0 : 0.0)) * inv);
                }
            }
        }
    }
    return total * inv;
}

double segment_accuracy(const Segmenter& seg, const std::vector<data::PairedSample>& samples, int n_classes, int hw) {
    ConfusionMatrix cm(n_classes);
    const int chunk = 16;
    for (size_t i = 0; i < samples.size(); i += chunk) {
        std::vector<int> idx;
        for (size_t j = i; j < std::min(samples.size(), i + chunk); ++j) idx.push_back(static_cast<int>(j));
        data::Batch b = data::make_batch(samples, idx, n_classes, hw);
        for (size_t j = 0; j < idx.size(); ++j) {
            std::vector<uint8_t> pred = seg.predict(b.y, static_cast<int>(j));
            cm.add(*b.labels[j], pred);
        }
    }
    double pp, pc, iou;
    scores_from_confusion(cm, pp, pc, iou);
    return pp;
}

} // namespace

Segmenter train_reference_segmenter(const data::Dataset& ds, int epochs) {
    const int k = ds.spec.n_classes, hw = ds.spec.image_size;
    Segmenter seg(k, stream_seed(ds.spec.seed, "segmenter"));
    auto params = seg.params();
    train::AdamState adam;
    adam.init(params);
    OptimConfig opt;
    opt.lr = 1e-3;
    opt.beta1 = 0.9;

    const int batch = 8;
    for (int e = 0; e < epochs; ++e) {
        auto batches = data::epoch_batches(ds.train.size(), batch, stream_seed(ds.spec.seed, "seg_order", e));
        for (const auto& idx : batches) {
            data::Batch b = data::make_batch(ds.train, idx, k, hw);
            // forward with saved activations
            std::vector<Tensor<float>> ins;
            Tensor<float> t = b.y;
            for (size_t li = 0; li < seg.convs_.size(); ++li) {
                ins.push_back(t);
                t = seg.convs_[li].forward(t);
                if (li + 1 < seg.convs_.size()) {
                    ins.push_back(t); // relu input
                    t = nn::relu(t);
                }
            }
            Tensor<float> glog;
            pixel_ce(t, b.labels, &glog);
            for (auto& c : seg.convs_) c.zero_grads();
            Tensor<float> g = std::move(glog);
            for (int li = static_cast<int>(seg.convs_.size()) - 1; li >= 0; --li) {
                if (li + 1 < static_cast<int>(seg.convs_.size())) {
                    g = nn::relu_backward(ins[2 * li + 1], g);
                }
                g = seg.convs_[li].backward(ins[2 * li], g, true);
            }
            adam.step(params, opt);
        }
    }
    seg.val_acc = segment_accuracy(seg, ds.val, k, hw);
    if (seg.val_acc < kSegmenterGate)
        throw DataError("reference segmenter accuracy " + std::to_string(seg.val_acc) +
                        " below the " + std::to_string(kSegmenterGate) + " gate; refusing to score generators");
    return seg;
}

void save_segmenter(const std::string& path, Segmenter& seg, const std::string& dataset_hash) {
    Checkpoint ck;
    ck.meta["kind"] = "segmenter";
    ck.meta["n_classes"] = seg.n_classes();
    ck.meta["val_acc"] = seg.val_acc;
    ck.meta["dataset_hash"] = dataset_hash;
    for (auto& p : seg.params()) ck.add(p.name, *p.value);
    save_checkpoint(path, ck);
}

Segmenter load_segmenter(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta.value("kind", "") != "segmenter") throw DataError("not a segmenter checkpoint: " + path);
    Segmenter seg(ck.meta.at("n_classes").get<int>(), 0);
    seg.val_acc = ck.meta.value("val_acc", -1.0);
    for (auto& p : seg.params()) {
        const Tensor<float>* src = ck.find(p.name);
        if (!src || src->shape != p.value->shape) throw DataError("segmenter checkpoint array mismatch: " + p.name);
        *p.value = *src;
    }
    return seg;
}

Segmenter get_or_train_segmenter(const data::Dataset& ds, const std::string& cache_dir,
                                 const std::string& dataset_hash) {
    fs::create_directories(cache_dir);
    const std::string path = cache_dir + "/segmenter_" + dataset_hash.substr(0, 16) + ".ckpt";
    if (fs::exists(path)) {
        Segmenter seg = load_segmenter(path);
        if (seg.val_acc < kSegmenterGate)
            throw DataError("cached segmenter accuracy " + std::to_string(seg.val_acc) + " below gate");
        return seg;
    }
    Segmenter seg = train_reference_segmenter(ds);
    save_segmenter(path, seg, dataset_hash);
    return seg;
}

MetricsRecord fcn_scores(const Segmenter& seg, const Tensor<float>& generated,
                         const std::vector<const std::vector<uint8_t>*>& label_maps) {
    if (generated.n() != static_cast<int>(label_maps.size()))
        throw ShapeError("fcn_scores: batch size does not match label map count");
    if (generated.n() == 0) throw DataError("fcn_scores: no images");
    MetricsRecord r;
    r.confusion = ConfusionMatrix(seg.n_classes());
    for (int i = 0; i < generated.n(); ++i) {
        std::vector<uint8_t> pred = seg.predict(generated, i);
        r.confusion.add(*label_maps[i], pred);
    }
    scores_from_confusion(r.confusion, r.per_pixel_acc, r.per_class_acc, r.mean_iou);
    r.n_images = generated.n();
    return r;
}

// --- comparison ---

const std::vector<std::string>& ablation_row_labels() {
    static const std::vector<std::string> rows = {"baseline", "L_perc", "L_L1+L_perc", "L_GT", "L_GT+L_tri",
                                                  "L_L1+L_perc+L_GT+L_tri"};
    return rows;
}

ComparisonReport compare_runs(const std::vector<MetricsRecord>& records) {
    if (records.size() < 2) throw ComparabilityError("compare_runs needs at least 2 records");
    for (const auto& r : records)
        if (r.dataset_hash != records.front().dataset_hash)
            throw ComparabilityError("records evaluated on different datasets (hash mismatch)");

    std::vector<const MetricsRecord*> rows;
    for (const auto& r : records) rows.push_back(&r);
    // ablation layout when exactly the six ablation rows are present
    const auto& abl = ablation_row_labels();
    if (records.size() == abl.size()) {
        bool is_ablation = true;
        std::vector<const MetricsRecord*> ordered;
        for (const auto& name : abl) {
            const MetricsRecord* found = nullptr;
            for (const auto& r : records)
                if (r.run_label == name) found = &r;
            if (!found) {
                is_ablation = false;
                break;
            }
            ordered.push_back(found);
        }
        if (is_ablation) rows = std::move(ordered);
    }

    double best_pp = -1, best_pc = -1, best_iou = -1;
    for (auto* r : rows) {
        best_pp = std::max(best_pp, r->per_pixel_acc);
        best_pc = std::max(best_pc, r->per_class_acc);
        best_iou = std::max(best_iou, r->mean_iou);
    }

    ComparisonReport rep;
    rep.table = json::array();
    char buf[256];
    std::string text = "method                    per-pixel   per-class   mean-IoU\n";
    for (auto* r : rows) {
        auto mark = [&](double v, double best) { return v == best ? "*" : " "; };
        std::snprintf(buf, sizeof(buf), "%-24s  %8.4f%s  %8.4f%s  %8.4f%s\n", r->run_label.c_str(), r->per_pixel_acc,
                      mark(r->per_pixel_acc, best_pp), r->per_class_acc, mark(r->per_class_acc, best_pc), r->mean_iou,
                      mark(r->mean_iou, best_iou));
        text += buf;
        json row = record_to_json(*r);
        row.erase("confusion");
        row["best_per_pixel"] = r->per_pixel_acc == best_pp;
        row["best_per_class"] = r->per_class_acc == best_pc;
        row["best_mean_iou"] = r->mean_iou == best_iou;
        rep.table.push_back(std::move(row));
    }
    rep.text = std::move(text);
    return rep;
}

} // namespace gankd::eval
