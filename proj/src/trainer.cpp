#include "gankd/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gankd/losses.hpp"

namespace gankd::train {

namespace fs = std::filesystem;

std::string checkpoint_name(nn::Role role, int epoch) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.ckpt", nn::role_name(role), epoch);
    return buf;
}

namespace {

std::string trainstate_name(int epoch) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "trainstate_%04d.ckpt", epoch);
    return buf;
}

void append_jsonl(std::ofstream& f, const json& j) {
    if (f.is_open()) f << j.dump() << "\n";
}

struct AdamIo {
    static void add_to(Checkpoint& ck, const std::string& prefix, const AdamState& st,
                       std::vector<nn::ParamRef<float>>& params) {
        for (size_t i = 0; i < params.size(); ++i) {
            ck.add(prefix + ".m." + params[i].name, st.m.at(i));
            ck.add(prefix + ".v." + params[i].name, st.v.at(i));
        }
    }
    static void restore(const Checkpoint& ck, const std::string& prefix, AdamState& st,
                        std::vector<nn::ParamRef<float>>& params, long long t) {
        st.init(params);
        st.t = t;
        for (size_t i = 0; i < params.size(); ++i) {
            const Tensor<float>* m = ck.find(prefix + ".m." + params[i].name);
            const Tensor<float>* v = ck.find(prefix + ".v." + params[i].name);
            if (!m || !v) throw DataError("train state missing optimizer moments for " + params[i].name);
            st.m[i] = *m;
            st.v[i] = *v;
        }
    }
};

} // namespace

TeacherNets load_teacher(const std::string& run_dir) {
    // pick the highest-epoch generator/discriminator pair
    int best = -1;
    if (!fs::exists(run_dir)) throw DataError("teacher run directory not found: " + run_dir);
    for (const auto& e : fs::directory_iterator(run_dir)) {
        const std::string name = e.path().filename().string();
        int ep = 0;
        if (std::sscanf(name.c_str(), "teacher_generator_%d.ckpt", &ep) == 1) best = std::max(best, ep);
    }
    if (best < 0) throw DataError("no teacher_generator checkpoint found in " + run_dir);
    TeacherNets t{load_generator(run_dir + "/" + checkpoint_name(nn::Role::teacher_generator, best)),
                  load_discriminator(run_dir + "/" + checkpoint_name(nn::Role::teacher_discriminator, best))};
    t.gen.set_role(nn::Role::teacher_generator);
    t.disc.set_role(nn::Role::teacher_discriminator);
    return t;
}

eval::MetricsRecord evaluate_generator(const nn::UNetGenerator<float>& gen, const data::Dataset& ds,
                                       const std::string& split, const eval::Segmenter* seg) {
    const auto& samples = ds.split(split);
    const int k = ds.spec.n_classes, hw = ds.spec.image_size;
    eval::MetricsRecord rec;
    rec.confusion = eval::ConfusionMatrix(seg ? seg->n_classes() : k);
    double l1_sum = 0;
    long long n_done = 0;
    const int chunk = 16;
    for (size_t i = 0; i < samples.size(); i += chunk) {
        std::vector<int> idx;
        for (size_t j = i; j < std::min(samples.size(), i + chunk); ++j) idx.push_back(static_cast<int>(j));
        data::Batch b = data::make_batch(samples, idx, k, hw);
        Tensor<float> z = gen.forward(b.x);
        l1_sum += static_cast<double>(loss::supervised_l1(b.y, z)) * static_cast<double>(idx.size());
        if (seg) {
            for (size_t j = 0; j < idx.size(); ++j) {
                std::vector<uint8_t> pred = seg->predict(z, static_cast<int>(j));
                rec.confusion.add(*b.labels[j], pred);
            }
        }
        n_done += static_cast<long long>(idx.size());
    }
    rec.n_images = n_done;
    rec.val_l1 = l1_sum / static_cast<double>(n_done);
    if (seg) eval::scores_from_confusion(rec.confusion, rec.per_pixel_acc, rec.per_class_acc, rec.mean_iou);
    else {
        rec.per_pixel_acc = rec.per_class_acc = rec.mean_iou = -1;
    }
    return rec;
}

TrainResult train_gan(const ExperimentConfig& cfg, RunKind kind, const data::Dataset& ds,
                      TeacherNets* teacher, const TrainOptions& opts) {
    cfg.validate();
    const bool is_distill = kind == RunKind::distill;
    if (is_distill && !teacher) throw ConfigError("distill requires teacher checkpoints");

    const nn::GeneratorSpec gspec = kind == RunKind::teacher ? cfg.teacher_gen : cfg.student_gen;
    const nn::Role grole = kind == RunKind::teacher ? nn::Role::teacher_generator : nn::Role::student_generator;
    const nn::Role drole = kind == RunKind::teacher ? nn::Role::teacher_discriminator : nn::Role::student_discriminator;

    if (is_distill) {
        if (teacher->gen.spec().in_channels != gspec.in_channels ||
            teacher->gen.spec().out_channels != gspec.out_channels)
            throw ConfigError("teacher and student generator channel counts differ");
        if (teacher->disc.spec().in_channels != cfg.disc.in_channels)
            throw ConfigError("teacher discriminator channels incompatible with config");
    }

    // distillation weights; the supervised term belongs to the base objective
    // and is off in distillation (the student sees ground truth only through
    // its adversarial term)
    const loss::LossWeights kd = cfg.effective_weights();
    const double lambda_sup = is_distill ? 0.0 : cfg.weights.lambda_sup;
    const double beta1 = is_distill ? kd.beta1 : 0.0;
    const double gamma1 = is_distill ? kd.gamma1 : 0.0;
    const double beta2 = is_distill ? kd.beta2 : 0.0;
    const double gamma2 = is_distill ? kd.gamma2 : 0.0;
    const int tap_t = cfg.teacher_tap();
    const int tap_s = cfg.student_tap();
    if (teacher) teacher->disc.check_tap(tap_t);

    TrainResult res;
    res.gen = nn::UNetGenerator<float>(gspec, stream_seed(cfg.seed, "init_gen"), grole);
    res.disc = nn::PatchDiscriminator<float>(cfg.disc, stream_seed(cfg.seed, "init_disc"), drole);
    res.disc.check_tap(tap_s);
    if (opts.init_student_from) {
        nn::UNetGenerator<float> src = *opts.init_student_from;
        restore_params(res.gen, checkpoint_of(src));
    }

    auto gparams = res.gen.params();
    auto dparams = res.disc.params();
    AdamState adam_g, adam_d;
    adam_g.init(gparams);
    adam_d.init(dparams);

    if (is_distill) {
        res.sample_bound_value = eval::sample_bound(teacher->gen.param_count(), res.gen.param_count());
        if (static_cast<double>(ds.spec.n_train) < res.sample_bound_value) res.bound_warning = true;
    }

    std::ofstream trace_f, metrics_f;
    if (!opts.run_dir.empty()) {
        fs::create_directories(opts.run_dir);
        const bool resuming = opts.resume_from_epoch > 0;
        trace_f.open(opts.run_dir + "/trace.log", resuming ? std::ios::app : std::ios::trunc);
        metrics_f.open(opts.run_dir + "/metrics.log", resuming ? std::ios::app : std::ios::trunc);
    }
    if (res.bound_warning) {
        const std::string msg = "training set size " + std::to_string(ds.spec.n_train) +
                                " is below the distillation sample bound (p_T/p_S)^4 = " +
                                std::to_string(res.sample_bound_value);
        if (!opts.quiet) std::fprintf(stderr, "warning: %s\n", msg.c_str());
        append_jsonl(trace_f, json{{"warning", "sample_bound"}, {"message", msg}});
    }

    int start_epoch = 0;
    int step = 0;
    if (opts.resume_from_epoch > 0) {
        const std::string dir = opts.run_dir;
        Checkpoint gck = load_checkpoint(dir + "/" + checkpoint_name(grole, opts.resume_from_epoch));
        Checkpoint dck = load_checkpoint(dir + "/" + checkpoint_name(drole, opts.resume_from_epoch));
        restore_params(res.gen, gck);
        restore_params(res.disc, dck);
        Checkpoint st = load_checkpoint(dir + "/" + trainstate_name(opts.resume_from_epoch));
        start_epoch = st.meta.at("epoch").get<int>();
        step = st.meta.at("step").get<int>();
        AdamIo::restore(st, "g", adam_g, gparams, st.meta.at("t_g").get<long long>());
        AdamIo::restore(st, "d", adam_d, dparams, st.meta.at("t_d").get<long long>());
    }

    const int k = ds.spec.n_classes, hw = ds.spec.image_size;
    int evals_since_best = 0;
    double best_metric = -1;
    bool stopped_early = false;

    auto log_term = [&](int ep, const std::string& term, double v) {
        res.trace.push_back({step, ep, term, v});
        append_jsonl(trace_f, json{{"step", step}, {"epoch", ep}, {"term", term}, {"value", v}});
        if (!std::isfinite(v))
            throw NumericError("non-finite loss '" + term + "' at step " + std::to_string(step) +
                               "; last completed-epoch checkpoint retained");
    };

    for (int epoch = start_epoch; epoch < cfg.epochs && !stopped_early; ++epoch) {
        auto batches = data::epoch_batches(ds.train.size(), cfg.batch_size,
                                           stream_seed(cfg.seed, "order", static_cast<uint64_t>(epoch)));
        for (const auto& idx : batches) {
            ++step;
            data::Batch b = data::make_batch(ds.train, idx, k, hw);

            // ---- forward ----
            Rng drop_rng(stream_seed(cfg.seed, "dropout", static_cast<uint64_t>(step)));
            typename nn::UNetGenerator<float>::Ctx gctx;
            Tensor<float> z = res.gen.forward_train(b.x, drop_rng, gctx);
            Tensor<float> z_t;
            if (is_distill) z_t = teacher->gen.forward(b.x);

            typename nn::PatchDiscriminator<float>::Ctx ctx_fake, ctx_real, ctx_teach;
            Tensor<float> logits_fake = res.disc.forward(concat_channels(b.x, z), &ctx_fake);
            Tensor<float> logits_real = res.disc.forward(concat_channels(b.x, b.y), &ctx_real);
            const bool need_teach = is_distill && (beta2 > 0 || gamma2 > 0);
            Tensor<float> logits_teach;
            if (need_teach) logits_teach = res.disc.forward(concat_channels(b.x, z_t), &ctx_teach);

            // ---- generator gradient (pre-update discriminator state) ----
            const double gan_g = loss::gan_loss_g(logits_fake);
            double g_total = gan_g;
            Tensor<float> gz;
            {
                Tensor<float> glog = loss::bce_with_logits_grad(logits_fake, 1.0);
                Tensor<float> gin =
                    res.disc.backward(ctx_fake, {{res.disc.num_blocks() - 1, &glog}}, /*accum=*/false);
                gz = slice_channels(gin, k, gin.c());
            }
            double l1_sup = 0, kd_pix = 0, kd_perc = 0;
            if (lambda_sup > 0) {
                l1_sup = loss::supervised_l1(b.y, z);
                g_total += lambda_sup * l1_sup;
                axpy(1.0f, loss::mean_abs_diff_grad_b(b.y, z, lambda_sup), gz);
            }
            if (beta1 > 0) {
                kd_pix = loss::sample_l1(z_t, z, kd.square_l1);
                g_total += beta1 * kd_pix;
                axpy(1.0f, loss::sample_l1_grad_b(z_t, z, kd.square_l1, beta1), gz);
            }
            if (gamma1 > 0) {
                Tensor<float> f_t = teacher->disc.forward_features(z_t, b.x, tap_t);
                typename nn::PatchDiscriminator<float>::Ctx pc;
                Tensor<float> f_s = teacher->disc.forward_features(z, b.x, tap_t, &pc);
                kd_perc = loss::sample_l1(f_t, f_s, kd.square_l1);
                g_total += gamma1 * kd_perc;
                Tensor<float> gf = loss::sample_l1_grad_b(f_t, f_s, kd.square_l1, gamma1);
                Tensor<float> gin = teacher->disc.backward(pc, {{tap_t, &gf}}, /*accum=*/false);
                axpy(1.0f, slice_channels(gin, k, gin.c()), gz);
            }
            res.gen.zero_grads();
            res.gen.backward(gctx, gz, /*accum=*/true);

            // ---- discriminator gradient (same pre-update evaluations) ----
            const double gan_d = loss::gan_loss_d(logits_real, logits_fake);
            double d_total = 0.5 * gan_d; // adversarial objective halved while optimizing D
            res.disc.zero_grads();
            Tensor<float> g_real = loss::bce_with_logits_grad(logits_real, 1.0, 0.5);
            Tensor<float> g_fake = loss::bce_with_logits_grad(logits_fake, 0.0, 0.5);
            std::vector<std::pair<int, const Tensor<float>*>> inj_real{{res.disc.num_blocks() - 1, &g_real}};
            std::vector<std::pair<int, const Tensor<float>*>> inj_fake{{res.disc.num_blocks() - 1, &g_fake}};
            std::vector<std::pair<int, const Tensor<float>*>> inj_teach;
            double teach_real = 0, tri = 0;
            Tensor<float> g_teach_log;
            loss::TripletGrads<float> tg;
            if (need_teach && beta2 > 0) {
                teach_real = loss::bce_with_logits(logits_teach, 1.0);
                d_total += beta2 * teach_real;
                g_teach_log = loss::bce_with_logits_grad(logits_teach, 1.0, beta2);
                inj_teach.emplace_back(res.disc.num_blocks() - 1, &g_teach_log);
            }
            if (need_teach && gamma2 > 0) {
                tg = loss::triplet_feature_grads(ctx_real.block_out[tap_s], ctx_teach.block_out[tap_s],
                                                 ctx_fake.block_out[tap_s], kd.alpha_margin, gamma2);
                tri = tg.value;
                d_total += gamma2 * tri;
                inj_real.emplace_back(tap_s, &tg.g_real);
                inj_teach.emplace_back(tap_s, &tg.g_teacher);
                inj_fake.emplace_back(tap_s, &tg.g_student);
            }
            res.disc.backward(ctx_real, inj_real, /*accum=*/true);
            res.disc.backward(ctx_fake, inj_fake, /*accum=*/true);
            if (!inj_teach.empty()) res.disc.backward(ctx_teach, inj_teach, /*accum=*/true);

            // ---- apply updates; both gradients came from the pre-update
            // ---- state, distillation applies G first, the base loop D first
            if (is_distill) {
                adam_g.step(gparams, cfg.optim);
                if (opts.hooks.on_update) opts.hooks.on_update(step, "G");
                adam_d.step(dparams, cfg.optim);
                if (opts.hooks.on_update) opts.hooks.on_update(step, "D");
            } else {
                adam_d.step(dparams, cfg.optim);
                if (opts.hooks.on_update) opts.hooks.on_update(step, "D");
                adam_g.step(gparams, cfg.optim);
                if (opts.hooks.on_update) opts.hooks.on_update(step, "G");
            }

            log_term(epoch, "gan_g", gan_g);
            if (lambda_sup > 0) log_term(epoch, "l1_sup", l1_sup);
            if (beta1 > 0) log_term(epoch, "kd_pixel", kd_pix);
            if (gamma1 > 0) log_term(epoch, "kd_perc", kd_perc);
            log_term(epoch, "gan_d", gan_d);
            if (need_teach && beta2 > 0) log_term(epoch, "teacher_real", teach_real);
            if (need_teach && gamma2 > 0) log_term(epoch, "triplet", tri);
            log_term(epoch, "g_total", g_total);
            log_term(epoch, "d_total", d_total);
        }

        const int epoch_1 = epoch + 1;
        if (epoch_1 % cfg.eval_every == 0 || epoch_1 == cfg.epochs) {
            eval::MetricsRecord rec = evaluate_generator(res.gen, ds, "val", opts.segmenter);
            rec.epoch = epoch_1;
            rec.run_label = opts.run_label;
            rec.config_hash = opts.config_hash;
            rec.dataset_hash = opts.dataset_hash;
            res.metrics.push_back(rec);
            append_jsonl(metrics_f, eval::record_to_json(rec));
            if (cfg.early_stop.enabled && opts.segmenter) {
                if (rec.per_pixel_acc > best_metric) {
                    best_metric = rec.per_pixel_acc;
                    evals_since_best = 0;
                } else if (++evals_since_best >= cfg.early_stop.patience) {
                    stopped_early = true;
                }
            }
        }
        if (!opts.run_dir.empty() && (epoch_1 % cfg.checkpoint_every == 0 || epoch_1 == cfg.epochs || stopped_early)) {
            Checkpoint gck = checkpoint_of(res.gen);
            save_checkpoint(opts.run_dir + "/" + checkpoint_name(grole, epoch_1), gck);
            Checkpoint dck = checkpoint_of(res.disc);
            save_checkpoint(opts.run_dir + "/" + checkpoint_name(drole, epoch_1), dck);
            Checkpoint st;
            st.meta["epoch"] = epoch_1;
            st.meta["step"] = step;
            st.meta["t_g"] = adam_g.t;
            st.meta["t_d"] = adam_d.t;
            AdamIo::add_to(st, "g", adam_g, gparams);
            AdamIo::add_to(st, "d", adam_d, dparams);
            save_checkpoint(opts.run_dir + "/" + trainstate_name(epoch_1), st);
        }
        res.final_epoch = epoch_1;
    }
    return res;
}

TrainResult train_teacher(const ExperimentConfig& cfg, const data::Dataset& ds, const TrainOptions& opts) {
    return train_gan(cfg, RunKind::teacher, ds, nullptr, opts);
}
TrainResult train_student_scratch(const ExperimentConfig& cfg, const data::Dataset& ds, const TrainOptions& opts) {
    return train_gan(cfg, RunKind::scratch, ds, nullptr, opts);
}
TrainResult distill(const ExperimentConfig& cfg, TeacherNets& teacher, const data::Dataset& ds,
                    const TrainOptions& opts) {
    return train_gan(cfg, RunKind::distill, ds, &teacher, opts);
}

} // namespace gankd::train
