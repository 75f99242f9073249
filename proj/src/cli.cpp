#include "gankd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "gankd/manifest.hpp"
#include "gankd/report.hpp"
#include "gankd/trainer.hpp"

namespace gankd::cli {

namespace fs = std::filesystem;

std::string state_root() {
    const char* env = std::getenv("GANKD_STATE_ROOT");
    return env && *env ? env : "./runs";
}

namespace {

std::string join_args(const std::vector<std::string>& args) {
    std::string out = "gankd";
    for (const auto& a : args) out += " " + a;
    return out;
}

void require_fresh(const std::string& out_dir, bool force) {
    if (!force && has_manifest(out_dir))
        throw ConfigError("output directory " + out_dir + " already holds a completed run (use --force to redo)");
}

std::vector<std::string> list_run_files(const std::string& dir) {
    std::vector<std::string> rel;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name == "manifest.json") continue;
        if (e.is_regular_file()) rel.push_back(name);
    }
    std::sort(rel.begin(), rel.end());
    return rel;
}

eval::MetricsRecord final_metrics(const std::string& run_dir) {
    std::ifstream f(run_dir + "/metrics.log");
    if (!f) throw DataError("missing metrics.log in " + run_dir);
    std::string line, last;
    while (std::getline(f, line))
        if (!line.empty()) last = line;
    if (last.empty()) throw DataError("empty metrics.log in " + run_dir);
    return eval::record_from_json(json::parse(last));
}

std::string classify_run_label(const ExperimentConfig& cfg, train::RunKind kind) {
    if (kind == train::RunKind::teacher) return "teacher";
    if (kind == train::RunKind::scratch) return "scratch";
    const loss::LossWeights w = cfg.effective_weights();
    if (w.beta1 > 0 && w.gamma1 == 0 && w.beta2 == 0 && w.gamma2 == 0) return "vanilla";
    if (w.beta1 > 0 && w.gamma1 > 0 && w.beta2 > 0 && w.gamma2 > 0) return "ours";
    return "distill";
}

int latest_epoch(const std::string& run_dir, nn::Role role) {
    int best = -1;
    const std::string pattern = std::string(nn::role_name(role)) + "_%d.ckpt";
    for (const auto& e : fs::directory_iterator(run_dir)) {
        int ep = 0;
        if (std::sscanf(e.path().filename().string().c_str(), pattern.c_str(), &ep) == 1) best = std::max(best, ep);
    }
    return best;
}

nn::UNetGenerator<float> load_final_generator(const std::string& run_dir) {
    for (nn::Role r : {nn::Role::student_generator, nn::Role::teacher_generator}) {
        const int ep = latest_epoch(run_dir, r);
        if (ep >= 0) return load_generator(run_dir + "/" + train::checkpoint_name(r, ep));
    }
    throw DataError("no generator checkpoint in " + run_dir);
}

struct DatasetArgs {
    std::string out_dir, complexity = "noisy";
    DatasetSpec spec;
    bool preview = false, force = false;
};

void run_dataset(const DatasetArgs& a, const std::string& command) {
    DatasetSpec spec = a.spec;
    spec.complexity = complexity_from(a.complexity);
    spec.validate();
    require_fresh(a.out_dir, a.force);

    data::Dataset ds = data::generate_dataset(spec);
    data::save_dataset(a.out_dir, ds);
    std::vector<std::string> artifacts = {"train.bin", "val.bin", "test.bin"};
    if (a.preview) {
        report::write_preview(a.out_dir + "/preview.png", ds, 8);
        artifacts.push_back("preview.png");
    }
    Manifest m = Manifest::make(fs::path(a.out_dir).filename().string(), "dataset", command);
    m.doc["dataset_spec"] = spec;
    m.doc["dataset_hash"] = dataset_hash(a.out_dir);
    m.add_artifacts(a.out_dir, artifacts);
    write_manifest(a.out_dir, m);
    std::printf("dataset %s  hash %s\n", a.out_dir.c_str(),
                m.doc["dataset_hash"].get<std::string>().substr(0, 16).c_str());
}

struct TrainArgs {
    std::string role, config_path, dataset_dir, out_dir, teacher_dir, label;
    int64_t seed = -1;
    int epochs = -1;
    bool force = false, no_eval = false, verbose = false;
};

void run_train(const TrainArgs& a, const std::string& command) {
    const train::RunKind kind = train::run_kind_from(a.role);
    ExperimentConfig cfg = load_config_file(a.config_path);
    data::Dataset ds = data::load_dataset(a.dataset_dir);
    cfg.dataset = ds.spec;
    if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);
    if (a.epochs > 0) cfg.epochs = a.epochs;
    cfg.derive_channels();
    cfg.validate();
    require_fresh(a.out_dir, a.force);

    train::TeacherNets teacher;
    train::TeacherNets* teacher_p = nullptr;
    if (kind == train::RunKind::distill) {
        if (a.teacher_dir.empty()) throw ConfigError("--teacher is required for distill");
        teacher = train::load_teacher(a.teacher_dir);
        teacher_p = &teacher;
    }

    const std::string ds_hash = dataset_hash(a.dataset_dir);
    eval::Segmenter seg;
    train::TrainOptions opts;
    if (!a.no_eval) {
        seg = eval::get_or_train_segmenter(ds, state_root() + "/segmenters", ds_hash);
        opts.segmenter = &seg;
    }
    opts.run_dir = a.out_dir;
    opts.run_label = a.label.empty() ? classify_run_label(cfg, kind) : a.label;
    opts.config_hash = config_hash(cfg);
    opts.dataset_hash = ds_hash;
    opts.quiet = !a.verbose;

    train::TrainResult res = train::train_gan(cfg, kind, ds, teacher_p, opts);

    Manifest m = Manifest::make(fs::path(a.out_dir).filename().string(), a.role, command);
    m.set_config(cfg);
    m.doc["dataset_hash"] = ds_hash;
    m.doc["run_label"] = opts.run_label;
    if (!a.teacher_dir.empty()) m.doc["teacher_run"] = a.teacher_dir;
    if (res.bound_warning)
        m.add_warning("n_train " + std::to_string(cfg.dataset.n_train) + " below sample bound " +
                      std::to_string(res.sample_bound_value));
    m.add_artifacts(a.out_dir, list_run_files(a.out_dir));
    write_manifest(a.out_dir, m);

    const auto& last = res.metrics.back();
    std::printf("%s run %s: epochs=%d val_l1=%.4f per_pixel=%.4f\n", opts.run_label.c_str(), a.out_dir.c_str(),
                res.final_epoch, last.val_l1, last.per_pixel_acc);
}

struct AblationRow {
    std::string label;
    std::optional<AblationMask> mask; // nullopt = scratch baseline
};

const std::vector<AblationRow>& ablation_rows() {
    static const std::vector<AblationRow> rows = {
        {"baseline", std::nullopt},
        {"L_perc", AblationMask{"perc"}},
        {"L_L1+L_perc", AblationMask{"L1", "perc"}},
        {"L_GT", AblationMask{"GT"}},
        {"L_GT+L_tri", AblationMask{"GT", "tri"}},
        {"L_L1+L_perc+L_GT+L_tri", AblationMask{"L1", "perc", "GT", "tri"}},
    };
    return rows;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return out;
}

struct AblateArgs {
    std::string config_path, dataset_dir, teacher_dir, out_dir;
    int seeds = 3, epochs = -1;
    bool force = false;
};

void run_ablate(const AblateArgs& a, const std::string& command) {
    if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
    ExperimentConfig base = load_config_file(a.config_path);
    data::Dataset ds = data::load_dataset(a.dataset_dir);
    base.dataset = ds.spec;
    if (a.epochs > 0) base.epochs = a.epochs;
    base.derive_channels();

    const std::string ds_hash = dataset_hash(a.dataset_dir);
    eval::Segmenter seg = eval::get_or_train_segmenter(ds, state_root() + "/segmenters", ds_hash);
    train::TeacherNets teacher = train::load_teacher(a.teacher_dir);
    fs::create_directories(a.out_dir);

    std::vector<eval::MetricsRecord> row_means;
    for (const auto& row : ablation_rows()) {
        std::vector<eval::MetricsRecord> finals;
        for (int s = 0; s < a.seeds; ++s) {
            ExperimentConfig cfg = base;
            cfg.seed = base.seed + static_cast<uint64_t>(s);
            cfg.ablation_mask = row.mask;
            cfg.validate();
            const std::string run_dir = a.out_dir + "/abl_" + sanitize(row.label) + "_s" + std::to_string(s);
            const std::string cfg_hash = config_hash(cfg);
            // interrupted matrices resume from completed, still-valid cells
            bool done = false;
            if (!a.force && has_manifest(run_dir)) {
                const json m = read_manifest(run_dir);
                if (m.value("config_hash", "") == cfg_hash) {
                    verify_manifest(run_dir);
                    done = true;
                }
            }
            if (!done) {
                train::TrainOptions opts;
                opts.run_dir = run_dir;
                opts.run_label = row.label;
                opts.config_hash = cfg_hash;
                opts.dataset_hash = ds_hash;
                opts.segmenter = &seg;
                const train::RunKind kind = row.mask ? train::RunKind::distill : train::RunKind::scratch;
                train::train_gan(cfg, kind, ds, row.mask ? &teacher : nullptr, opts);
                Manifest cm = Manifest::make(fs::path(run_dir).filename().string(), "ablate_cell", command);
                cm.set_config(cfg);
                cm.doc["dataset_hash"] = ds_hash;
                cm.doc["run_label"] = row.label;
                cm.add_artifacts(run_dir, list_run_files(run_dir));
                write_manifest(run_dir, cm);
            }
            finals.push_back(final_metrics(run_dir));
        }
        eval::MetricsRecord mean;
        mean.run_label = row.label;
        mean.dataset_hash = ds_hash;
        mean.n_images = finals.front().n_images;
        mean.epoch = finals.front().epoch;
        mean.confusion = eval::ConfusionMatrix(finals.front().confusion.k);
        for (const auto& r : finals) {
            mean.per_pixel_acc += r.per_pixel_acc / a.seeds;
            mean.per_class_acc += r.per_class_acc / a.seeds;
            mean.mean_iou += r.mean_iou / a.seeds;
            mean.val_l1 += r.val_l1 / a.seeds;
            mean.confusion.merge(r.confusion);
        }
        if (!finals.empty() && finals.front().val_l1 < 0) mean.val_l1 = -1;
        row_means.push_back(std::move(mean));
    }

    eval::ComparisonReport rep = eval::compare_runs(row_means);
    std::ofstream(a.out_dir + "/report.txt") << rep.text;
    std::ofstream(a.out_dir + "/report.json") << rep.table.dump(2) << "\n";
    Manifest m = Manifest::make(fs::path(a.out_dir).filename().string(), "ablate", command);
    m.doc["dataset_hash"] = ds_hash;
    m.doc["seeds"] = a.seeds;
    m.add_artifacts(a.out_dir, {"report.txt", "report.json"});
    write_manifest(a.out_dir, m);
    std::fputs(rep.text.c_str(), stdout);
}

struct ReportArgs {
    std::string out_dir, dataset_dir, split = "test";
    std::vector<std::string> run_dirs;
    std::vector<int> sample_ids;
    bool force = false;
};

void run_report(const ReportArgs& a, const std::string& command) {
    require_fresh(a.out_dir, a.force);
    data::Dataset ds = data::load_dataset(a.dataset_dir);
    const std::string ds_hash = dataset_hash(a.dataset_dir);
    std::vector<int> sample_ids = a.sample_ids.empty() ? std::vector<int>{0, 1, 2, 3} : a.sample_ids;

    report::GridColumns cols;
    std::vector<nn::UNetGenerator<float>> gens;
    gens.reserve(a.run_dirs.size());
    std::vector<eval::MetricsRecord> records;
    for (const auto& rd : a.run_dirs) {
        const json m = read_manifest(rd);
        if (m.value("dataset_hash", "") != ds_hash)
            throw ComparabilityError("run " + rd + " was trained on a different dataset");
        const std::string label = m.value("run_label", "");
        records.push_back(final_metrics(rd));
        gens.push_back(load_final_generator(rd));
        const nn::UNetGenerator<float>* g = &gens.back();
        if (label == "teacher") cols.teacher = g;
        else if (label == "scratch") cols.scratch = g;
        else if (label == "vanilla") cols.vanilla = g;
        else cols.ours = g;
    }

    fs::create_directories(a.out_dir);
    img::write_png(a.out_dir + "/grid.png", report::comparison_grid(ds, a.split, sample_ids, cols));
    eval::ComparisonReport rep = eval::compare_runs(records);
    std::ofstream(a.out_dir + "/report.txt") << rep.text;
    std::ofstream(a.out_dir + "/report.json") << rep.table.dump(2) << "\n";

    Manifest m = Manifest::make(fs::path(a.out_dir).filename().string(), "report", command);
    m.doc["dataset_hash"] = ds_hash;
    m.doc["runs"] = a.run_dirs;
    m.doc["samples"] = sample_ids;
    m.add_artifacts(a.out_dir, {"grid.png", "report.txt", "report.json"});
    write_manifest(a.out_dir, m);
    std::fputs(rep.text.c_str(), stdout);
}

struct CountArgs {
    std::string config_path;
    bool full_scale = false;
    int size = 0;
};

void run_count(const CountArgs& a) {
    nn::GeneratorSpec teacher;
    int size = a.size;
    if (a.full_scale || a.config_path.empty()) {
        teacher = {3, 3, 64, 8, true};
        if (!size) size = 256;
    } else {
        ExperimentConfig cfg = load_config_file(a.config_path);
        cfg.derive_channels();
        teacher = cfg.teacher_gen;
        if (!size) size = cfg.dataset.image_size;
    }
    nn::GeneratorSpec half = teacher, quarter = teacher;
    half.base_width = std::max(1, teacher.base_width / 2);
    quarter.base_width = std::max(1, teacher.base_width / 4);

    std::printf("%-22s %14s %14s %10s\n", "generator", "params", "FLOPs", "speedup");
    double t_flops = 0;
    for (const auto& [name, spec] : std::initializer_list<std::pair<const char*, nn::GeneratorSpec>>{
             {"teacher", teacher}, {"student 1/2 width", half}, {"student 1/4 width", quarter}}) {
        const double params = static_cast<double>(nn::unet_param_count(spec));
        nn::UNetGenerator<float> g(spec, 0);
        const double flops = 2.0 * static_cast<double>(g.macs(size, size));
        if (t_flops == 0) t_flops = flops;
        std::printf("%-22s %13.2fM %12.3fG %9.2fx\n", name, params / 1e6, flops / 1e9, t_flops / flops);
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        CLI::App app{"teacher-student GAN distillation experiments"};
        app.require_subcommand(1);
        const std::string command = join_args(args);

        DatasetArgs da;
        auto* c_ds = app.add_subcommand("dataset", "generate a paired synthetic dataset");
        c_ds->add_option("--out", da.out_dir)->required();
        c_ds->add_option("--seed", da.spec.seed);
        c_ds->add_option("--classes", da.spec.n_classes);
        c_ds->add_option("--size", da.spec.image_size);
        c_ds->add_option("--train", da.spec.n_train);
        c_ds->add_option("--val", da.spec.n_val);
        c_ds->add_option("--test", da.spec.n_test);
        c_ds->add_option("--complexity", da.complexity, "flat|noisy|textured");
        c_ds->add_flag("--preview", da.preview, "write a label/photo contact sheet");
        c_ds->add_flag("--force", da.force);
        c_ds->callback([&] { run_dataset(da, command); });

        TrainArgs ta;
        auto* c_tr = app.add_subcommand("train", "train teacher, scratch student, or distilled student");
        c_tr->add_option("--role", ta.role, "teacher|scratch|distill")->required();
        c_tr->add_option("--config", ta.config_path)->required();
        c_tr->add_option("--dataset", ta.dataset_dir)->required();
        c_tr->add_option("--out", ta.out_dir)->required();
        c_tr->add_option("--teacher", ta.teacher_dir, "teacher run directory (distill)");
        c_tr->add_option("--seed", ta.seed);
        c_tr->add_option("--epochs", ta.epochs);
        c_tr->add_option("--label", ta.label);
        c_tr->add_flag("--force", ta.force);
        c_tr->add_flag("--no-eval", ta.no_eval, "skip pseudo-FCN evaluation");
        c_tr->add_flag("--verbose", ta.verbose);
        c_tr->callback([&] { run_train(ta, command); });

        AblateArgs aa;
        auto* c_ab = app.add_subcommand("ablate", "run the six-row loss ablation matrix");
        c_ab->add_option("--config", aa.config_path)->required();
        c_ab->add_option("--dataset", aa.dataset_dir)->required();
        c_ab->add_option("--teacher", aa.teacher_dir)->required();
        c_ab->add_option("--out", aa.out_dir)->required();
        c_ab->add_option("--seeds", aa.seeds);
        c_ab->add_option("--epochs", aa.epochs);
        c_ab->add_flag("--force", aa.force);
        c_ab->callback([&] { run_ablate(aa, command); });

        ReportArgs ra;
        auto* c_rp = app.add_subcommand("report", "qualitative grid and comparison tables");
        c_rp->add_option("--out", ra.out_dir)->required();
        c_rp->add_option("--dataset", ra.dataset_dir)->required();
        c_rp->add_option("--runs", ra.run_dirs)->required()->expected(-1);
        c_rp->add_option("--samples", ra.sample_ids);
        c_rp->add_option("--split", ra.split);
        c_rp->add_flag("--force", ra.force);
        c_rp->callback([&] { run_report(ra, command); });

        CountArgs ca;
        auto* c_ct = app.add_subcommand("count", "parameter/FLOP table");
        c_ct->add_option("--config", ca.config_path);
        c_ct->add_flag("--full-scale", ca.full_scale, "use the 256x256 width-64 reference layout");
        c_ct->add_option("--size", ca.size);
        c_ct->callback([&] { run_count(ca); });

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return exit_config;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const ComparabilityError& e) {
        std::fprintf(stderr, "comparability error: %s\n", e.what());
        return exit_comparability;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric divergence: %s\n", e.what());
        return exit_numeric;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return exit_data;
    } catch (const IoError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return exit_data;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_generic;
    }
}

} // namespace gankd::cli
