#include "gankd/manifest.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "gankd/hash.hpp"

namespace gankd {

namespace fs = std::filesystem;

Manifest Manifest::make(const std::string& run_id, const std::string& kind, const std::string& command) {
    Manifest m;
    m.doc["run_id"] = run_id;
    m.doc["kind"] = kind;
    m.doc["command"] = command;
    m.doc["artifacts"] = json::object();
    m.doc["warnings"] = json::array();
    const auto now = std::chrono::system_clock::now();
    m.doc["created_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    return m;
}

void Manifest::set_config(const ExperimentConfig& cfg) {
    doc["config"] = cfg;
    doc["config_hash"] = config_hash(cfg);
}

void Manifest::add_artifacts(const std::string& dir, const std::vector<std::string>& rel_paths) {
    for (const auto& rel : rel_paths) doc["artifacts"][rel] = sha256_file(dir + "/" + rel);
}

void Manifest::add_warning(const std::string& w) { doc["warnings"].push_back(w); }

std::string manifest_path(const std::string& run_dir) { return run_dir + "/manifest.json"; }

void write_manifest(const std::string& run_dir, const Manifest& m) {
    fs::create_directories(run_dir);
    std::ofstream f(manifest_path(run_dir), std::ios::trunc);
    if (!f) throw IoError("cannot write manifest in " + run_dir);
    f << m.doc.dump(2) << "\n";
}

bool has_manifest(const std::string& run_dir) { return fs::exists(manifest_path(run_dir)); }

json read_manifest(const std::string& run_dir) {
    std::ifstream f(manifest_path(run_dir));
    if (!f) throw DataError("missing manifest in " + run_dir);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw DataError("corrupt manifest in " + run_dir);
    return j;
}

void verify_manifest(const std::string& run_dir) {
    const json m = read_manifest(run_dir);
    for (const auto& [rel, want] : m.at("artifacts").items()) {
        const std::string path = run_dir + "/" + rel;
        if (!fs::exists(path)) throw DataError("manifest artifact missing: " + path);
        const std::string got = sha256_file(path);
        if (got != want.get<std::string>()) throw DataError("manifest artifact hash mismatch: " + path);
    }
}

std::string dataset_hash(const std::string& dataset_dir) {
    std::string combined;
    for (const char* split : {"train.bin", "val.bin", "test.bin"}) {
        const std::string p = dataset_dir + std::string("/") + split;
        if (!fs::exists(p)) throw DataError("dataset split missing: " + p);
        combined += sha256_file(p);
    }
    return sha256_hex(combined);
}

std::string config_hash(const ExperimentConfig& cfg) {
    const json j = cfg;
    return sha256_hex(j.dump());
}

} // namespace gankd
