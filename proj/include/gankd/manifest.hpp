#pragma once

#include <string>
#include <vector>

#include "gankd/config.hpp"

namespace gankd {

// Per-run manifest: effective config, content hashes of every emitted
// artifact, and enough metadata to reconstruct comparisons.
struct Manifest {
    json doc;

    static Manifest make(const std::string& run_id, const std::string& kind, const std::string& command);
    void set_config(const ExperimentConfig& cfg);
    // records sha256 of dir/rel for each listed artifact
    void add_artifacts(const std::string& dir, const std::vector<std::string>& rel_paths);
    void add_warning(const std::string& w);
};

std::string manifest_path(const std::string& run_dir);
void write_manifest(const std::string& run_dir, const Manifest& m);
bool has_manifest(const std::string& run_dir);
json read_manifest(const std::string& run_dir);

// Checks that every artifact referenced by the manifest exists and hashes to
// the recorded value; throws DataError otherwise.
void verify_manifest(const std::string& run_dir);

// Content hash of a dataset directory (over its three split files).
std::string dataset_hash(const std::string& dataset_dir);

std::string config_hash(const ExperimentConfig& cfg);

} // namespace gankd
