#include "gankd/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace gankd {

namespace {
constexpr char kMagic[8] = {'G', 'A', 'N', 'K', 'D', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;
} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    json header;
    header["meta"] = ck.meta;
    json dir = json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : ck.arrays) {
        dir.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
        offset += t.numel() * sizeof(float);
    }
    header["arrays"] = std::move(dir);
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + path);
    f.write(kMagic, 8);
    uint32_t ver = kVersion;
    f.write(reinterpret_cast<const char*>(&ver), 4);
    uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : ck.arrays)
        f.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) throw IoError("short write on checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) throw DataError("not a checkpoint file: " + path);
    uint32_t ver = 0;
    f.read(reinterpret_cast<char*>(&ver), 4);
    if (ver != kVersion) throw DataError("unsupported checkpoint version in " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    if (!f || hlen > (1ull << 30)) throw DataError("corrupt checkpoint header in " + path);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw DataError("truncated checkpoint header in " + path);
    json header = json::parse(hs, nullptr, /*allow_exceptions=*/false);
    if (header.is_discarded()) throw DataError("corrupt checkpoint header in " + path);

    Checkpoint ck;
    ck.meta = header.value("meta", json::object());
    for (const auto& e : header.at("arrays")) {
        std::array<int, 4> shape = e.at("shape").get<std::array<int, 4>>();
        Tensor<float> t(shape[0], shape[1], shape[2], shape[3]);
        f.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!f) throw DataError("truncated checkpoint payload in " + path);
        ck.add(e.at("name").get<std::string>(), std::move(t));
    }
    return ck;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    json j = json::parse(f, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
    try {
        return j.get<ExperimentConfig>();
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
}

} // namespace gankd
