#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gankd {

// SHA-256, hex-encoded.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

} // namespace gankd
