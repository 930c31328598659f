#pragma once

#include <cstdint>
#include <string>

namespace mstcn {

// FNV-1a 64-bit, hex-encoded. Stable across platforms.
std::string fnv1a_hex(const std::string& bytes);

std::string iso8601_utc_now();

// Write via a temp file in the same directory, then rename.
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace mstcn
