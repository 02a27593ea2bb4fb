#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace cdpm {

// FNV-1a 64-bit; used for artifact integrity and determinism checks.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string file_hash_hex(const std::filesystem::path& path);

}  // namespace cdpm
