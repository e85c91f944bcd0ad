#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace navlab {

// Input/config errors a user can fix; the CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad flag combinations and similar; the CLI maps these to exit code 1.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a 64-bit. Used for content hashes of generated artifacts; stable across
// platforms, which is all the run manifests need.
inline uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex(uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
uint64_t file_hash(const std::string& path);

std::string format_double(double v);  // shortest round-trip decimal form

}  // namespace navlab
