#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dmba {

// splitmix64. All seeded sampling, shuffling and jitter in the harness runs
// through this generator so that a seed reproduces the same run on any
// platform and release. Do not swap it for std::mt19937 + distributions:
// those are implementation-defined.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform value in [0, n) via multiply-shift reduction.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n)) >> 64);
    }

    // Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

struct Digest128 {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    std::string hex() const;
    bool operator==(const Digest128&) const = default;
};

// FNV-1a over a 128-bit state. Stable content hash used for request ids and
// plan digests; not cryptographic, which is fine for dedup/resume keying.
Digest128 fnv1a128(std::string_view data);

// Shortest round-trip decimal form of v ("0.7", "1", "0.85").
std::string format_double(double v);

// Fixed six decimal places, the serialization used in exported tables.
std::string format_fixed6(double v);

// Rounds to six decimal places, mirroring format_fixed6 for JSON numbers.
double round6(double v);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Whitespace-delimited tokens, empty tokens dropped.
std::vector<std::string> split_whitespace(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

std::string iso8601_utc_now();

// Writes content to path via a temporary file in the same directory followed
// by an atomic rename, so a concurrent reader never sees a torn file.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace dmba
