#pragma once

#include <cstdint>
#include <string_view>

namespace dygenc {

// SplitMix64 finalizer; the basis of every derived seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Child seed for a named stream under a root seed.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) noexcept {
    return mix64(root ^ mix64(fnv1a(tag)));
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
    return mix64(root ^ mix64(index + 0x632be59bd9b4e019ULL));
}

} // namespace dygenc
