#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace provtrace {

// FNV-1a. Used for fingerprints and deterministic ids; must stay stable
// across platforms and releases (hashes end up in checkpoint files and
// catalog uploads), so std::hash is not an option here.
inline constexpr std::uint64_t kFnv64Offset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnv64Prime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = kFnv64Offset) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnv64Prime;
    }
    return h;
}

constexpr std::uint64_t fnv1a64_mix(std::uint64_t value, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (i * 8)) & 0xff;
        h *= kFnv64Prime;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

// Deterministic 128-bit identifier, formatted like a UUID. Computed from
// (type name, qualified name) so repeated extraction runs produce the
// same ids and upserts at the catalog stay idempotent.
struct Guid {
    std::uint64_t hi{};
    std::uint64_t lo{};

    auto operator<=>(const Guid&) const = default;
    std::string str() const;
};

Guid make_guid(std::string_view type_name, std::string_view qualified_name);

} // namespace provtrace

template <>
struct std::hash<provtrace::Guid> {
    std::size_t operator()(const provtrace::Guid& g) const noexcept {
        return static_cast<std::size_t>(g.hi ^ (g.lo * 0x9e3779b97f4a7c15ull));
    }
};
