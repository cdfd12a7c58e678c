#include "provtrace/hash.hpp"

namespace provtrace {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

void append_hex(std::string& out, std::uint64_t v, int nibbles) {
    for (int i = nibbles - 1; i >= 0; --i) {
        out.push_back(kHexDigits[(v >> (i * 4)) & 0xf]);
    }
}

} // namespace

std::string to_hex(std::uint64_t v) {
    std::string out;
    out.reserve(16);
    append_hex(out, v, 16);
    return out;
}

std::string Guid::str() const {
    // 8-4-4-4-12 grouping, purely cosmetic.
    std::string out;
    out.reserve(36);
    append_hex(out, hi >> 32, 8);
    out.push_back('-');
    append_hex(out, (hi >> 16) & 0xffff, 4);
    out.push_back('-');
    append_hex(out, hi & 0xffff, 4);
    out.push_back('-');
    append_hex(out, lo >> 48, 4);
    out.push_back('-');
    append_hex(out, lo & 0xffffffffffffull, 12);
    return out;
}

Guid make_guid(std::string_view type_name, std::string_view qualified_name) {
    // Two independent 64-bit lanes over "type|name".
    std::uint64_t a = fnv1a64(type_name);
    a = fnv1a64("|", a);
    a = fnv1a64(qualified_name, a);

    std::uint64_t b = fnv1a64(qualified_name, 0x9ae16a3b2f90404full);
    b = fnv1a64("|", b);
    b = fnv1a64(type_name, b);
    return Guid{a, b};
}

} // namespace provtrace
