#include "specfission/fingerprint.hpp"

#include <cstring>
#include <stdexcept>

namespace specfission {

namespace {

// MurmurHash3 x64 128, Austin Appleby, public domain.

inline uint64_t rotl64(uint64_t x, int8_t r) { return (x << r) | (x >> (64 - r)); }

inline uint64_t fmix64(uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

inline uint64_t getblock64(const uint8_t* p, size_t i) {
    uint64_t k;
    std::memcpy(&k, p + i * 8, 8);
    return k;
}

void murmur3_x64_128(const void* key, size_t len, uint32_t seed, uint64_t out[2]) {
    const auto* data = static_cast<const uint8_t*>(key);
    const size_t nblocks = len / 16;

    uint64_t h1 = seed;
    uint64_t h2 = seed;

    const uint64_t c1 = 0x87c37b91114253d5ULL;
    const uint64_t c2 = 0x4cf5ad432745937fULL;

    for (size_t i = 0; i < nblocks; i++) {
        uint64_t k1 = getblock64(data, i * 2 + 0);
        uint64_t k2 = getblock64(data, i * 2 + 1);

        k1 *= c1;
        k1 = rotl64(k1, 31);
        k1 *= c2;
        h1 ^= k1;
        h1 = rotl64(h1, 27);
        h1 += h2;
        h1 = h1 * 5 + 0x52dce729;

        k2 *= c2;
        k2 = rotl64(k2, 33);
        k2 *= c1;
        h2 ^= k2;
        h2 = rotl64(h2, 31);
        h2 += h1;
        h2 = h2 * 5 + 0x38495ab5;
    }

    const uint8_t* tail = data + nblocks * 16;
    uint64_t k1 = 0;
    uint64_t k2 = 0;

    switch (len & 15) {
    case 15: k2 ^= uint64_t(tail[14]) << 48; [[fallthrough]];
    case 14: k2 ^= uint64_t(tail[13]) << 40; [[fallthrough]];
    case 13: k2 ^= uint64_t(tail[12]) << 32; [[fallthrough]];
    case 12: k2 ^= uint64_t(tail[11]) << 24; [[fallthrough]];
    case 11: k2 ^= uint64_t(tail[10]) << 16; [[fallthrough]];
    case 10: k2 ^= uint64_t(tail[9]) << 8; [[fallthrough]];
    case 9:
        k2 ^= uint64_t(tail[8]) << 0;
        k2 *= c2;
        k2 = rotl64(k2, 33);
        k2 *= c1;
        h2 ^= k2;
        [[fallthrough]];
    case 8: k1 ^= uint64_t(tail[7]) << 56; [[fallthrough]];
    case 7: k1 ^= uint64_t(tail[6]) << 48; [[fallthrough]];
    case 6: k1 ^= uint64_t(tail[5]) << 40; [[fallthrough]];
    case 5: k1 ^= uint64_t(tail[4]) << 32; [[fallthrough]];
    case 4: k1 ^= uint64_t(tail[3]) << 24; [[fallthrough]];
    case 3: k1 ^= uint64_t(tail[2]) << 16; [[fallthrough]];
    case 2: k1 ^= uint64_t(tail[1]) << 8; [[fallthrough]];
    case 1:
        k1 ^= uint64_t(tail[0]) << 0;
        k1 *= c1;
        k1 = rotl64(k1, 31);
        k1 *= c2;
        h1 ^= k1;
    }

    h1 ^= len;
    h2 ^= len;
    h1 += h2;
    h2 += h1;
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 += h2;
    h2 += h1;

    out[0] = h1;
    out[1] = h2;
}

constexpr char kHexDigits[] = "0123456789abcdef";

void hex64(uint64_t v, std::string& out) {
    for (int i = 60; i >= 0; i -= 4) out.push_back(kHexDigits[(v >> i) & 0xf]);
}

} // namespace

std::string Fingerprint::hex() const {
    std::string out;
    out.reserve(32);
    hex64(hi, out);
    hex64(lo, out);
    return out;
}

Fingerprint Fingerprint::from_hex(const std::string& hex) {
    if (hex.size() != 32) throw std::invalid_argument("fingerprint hex must be 32 chars");
    auto parse = [&](size_t start) {
        uint64_t v = 0;
        for (size_t i = start; i < start + 16; ++i) {
            char c = hex[i];
            v <<= 4;
            if (c >= '0' && c <= '9') v |= unsigned(c - '0');
            else if (c >= 'a' && c <= 'f') v |= unsigned(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') v |= unsigned(c - 'A' + 10);
            else throw std::invalid_argument("bad fingerprint hex");
        }
        return v;
    };
    return {parse(0), parse(16)};
}

void Fingerprint::append_bytes(std::string& out) const {
    for (int i = 0; i < 8; ++i) out.push_back(char((hi >> (8 * i)) & 0xff));
    for (int i = 0; i < 8; ++i) out.push_back(char((lo >> (8 * i)) & 0xff));
}

Fingerprint fingerprint_bytes(const void* data, size_t len) {
    uint64_t out[2];
    murmur3_x64_128(data, len, 0, out);
    return {out[0], out[1]};
}

} // namespace specfission
