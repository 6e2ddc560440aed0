#pragma once

#include <cstdint>
#include <string>

namespace specfission {

/// Stable 128-bit content digest. The hash is MurmurHash3 x64 128 with seed
/// 0 over a canonical length-prefixed encoding of the node definition, so
/// digests agree across processes and machines.
struct Fingerprint {
    uint64_t hi = 0;
    uint64_t lo = 0;

    auto operator<=>(const Fingerprint&) const = default;

    std::string hex() const;
    static Fingerprint from_hex(const std::string& hex);

    /// 16 bytes, hi then lo, little-endian; feeds parent digests into child
    /// encodings.
    void append_bytes(std::string& out) const;
};

Fingerprint fingerprint_bytes(const void* data, size_t len);
inline Fingerprint fingerprint_bytes(const std::string& s) {
    return fingerprint_bytes(s.data(), s.size());
}

struct FingerprintHash {
    size_t operator()(const Fingerprint& f) const noexcept {
        return static_cast<size_t>(f.hi ^ (f.lo * 0x9e3779b97f4a7c15ULL));
    }
};

} // namespace specfission
