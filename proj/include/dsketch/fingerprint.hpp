#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

#include "dsketch/block.hpp"

namespace dsketch {

/// 128-bit MD5 digest of a block.
struct Fingerprint {
    std::array<std::uint8_t, 16> digest{};

    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

struct FingerprintHash {
    std::size_t operator()(const Fingerprint& fp) const noexcept {
        std::uint64_t h;
        std::memcpy(&h, fp.digest.data(), sizeof h);
        return static_cast<std::size_t>(h);
    }
};

/// Incremental MD5 (RFC 1321), backed by OpenSSL.
class Md5 {
public:
    Md5();
    ~Md5();
    Md5(const Md5&) = delete;
    Md5& operator=(const Md5&) = delete;

    void update(ByteSpan data);
    std::array<std::uint8_t, 16> finish();

private:
    struct Ctx;
    std::unique_ptr<Ctx> ctx_;
};

std::array<std::uint8_t, 16> md5(ByteSpan data);

Fingerprint fingerprint(const Block& b);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// Fingerprint -> id of the first physically stored block with that content.
/// Matches are trusted without comparing content.
class FpStore {
public:
    std::optional<BlockId> lookup(const Fingerprint& fp) const;

    /// Inserts iff `fp` is absent; returns whether it was inserted.
    bool insert(const Fingerprint& fp, BlockId id);

    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<Fingerprint, BlockId, FingerprintHash> map_;
};

}  // namespace dsketch
