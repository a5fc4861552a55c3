#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace dsketch {

inline constexpr std::size_t kBlockSize = 4096;

/// A fixed 4 KiB unit of storage I/O. Every reduction path operates on these.
using Block = std::array<std::uint8_t, kBlockSize>;

/// Zero-based position of a block in a corpus, also its logical id in a store.
using BlockId = std::uint64_t;

using ByteSpan = std::span<const std::uint8_t>;

/// Number of byte positions at which two blocks differ.
inline std::size_t byte_diff(const Block& a, const Block& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < kBlockSize; ++i) {
        n += a[i] != b[i];
    }
    return n;
}

}  // namespace dsketch
