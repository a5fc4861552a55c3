#pragma once

#include <cstdint>
#include <vector>

#include "dsketch/block.hpp"

namespace dsketch {

/// Encoded frames are plain byte vectors; their size is what reduction
/// accounting charges for a block.
using Frame = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kLosslessVersion = 1;
inline constexpr std::uint8_t kDeltaVersion = 1;

/// Minimum COPY length and seed width of the delta matcher.
inline constexpr std::size_t kDeltaSeed = 16;

// Lossless frame layout:
//   u8 version, u8 mode (0 = raw, 1 = lz), then
//   raw: 4096 block bytes
//   lz:  repeated { varint literal_len, literals, [varint match_len - 4, varint offset] }
//        where the match part is omitted once 4096 bytes have been produced.
Frame lossless_compress(const Block& b);
Block lossless_decompress(ByteSpan frame);

// Delta frame layout:
//   u8 version, then instructions until the end of the frame:
//   varint (len << 1 | is_copy); COPY carries a varint reference offset,
//   ADD carries `len` literal bytes.
Frame delta_encode(const Block& target, const Block& reference);
Block delta_decode(ByteSpan frame, const Block& reference);

/// One decoded delta instruction; exposed for inspection and tests.
struct DeltaOp {
    bool copy = false;
    std::uint32_t offset = 0;   // COPY only
    std::uint32_t length = 0;
    std::vector<std::uint8_t> literal;   // ADD only
};

std::vector<DeltaOp> delta_instructions(ByteSpan frame);

/// Data-reduction ratio original / reduced.
double drr(std::uint64_t original_size, std::uint64_t reduced_size);

}  // namespace dsketch
