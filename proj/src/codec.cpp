#include "dsketch/codec.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "binio.hpp"
#include "dsketch/errors.hpp"

namespace dsketch {

using detail::put_varint;
using detail::Reader;

namespace {

constexpr std::uint8_t kModeRaw = 0;
constexpr std::uint8_t kModeLz = 1;

constexpr std::size_t kLzMinMatch = 4;
constexpr std::size_t kLzHashBits = 12;
constexpr std::size_t kLzChainDepth = 32;

inline std::uint32_t load32(const std::uint8_t* p) {
    std::uint32_t v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline std::size_t lz_hash(const std::uint8_t* p) {
    return (load32(p) * 2654435761u) >> (32 - kLzHashBits);
}

void emit_literals(Frame& out, const Block& b, std::size_t from, std::size_t to) {
    put_varint(out, to - from);
    out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(from),
               b.begin() + static_cast<std::ptrdiff_t>(to));
}

Frame lz_encode(const Block& b) {
    Frame out;
    out.reserve(kBlockSize / 2);
    out.push_back(kLosslessVersion);
    out.push_back(kModeLz);

    std::vector<std::int32_t> head(std::size_t{1} << kLzHashBits, -1);
    std::vector<std::int32_t> prev(kBlockSize, -1);
    auto insert = [&](std::size_t pos) {
        const auto h = lz_hash(b.data() + pos);
        prev[pos] = head[h];
        head[h] = static_cast<std::int32_t>(pos);
    };

    std::size_t lit_start = 0;
    std::size_t i = 0;
    while (i + kLzMinMatch <= kBlockSize) {
        std::size_t best_len = 0;
        std::size_t best_off = 0;
        std::int32_t cand = head[lz_hash(b.data() + i)];
        for (std::size_t depth = 0; cand >= 0 && depth < kLzChainDepth; ++depth) {
            const auto c = static_cast<std::size_t>(cand);
            std::size_t len = 0;
            while (i + len < kBlockSize && b[c + len] == b[i + len]) {
                ++len;
            }
            if (len > best_len) {
                best_len = len;
                best_off = i - c;
            }
            cand = prev[c];
        }

        if (best_len >= kLzMinMatch) {
            emit_literals(out, b, lit_start, i);
            put_varint(out, best_len - kLzMinMatch);
            put_varint(out, best_off);
            const std::size_t end = i + best_len;
            for (; i < end; ++i) {
                if (i + kLzMinMatch <= kBlockSize) {
                    insert(i);
                }
            }
            lit_start = i;
        } else {
            insert(i);
            ++i;
        }
    }
    if (lit_start < kBlockSize) {
        emit_literals(out, b, lit_start, kBlockSize);
    }
    return out;
}

}  // namespace

Frame lossless_compress(const Block& b) {
    Frame lz = lz_encode(b);
    if (lz.size() <= 2 + kBlockSize) {
        return lz;
    }
    Frame raw;
    raw.reserve(2 + kBlockSize);
    raw.push_back(kLosslessVersion);
    raw.push_back(kModeRaw);
    raw.insert(raw.end(), b.begin(), b.end());
    return raw;
}

Block lossless_decompress(ByteSpan frame) {
    Reader r(frame);
    std::uint8_t version = 0;
    std::uint8_t mode = 0;
    if (!r.le(version)) {
        throw DecodeError("lossless frame: empty");
    }
    if (version != kLosslessVersion) {
        throw UnsupportedVersionError("lossless frame: unsupported version " + std::to_string(version));
    }
    if (!r.le(mode)) {
        throw DecodeError("lossless frame: missing mode byte");
    }

    Block out{};
    if (mode == kModeRaw) {
        std::span<const std::uint8_t> body;
        if (!r.bytes(kBlockSize, body) || !r.at_end()) {
            throw DecodeError("lossless frame: raw payload is not exactly 4096 bytes");
        }
        std::copy(body.begin(), body.end(), out.begin());
        return out;
    }
    if (mode != kModeLz) {
        throw DecodeError("lossless frame: unknown mode " + std::to_string(mode));
    }

    std::size_t produced = 0;
    while (produced < kBlockSize) {
        std::uint64_t lit_len = 0;
        std::span<const std::uint8_t> lits;
        if (!r.varint(lit_len) || lit_len > kBlockSize - produced || !r.bytes(lit_len, lits)) {
            throw DecodeError("lossless frame: truncated or oversized literal run");
        }
        std::copy(lits.begin(), lits.end(), out.begin() + static_cast<std::ptrdiff_t>(produced));
        produced += lit_len;
        if (produced == kBlockSize) {
            break;
        }
        std::uint64_t len = 0;
        std::uint64_t off = 0;
        if (!r.varint(len) || !r.varint(off)) {
            throw DecodeError("lossless frame: truncated match");
        }
        len += kLzMinMatch;
        if (off == 0 || off > produced || len > kBlockSize - produced) {
            throw DecodeError("lossless frame: match out of range");
        }
        // Byte-wise so overlapping matches replicate correctly.
        for (std::uint64_t k = 0; k < len; ++k, ++produced) {
            out[produced] = out[produced - off];
        }
    }
    if (!r.at_end()) {
        throw DecodeError("lossless frame: trailing bytes");
    }
    return out;
}

namespace {

constexpr std::uint64_t kSeedBase = 0x100000001b3ull;
constexpr std::size_t kDeltaTableBits = 13;

// base^(kDeltaSeed - 1), the weight of the byte leaving the rolling window.
constexpr std::uint64_t seed_out_weight() {
    std::uint64_t w = 1;
    for (std::size_t i = 1; i < kDeltaSeed; ++i) {
        w *= kSeedBase;
    }
    return w;
}

inline std::uint64_t seed_hash(const std::uint8_t* p) {
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < kDeltaSeed; ++i) {
        h = h * kSeedBase + p[i];
    }
    return h;
}

inline std::size_t slot(std::uint64_t h) {
    return static_cast<std::size_t>((h * 0x9e3779b97f4a7c15ull) >> (64 - kDeltaTableBits));
}

void emit_add(Frame& out, const Block& t, std::size_t from, std::size_t to) {
    if (to == from) {
        return;
    }
    put_varint(out, static_cast<std::uint64_t>(to - from) << 1);
    out.insert(out.end(), t.begin() + static_cast<std::ptrdiff_t>(from),
               t.begin() + static_cast<std::ptrdiff_t>(to));
}

void emit_copy(Frame& out, std::size_t offset, std::size_t len) {
    put_varint(out, (static_cast<std::uint64_t>(len) << 1) | 1);
    put_varint(out, offset);
}

}  // namespace

Frame delta_encode(const Block& target, const Block& reference) {
    // Index every 16-byte seed of the reference; the first occurrence wins.
    std::vector<std::int32_t> table(std::size_t{1} << kDeltaTableBits, -1);
    {
        std::uint64_t h = seed_hash(reference.data());
        constexpr auto out_w = seed_out_weight();
        for (std::size_t p = 0;; ++p) {
            auto& s = table[slot(h)];
            if (s < 0) {
                s = static_cast<std::int32_t>(p);
            }
            if (p + kDeltaSeed >= kBlockSize) {
                break;
            }
            h = (h - reference[p] * out_w) * kSeedBase + reference[p + kDeltaSeed];
        }
    }

    Frame out;
    out.reserve(64);
    out.push_back(kDeltaVersion);

    constexpr auto out_w = seed_out_weight();
    std::size_t lit_start = 0;
    std::size_t t = 0;
    bool have_hash = false;
    std::uint64_t h = 0;
    while (t + kDeltaSeed <= kBlockSize) {
        if (!have_hash) {
            h = seed_hash(target.data() + t);
            have_hash = true;
        }
        const std::int32_t cand = table[slot(h)];
        if (cand >= 0 &&
            std::memcmp(target.data() + t, reference.data() + cand, kDeltaSeed) == 0) {
            std::size_t r = static_cast<std::size_t>(cand);
            std::size_t len = kDeltaSeed;
            while (t + len < kBlockSize && r + len < kBlockSize && target[t + len] == reference[r + len]) {
                ++len;
            }
            while (t > lit_start && r > 0 && target[t - 1] == reference[r - 1]) {
                --t;
                --r;
                ++len;
            }
            emit_add(out, target, lit_start, t);
            emit_copy(out, r, len);
            t += len;
            lit_start = t;
            have_hash = false;
            continue;
        }
        if (t + kDeltaSeed < kBlockSize) {
            h = (h - target[t] * out_w) * kSeedBase + target[t + kDeltaSeed];
        }
        ++t;
    }
    emit_add(out, target, lit_start, kBlockSize);
    return out;
}

std::vector<DeltaOp> delta_instructions(ByteSpan frame) {
    Reader r(frame);
    std::uint8_t version = 0;
    if (!r.le(version)) {
        throw DecodeError("delta frame: empty");
    }
    if (version != kDeltaVersion) {
        throw UnsupportedVersionError("delta frame: unsupported version " + std::to_string(version));
    }
    std::vector<DeltaOp> ops;
    std::uint64_t total = 0;
    while (!r.at_end()) {
        std::uint64_t header = 0;
        if (!r.varint(header)) {
            throw DecodeError("delta frame: truncated instruction header");
        }
        const std::uint64_t len = header >> 1;
        if (len == 0 || len > kBlockSize - total) {
            throw DecodeError("delta frame: instruction length out of range");
        }
        DeltaOp op;
        op.copy = (header & 1) != 0;
        op.length = static_cast<std::uint32_t>(len);
        if (op.copy) {
            std::uint64_t off = 0;
            if (!r.varint(off)) {
                throw DecodeError("delta frame: truncated COPY offset");
            }
            if (off >= kBlockSize || len > kBlockSize - off) {
                throw DecodeError("delta frame: COPY window outside the reference");
            }
            op.offset = static_cast<std::uint32_t>(off);
        } else {
            std::span<const std::uint8_t> lits;
            if (!r.bytes(len, lits)) {
                throw DecodeError("delta frame: truncated ADD literal");
            }
            op.literal.assign(lits.begin(), lits.end());
        }
        total += len;
        ops.push_back(std::move(op));
    }
    if (total != kBlockSize) {
        throw DecodeError("delta frame: instructions produce " + std::to_string(total) +
                          " bytes, expected 4096");
    }
    return ops;
}

Block delta_decode(ByteSpan frame, const Block& reference) {
    Block out{};
    std::size_t pos = 0;
    for (const auto& op : delta_instructions(frame)) {
        if (op.copy) {
            std::memcpy(out.data() + pos, reference.data() + op.offset, op.length);
        } else {
            std::memcpy(out.data() + pos, op.literal.data(), op.length);
        }
        pos += op.length;
    }
    return out;
}

double drr(std::uint64_t original_size, std::uint64_t reduced_size) {
    if (reduced_size == 0) {
        throw ConfigError("drr: reduced size must be positive");
    }
    return static_cast<double>(original_size) / static_cast<double>(reduced_size);
}

}  // namespace dsketch
