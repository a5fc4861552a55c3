#pragma once

// Little-endian and LEB128 helpers shared by the on-disk formats and frames.

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace dsketch::detail {

inline void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(v | 0x80));
        v >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(v));
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_le<std::uint32_t>(out, bits);
}

/// Bounds-checked cursor over a byte buffer. Every read reports failure through
/// `ok()` instead of throwing, so each format can raise its own error type.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    bool ok() const { return ok_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }
    bool at_end() const { return pos_ == data_.size(); }

    bool varint(std::uint64_t& v) {
        v = 0;
        for (unsigned shift = 0; shift < 64; shift += 7) {
            if (pos_ >= data_.size()) {
                return fail();
            }
            const std::uint8_t b = data_[pos_++];
            v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            if ((b & 0x80) == 0) {
                return true;
            }
        }
        return fail();
    }

    template <typename T>
    bool le(T& v) {
        if (remaining() < sizeof(T)) {
            return fail();
        }
        std::uint64_t acc = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            acc |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        v = static_cast<T>(acc);
        return true;
    }

    bool f32(float& f) {
        std::uint32_t bits;
        if (!le(bits)) {
            return false;
        }
        std::memcpy(&f, &bits, sizeof f);
        return true;
    }

    bool bytes(std::size_t n, std::span<const std::uint8_t>& out) {
        if (remaining() < n) {
            return fail();
        }
        out = data_.subspan(pos_, n);
        pos_ += n;
        return true;
    }

private:
    bool fail() {
        ok_ = false;
        return false;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    bool ok_ = true;
};

}  // namespace dsketch::detail
