#include "dsketch/fingerprint.hpp"

#include <openssl/evp.h>

#include "dsketch/errors.hpp"

namespace dsketch {

struct Md5::Ctx {
    EVP_MD_CTX* md = nullptr;
};

Md5::Md5() : ctx_(std::make_unique<Ctx>()) {
    ctx_->md = EVP_MD_CTX_new();
    if (ctx_->md == nullptr || EVP_DigestInit_ex(ctx_->md, EVP_md5(), nullptr) != 1) {
        throw Error("md5: OpenSSL digest initialisation failed");
    }
}

Md5::~Md5() {
    if (ctx_ && ctx_->md) {
        EVP_MD_CTX_free(ctx_->md);
    }
}

void Md5::update(ByteSpan data) {
    if (EVP_DigestUpdate(ctx_->md, data.data(), data.size()) != 1) {
        throw Error("md5: digest update failed");
    }
}

std::array<std::uint8_t, 16> Md5::finish() {
    std::array<std::uint8_t, 16> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_->md, out.data(), &len) != 1 || len != out.size()) {
        throw Error("md5: digest finalisation failed");
    }
    return out;
}

std::array<std::uint8_t, 16> md5(ByteSpan data) {
    Md5 h;
    h.update(data);
    return h.finish();
}

Fingerprint fingerprint(const Block& b) {
    return Fingerprint{md5(b)};
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (const auto v : bytes) {
        s.push_back(kDigits[v >> 4]);
        s.push_back(kDigits[v & 0xf]);
    }
    return s;
}

std::optional<BlockId> FpStore::lookup(const Fingerprint& fp) const {
    if (auto it = map_.find(fp); it != map_.end()) {
        return it->second;
    }
    return std::nullopt;
}

bool FpStore::insert(const Fingerprint& fp, BlockId id) {
    return map_.try_emplace(fp, id).second;
}

}  // namespace dsketch
