#include "dsketch/sfsketch.hpp"

#include <algorithm>

#include "dsketch/errors.hpp"

namespace dsketch {

namespace {

constexpr std::uint64_t kPolyBase = 0x5bd1e9955bd1e995ull | 1;

constexpr std::uint64_t poly_out_weight() {
    std::uint64_t w = 1;
    for (std::size_t i = 1; i < kSfWindow; ++i) {
        w *= kPolyBase;
    }
    return w;
}

constexpr std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

constexpr std::array<std::uint64_t, kSfFeatures> make_seeds() {
    std::array<std::uint64_t, kSfFeatures> s{};
    for (std::size_t i = 0; i < kSfFeatures; ++i) {
        s[i] = splitmix(0x46494e4553534531ull + i);
    }
    return s;
}

constexpr auto kSeeds = make_seeds();

// murmur3 finaliser
inline std::uint64_t fmix(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdull;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ull;
    k ^= k >> 33;
    return k;
}

void check_config(const SfConfig& cfg) {
    if (cfg.features != kSfFeatures || cfg.superfeatures != kSfCount || cfg.window != kSfWindow) {
        throw ConfigError("sfsketch: only m=12, N=3, w=48 is supported");
    }
}

}  // namespace

std::uint64_t window_polynomial(const std::uint8_t* window) {
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < kSfWindow; ++i) {
        h = h * kPolyBase + window[i];
    }
    return h;
}

std::uint64_t feature_hash(std::uint64_t polynomial, std::size_t feature) {
    return fmix(polynomial ^ kSeeds[feature]);
}

FeatureVector extract_features(const Block& b, const SfConfig& cfg) {
    check_config(cfg);
    FeatureVector fv{};
    constexpr auto out_w = poly_out_weight();
    std::uint64_t poly = window_polynomial(b.data());
    for (std::size_t j = 0;; ++j) {
        for (std::size_t i = 0; i < kSfFeatures; ++i) {
            fv[i] = std::max(fv[i], feature_hash(poly, i));
        }
        if (j + 1 == kSfWindowCount) {
            break;
        }
        poly = (poly - b[j] * out_w) * kPolyBase + b[j + kSfWindow];
    }
    return fv;
}

SuperFeatureSet build_superfeatures(const FeatureVector& fv, const SfConfig& cfg) {
    check_config(cfg);
    constexpr std::uint64_t mask48 = (std::uint64_t{1} << 48) - 1;
    SuperFeatureSet out{};
    for (std::size_t k = 0; k < kSfCount; ++k) {
        const std::uint64_t a = fv[kSfPerGroup * k] & mask48;
        const std::uint64_t b = fv[kSfPerGroup * k + 1] & mask48;
        const std::uint64_t c = fv[kSfPerGroup * k + 2] & mask48;
        const std::uint64_t d = fv[kSfPerGroup * k + 3] & mask48;
        // a | b | c | d laid out little-end first across three 64-bit words.
        out[k][0] = a | (b << 48);
        out[k][1] = (b >> 16) | (c << 32);
        out[k][2] = (c >> 32) | (d << 16);
    }
    return out;
}

std::size_t match_count(const SuperFeatureSet& a, const SuperFeatureSet& b) {
    std::size_t n = 0;
    for (std::size_t k = 0; k < kSfCount; ++k) {
        n += a[k] == b[k];
    }
    return n;
}

std::optional<SfMatch> SfStore::match(const SuperFeatureSet& sfs) const {
    std::unordered_map<BlockId, std::size_t> counts;
    for (std::size_t k = 0; k < kSfCount; ++k) {
        if (auto it = slots_[k].find(sfs[k]); it != slots_[k].end()) {
            for (const auto id : it->second) {
                ++counts[id];
            }
        }
    }
    std::optional<SfMatch> best;
    std::uint64_t best_seq = 0;
    for (const auto& [id, n] : counts) {
        const auto seq = order_.at(id);
        if (!best || n > best->matches || (n == best->matches && seq < best_seq)) {
            best = SfMatch{id, n};
            best_seq = seq;
        }
    }
    return best;
}

void SfStore::insert(const SuperFeatureSet& sfs, BlockId id) {
    order_.try_emplace(id, order_.size());
    for (std::size_t k = 0; k < kSfCount; ++k) {
        auto& ids = slots_[k][sfs[k]];
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
            ids.push_back(id);
        }
    }
}

}  // namespace dsketch
