#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dsketch/block.hpp"

namespace dsketch {

/// Super-feature sketch parameters. Only the default shape (12 features,
/// 3 super-features of 4 features, 48-byte windows) is supported by the
/// fixed-width types below; the struct exists so callers can state it.
struct SfConfig {
    std::size_t features = 12;
    std::size_t superfeatures = 3;
    std::size_t window = 48;
};

inline constexpr std::size_t kSfFeatures = 12;
inline constexpr std::size_t kSfCount = 3;
inline constexpr std::size_t kSfWindow = 48;
inline constexpr std::size_t kSfPerGroup = kSfFeatures / kSfCount;
inline constexpr std::size_t kSfWindowCount = kBlockSize - kSfWindow + 1;

using FeatureVector = std::array<std::uint64_t, kSfFeatures>;

/// 192 bits: the low 48 bits of four features packed back to back.
using SuperFeature = std::array<std::uint64_t, 3>;
using SuperFeatureSet = std::array<SuperFeature, kSfCount>;

/// Rolling polynomial hash of the 48-byte window, before per-feature mixing.
std::uint64_t window_polynomial(const std::uint8_t* window);

/// Per-feature hash H_i of a window's polynomial value.
std::uint64_t feature_hash(std::uint64_t polynomial, std::size_t feature);

/// Maximum of H_i over all 4049 windows, for each i.
FeatureVector extract_features(const Block& b, const SfConfig& cfg = {});

SuperFeatureSet build_superfeatures(const FeatureVector& fv, const SfConfig& cfg = {});

inline SuperFeatureSet superfeatures(const Block& b, const SfConfig& cfg = {}) {
    return build_superfeatures(extract_features(b, cfg), cfg);
}

/// Number of slots in which two sketches carry the same super-feature.
std::size_t match_count(const SuperFeatureSet& a, const SuperFeatureSet& b);

struct SfMatch {
    BlockId id;
    std::size_t matches;
};

/// Exact-match super-feature store: one hash map per slot.
class SfStore {
public:
    /// Block sharing the most super-features with `sfs`; ties go to the
    /// earliest inserted block. Empty if nothing shares a super-feature.
    std::optional<SfMatch> match(const SuperFeatureSet& sfs) const;

    void insert(const SuperFeatureSet& sfs, BlockId id);

    std::size_t size() const { return order_.size(); }

private:
    struct KeyHash {
        std::size_t operator()(const SuperFeature& sf) const noexcept {
            return static_cast<std::size_t>(sf[0] ^ (sf[1] * 0x9e3779b97f4a7c15ull) ^
                                            (sf[2] * 0xc2b2ae3d27d4eb4full));
        }
    };

    std::array<std::unordered_map<SuperFeature, std::vector<BlockId>, KeyHash>, kSfCount> slots_;
    std::unordered_map<BlockId, std::uint64_t> order_;   // id -> insertion sequence
};

}  // namespace dsketch
