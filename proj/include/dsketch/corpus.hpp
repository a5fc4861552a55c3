#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dsketch/block.hpp"

namespace dsketch {

/// Seeded generator with a portable bounded draw. std::mt19937_64's output
/// sequence is fixed by the standard; the distributions are not, so bounded
/// draws go through `below`.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Uniform real in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    std::uint8_t byte() { return static_cast<std::uint8_t>(next() >> 56); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

struct BlockCorpus {
    std::vector<Block> blocks;
    std::string source_id;

    std::size_t size() const { return blocks.size(); }
    const Block& operator[](BlockId id) const { return blocks.at(id); }
};

struct SynthSpec {
    std::uint32_t families = 4;
    std::uint32_t blocks_per_family = 64;
    double duplicate_rate = 0.0;
    std::uint32_t perturb_bytes_max = 64;
    std::uint32_t perturb_runs_max = 4;
    std::uint64_t seed = 1;
};

/// A generated corpus plus the ground truth the generator knows about it.
struct GeneratedCorpus {
    BlockCorpus corpus;
    std::vector<std::uint32_t> family;   // family of each block
    std::vector<Block> templates;        // one per family
    std::vector<bool> duplicate;         // block is an exact copy of an earlier block
};

/// Reads a raw corpus file. The trailing partial block, if any, is zero-padded.
BlockCorpus load_corpus(const std::filesystem::path& path);

void save_corpus(const BlockCorpus& corpus, const std::filesystem::path& path);

GeneratedCorpus generate_corpus(const SynthSpec& spec);

/// Rewrites between 1 and `max_bytes` byte positions of `b`, grouped into at most
/// `max_runs` contiguous runs at uniform offsets. Replacement bytes are uniform
/// over the 255 values that differ from the original.
Block perturb_block(const Block& b, std::uint32_t max_bytes, std::uint32_t max_runs, Rng& rng);

/// MD5 over the concatenated blocks, lowercase hex. Embedded in every report.
std::string corpus_hash(const BlockCorpus& corpus);

}  // namespace dsketch
