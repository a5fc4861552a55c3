#include <gtest/gtest.h>

#include <fstream>

#include "dsketch/corpus.hpp"
#include "dsketch/errors.hpp"
#include "test_util.hpp"

using namespace dsketch;
using dsketch::testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::size_t diff_runs(const Block& a, const Block& b) {
    std::size_t runs = 0;
    bool in_run = false;
    for (std::size_t i = 0; i < kBlockSize; ++i) {
        const bool d = a[i] != b[i];
        runs += d && !in_run;
        in_run = d;
    }
    return runs;
}

}  // namespace

TEST(LoadCorpus, ExactMultipleSplitsIntoHalves) {
    TempDir dir;
    std::vector<std::uint8_t> bytes(8192);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>(i * 7);
    }
    write_bytes(dir / "c.bin", bytes);
    const auto c = load_corpus(dir / "c.bin");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_TRUE(std::equal(c[0].begin(), c[0].end(), bytes.begin()));
    EXPECT_TRUE(std::equal(c[1].begin(), c[1].end(), bytes.begin() + 4096));
}

TEST(LoadCorpus, TrailingPartialBlockIsZeroPadded) {
    TempDir dir;
    std::vector<std::uint8_t> bytes(4100, 0xab);
    write_bytes(dir / "c.bin", bytes);
    const auto c = load_corpus(dir / "c.bin");
    ASSERT_EQ(c.size(), 2u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(c[1][i], 0xab);
    }
    for (std::size_t i = 4; i < kBlockSize; ++i) {
        ASSERT_EQ(c[1][i], 0) << i;
    }
}

TEST(LoadCorpus, EmptyFileGivesEmptyCorpus) {
    TempDir dir;
    write_bytes(dir / "c.bin", {});
    EXPECT_EQ(load_corpus(dir / "c.bin").size(), 0u);
}

TEST(LoadCorpus, MissingFileNamesPath) {
    try {
        load_corpus("/nonexistent/corpus.bin");
        FAIL();
    } catch (const CorpusLoadError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/corpus.bin"), std::string::npos);
    }
}

TEST(LoadCorpus, SaveLoadRoundTrip) {
    TempDir dir;
    const auto g = generate_corpus({.families = 3, .blocks_per_family = 5, .seed = 11});
    save_corpus(g.corpus, dir / "c.bin");
    const auto back = load_corpus(dir / "c.bin");
    EXPECT_EQ(back.blocks, g.corpus.blocks);
    EXPECT_EQ(corpus_hash(back), corpus_hash(g.corpus));
}

TEST(GenerateCorpus, ZeroPerturbationGivesIdenticalBlocks) {
    const auto g = generate_corpus({.families = 1, .blocks_per_family = 3, .duplicate_rate = 0, .perturb_bytes_max = 0});
    ASSERT_EQ(g.corpus.size(), 3u);
    EXPECT_EQ(g.corpus[0], g.corpus[1]);
    EXPECT_EQ(g.corpus[1], g.corpus[2]);
}

TEST(GenerateCorpus, SameSpecSameBytes) {
    const SynthSpec spec{.families = 2, .blocks_per_family = 2, .duplicate_rate = 0, .perturb_bytes_max = 16, .seed = 7};
    EXPECT_EQ(generate_corpus(spec).corpus.blocks, generate_corpus(spec).corpus.blocks);
    auto other = spec;
    other.seed = 8;
    EXPECT_NE(generate_corpus(spec).corpus.blocks, generate_corpus(other).corpus.blocks);
}

TEST(GenerateCorpus, FamilyDistancesAcrossSeeds) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = generate_corpus({.families = 4, .blocks_per_family = 64, .perturb_bytes_max = 32, .seed = seed});
        ASSERT_EQ(g.corpus.size(), 256u);
        for (std::size_t i = 0; i < g.corpus.size(); ++i) {
            EXPECT_LE(byte_diff(g.corpus[i], g.templates[g.family[i]]), 32u);
        }
        for (std::size_t i = 0; i < g.corpus.size(); i += 7) {
            for (std::size_t j = 0; j < g.corpus.size(); j += 5) {
                if (g.family[i] != g.family[j]) {
                    EXPECT_GE(byte_diff(g.corpus[i], g.corpus[j]), 1024u);
                }
            }
        }
    }
}

TEST(GenerateCorpus, DuplicateRateProducesEarlierCopies) {
    const auto g = generate_corpus({.families = 4, .blocks_per_family = 25, .duplicate_rate = 0.3, .seed = 5});
    std::size_t dups = 0;
    for (std::size_t i = 0; i < g.corpus.size(); ++i) {
        if (!g.duplicate[i]) {
            continue;
        }
        ++dups;
        bool found = false;
        for (std::size_t j = 0; j < i && !found; ++j) {
            found = g.corpus[j] == g.corpus[i];
        }
        EXPECT_TRUE(found) << i;
    }
    EXPECT_EQ(dups, 30u);
    EXPECT_FALSE(g.duplicate[0]);
}

TEST(GenerateCorpus, RejectsBadSpecs) {
    EXPECT_THROW(generate_corpus({.families = 0}), ConfigError);
    EXPECT_THROW(generate_corpus({.blocks_per_family = 0}), ConfigError);
    EXPECT_THROW(generate_corpus({.duplicate_rate = 1.5}), ConfigError);
    EXPECT_THROW(generate_corpus({.perturb_bytes_max = 5000}), ConfigError);
}

TEST(PerturbBlock, SingleByteBound) {
    Rng rng(1);
    const auto b = dsketch::testing::random_block(rng);
    for (int i = 0; i < 200; ++i) {
        EXPECT_EQ(byte_diff(b, perturb_block(b, 1, 1, rng)), 1u);
    }
}

TEST(PerturbBlock, BoundsOnBytesAndRuns) {
    Rng rng(2);
    const auto b = dsketch::testing::random_block(rng);
    std::size_t max_seen = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto p = perturb_block(b, 64, 4, rng);
        const auto d = byte_diff(b, p);
        ASSERT_GE(d, 1u);
        ASSERT_LE(d, 64u);
        ASSERT_LE(diff_runs(b, p), 4u);
        max_seen = std::max(max_seen, d);
    }
    EXPECT_GT(max_seen, 48u);
}

TEST(PerturbBlock, ZeroBlockAndFullRange) {
    Rng rng(3);
    const auto z = dsketch::testing::filled_block(0);
    const auto p = perturb_block(z, 4096, 1, rng);
    EXPECT_GE(byte_diff(z, p), 1u);
}

TEST(PerturbBlock, SameSeedSameOutput) {
    Rng a(99), b(99);
    const auto base = dsketch::testing::filled_block(0x5a);
    EXPECT_EQ(perturb_block(base, 64, 4, a), perturb_block(base, 64, 4, b));
}

TEST(PerturbBlock, RejectsBadBounds) {
    Rng rng(4);
    const auto b = dsketch::testing::filled_block(1);
    EXPECT_THROW(perturb_block(b, 0, 1, rng), ConfigError);
    EXPECT_THROW(perturb_block(b, 4097, 1, rng), ConfigError);
    EXPECT_THROW(perturb_block(b, 8, 0, rng), ConfigError);
}

TEST(Rng, BelowStaysInRange) {
    Rng rng(5);
    std::array<int, 7> hist{};
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        ASSERT_LT(v, 7u);
        ++hist[v];
    }
    for (const auto h : hist) {
        EXPECT_GT(h, 800);
    }
}
