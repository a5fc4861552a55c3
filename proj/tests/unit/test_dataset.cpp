#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "dsketch/dataset.hpp"
#include "dsketch/errors.hpp"
#include "test_util.hpp"

using namespace dsketch;
using dsketch::testing::random_block;
using dsketch::testing::TempDir;

namespace {

std::map<std::uint32_t, std::size_t> class_sizes(const LabeledDataset& d) {
    std::map<std::uint32_t, std::size_t> m;
    for (const auto& r : d.records) {
        ++m[r.label];
    }
    return m;
}

bool same_records(const LabeledDataset& a, const LabeledDataset& b) {
    if (a.class_count != b.class_count || a.records.size() != b.records.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        if (a.records[i].label != b.records[i].label || a.records[i].block != b.records[i].block) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST(BalanceClusters, SingletonIsPaddedWithinBounds) {
    Rng rng(1);
    BlockCorpus corpus;
    corpus.blocks = {random_block(rng)};
    Clustering c;
    c.clusters = {{{0}, 0, 2.0}};
    DatasetConfig cfg;
    cfg.n_blk = 16;
    const auto d = balance_clusters(c, corpus, cfg);
    ASSERT_EQ(d.records.size(), 16u);
    EXPECT_EQ(d.records[0].block, corpus[0]);
    for (std::size_t i = 1; i < 16; ++i) {
        const auto diff = byte_diff(d.records[i].block, corpus[0]);
        EXPECT_GE(diff, 1u);
        EXPECT_LE(diff, cfg.perturb_bytes_max);
        EXPECT_EQ(d.records[i].label, 0u);
    }
}

TEST(BalanceClusters, LargeClusterIsDownSampledFromMembers) {
    const auto g = generate_corpus({.families = 1, .blocks_per_family = 100, .perturb_bytes_max = 32, .seed = 2});
    Clustering c;
    Cluster cl;
    for (BlockId i = 0; i < 100; ++i) {
        cl.members.push_back(i);
    }
    cl.medoid = 0;
    c.clusters = {cl};
    DatasetConfig cfg;
    cfg.n_blk = 16;
    const auto d = balance_clusters(c, g.corpus, cfg);
    ASSERT_EQ(d.records.size(), 16u);
    std::set<std::vector<std::uint8_t>> distinct;
    for (const auto& r : d.records) {
        const bool member = std::find(g.corpus.blocks.begin(), g.corpus.blocks.end(), r.block) != g.corpus.blocks.end();
        EXPECT_TRUE(member);
        distinct.insert({r.block.begin(), r.block.end()});
    }
    EXPECT_EQ(distinct.size(), 16u);
}

TEST(BalanceClusters, EveryClassHasExactlyNblkAndIsDeterministic) {
    const auto g = generate_corpus({.families = 5, .blocks_per_family = 12, .perturb_bytes_max = 16, .seed = 3});
    const auto c = dk_cluster(g.corpus, {});
    DatasetConfig cfg;
    cfg.n_blk = 9;
    const auto a = balance_clusters(c, g.corpus, cfg);
    for (const auto& [label, n] : class_sizes(a)) {
        EXPECT_EQ(n, 9u) << label;
    }
    EXPECT_EQ(class_sizes(a).size(), c.clusters.size());
    EXPECT_TRUE(same_records(a, balance_clusters(c, g.corpus, cfg)));
    EXPECT_THROW(balance_clusters(Clustering{}, g.corpus, cfg), ConfigError);
}

// Families with Zipf-like sizes: the largest 10% of clusters hold roughly half
// of all clustered blocks before balancing.
TEST(BalanceClusters, SkewedClusteringMotivatesBalancing) {
    BlockCorpus corpus;
    std::vector<std::uint32_t> family;
    for (std::uint32_t r = 1; r <= 40; ++r) {
        const auto size = std::max<std::uint32_t>(2, static_cast<std::uint32_t>(std::lround(100.0 / r)));
        const auto g = generate_corpus({.families = 1, .blocks_per_family = size, .perturb_bytes_max = 16, .seed = 100 + r});
        corpus.blocks.insert(corpus.blocks.end(), g.corpus.blocks.begin(), g.corpus.blocks.end());
    }
    const auto c = dk_cluster(corpus, {});
    EXPECT_EQ(c.clusters.size(), 40u);
    const double share = largest_cluster_share(c, 0.10);
    EXPECT_GT(share, 0.40);
    EXPECT_LT(share, 0.56);

    DatasetConfig cfg;
    cfg.n_blk = 8;
    const auto d = balance_clusters(c, corpus, cfg);
    for (const auto& [label, n] : class_sizes(d)) {
        EXPECT_EQ(n, 8u);
    }
}

TEST(Split, TenPerClassAtTenPercent) {
    LabeledDataset d;
    d.class_count = 3;
    for (std::uint32_t label = 0; label < 3; ++label) {
        for (int i = 0; i < 10; ++i) {
            Block b{};
            b[0] = static_cast<std::uint8_t>(label);
            b[1] = static_cast<std::uint8_t>(i);
            d.records.push_back({b, label});
        }
    }
    DatasetConfig cfg;
    const auto [train, held] = split(d, cfg);
    const auto ts = class_sizes(train);
    const auto hs = class_sizes(held);
    for (std::uint32_t label = 0; label < 3; ++label) {
        EXPECT_EQ(ts.at(label), 1u);
        EXPECT_EQ(hs.at(label), 9u);
    }
    const auto [train2, held2] = split(d, cfg);
    EXPECT_TRUE(same_records(train, train2));
    EXPECT_TRUE(same_records(held, held2));

    std::set<std::pair<int, int>> all;
    for (const auto* part : {&train, &held}) {
        for (const auto& r : part->records) {
            EXPECT_TRUE(all.insert({r.block[0], r.block[1]}).second) << "record in both parts";
        }
    }
    EXPECT_EQ(all.size(), 30u);
}

TEST(Split, SingleRecordClassGoesToTraining) {
    LabeledDataset d;
    d.class_count = 1;
    d.records.push_back({Block{}, 0});
    const auto [train, held] = split(d, {});
    EXPECT_EQ(train.records.size(), 1u);
    EXPECT_TRUE(held.records.empty());
}

TEST(Split, RejectsBadFraction) {
    DatasetConfig cfg;
    cfg.train_fraction = 1.0;
    EXPECT_THROW(split(LabeledDataset{}, cfg), ConfigError);
    cfg.train_fraction = 0.5;
    cfg.n_blk = 0;
    EXPECT_THROW(split(LabeledDataset{}, cfg), ConfigError);
}

TEST(DatasetFile, ExportImportIdentity) {
    TempDir dir;
    Rng rng(4);
    LabeledDataset d;
    d.class_count = 4;
    for (int i = 0; i < 12; ++i) {
        d.records.push_back({random_block(rng), static_cast<std::uint32_t>(i % 4)});
    }
    export_dataset(d, dir / "d.dsds");
    EXPECT_EQ(std::filesystem::file_size(dir / "d.dsds"), 16u + 12u * 4100u);
    EXPECT_TRUE(same_records(d, import_dataset(dir / "d.dsds")));
}

TEST(DatasetFile, EmptyDatasetRoundTrips) {
    TempDir dir;
    LabeledDataset d;
    d.class_count = 0;
    export_dataset(d, dir / "d.dsds");
    EXPECT_TRUE(same_records(d, import_dataset(dir / "d.dsds")));
}

TEST(DatasetFile, HeaderBytesAreLittleEndian) {
    TempDir dir;
    LabeledDataset d;
    d.class_count = 0x0102;
    d.records.push_back({Block{}, 0x0101});
    export_dataset(d, dir / "d.dsds");
    std::ifstream in(dir / "d.dsds", std::ios::binary);
    std::vector<unsigned char> head(20);
    in.read(reinterpret_cast<char*>(head.data()), 20);
    EXPECT_EQ(std::vector<unsigned char>(head.begin(), head.end()),
              (std::vector<unsigned char>{'D', 'S', 'D', 'S', 1, 0, 0, 0, 1, 0, 0, 0, 2, 1, 0, 0, 1, 1, 0, 0}));
}

TEST(DatasetFile, CorruptionIsFormatError) {
    TempDir dir;
    LabeledDataset d;
    d.class_count = 2;
    d.records.push_back({Block{}, 1});
    d.records.push_back({Block{}, 0});
    export_dataset(d, dir / "d.dsds");
    auto bytes = [&] {
        std::ifstream in(dir / "d.dsds", std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }();
    const auto write_variant = [&](auto mutate) {
        auto b = bytes;
        mutate(b);
        std::ofstream(dir / "bad.dsds", std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
        return dir / "bad.dsds";
    };
    EXPECT_THROW(import_dataset(write_variant([](auto& b) { b[8] = 3; })), FormatError);   // record count
    EXPECT_THROW(import_dataset(write_variant([](auto& b) { b[0] = 'X'; })), FormatError);
    EXPECT_THROW(import_dataset(write_variant([](auto& b) { b[4] = 2; })), FormatError);   // version
    EXPECT_THROW(import_dataset(write_variant([](auto& b) { b.pop_back(); })), FormatError);
    EXPECT_THROW(import_dataset(write_variant([](auto& b) { b[16] = 5; })), FormatError);  // label >= classes
    EXPECT_THROW(import_dataset(write_variant([](auto& b) { b.resize(10); })), FormatError);
    EXPECT_THROW(import_dataset(dir / "missing.dsds"), StoreIoError);
}
