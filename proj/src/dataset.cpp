#include "dsketch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "binio.hpp"
#include "dsketch/errors.hpp"

namespace dsketch {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

void validate(const DatasetConfig& cfg) {
    if (cfg.n_blk < 1 || !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw ConfigError("dataset config: need n_blk >= 1 and 0 < train_fraction < 1");
    }
}

}  // namespace

LabeledDataset balance_clusters(const Clustering& clustering, const BlockCorpus& corpus,
                                const DatasetConfig& cfg) {
    validate(cfg);
    if (clustering.clusters.empty()) {
        throw ConfigError("balance_clusters: clustering has no clusters");
    }
    LabeledDataset out;
    out.class_count = static_cast<std::uint32_t>(clustering.clusters.size());
    out.records.reserve(static_cast<std::size_t>(cfg.n_blk) * out.class_count);

    for (std::uint32_t label = 0; label < out.class_count; ++label) {
        const auto& c = clustering.clusters[label];
        Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * (label + 1)));
        std::vector<BlockId> chosen = c.members;
        if (chosen.size() > cfg.n_blk) {
            rng.shuffle(chosen);
            chosen.resize(cfg.n_blk);
            std::sort(chosen.begin(), chosen.end());
        }
        for (const auto id : chosen) {
            out.records.push_back({corpus[id], label});
        }
        const Block& medoid = corpus[c.medoid];
        for (auto n = chosen.size(); n < cfg.n_blk; ++n) {
            out.records.push_back(
                {perturb_block(medoid, cfg.perturb_bytes_max, cfg.perturb_runs_max, rng), label});
        }
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, const DatasetConfig& cfg) {
    validate(cfg);
    std::vector<std::vector<std::size_t>> by_class(dataset.class_count);
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        by_class.at(dataset.records[i].label).push_back(i);
    }

    LabeledDataset train;
    LabeledDataset held;
    train.class_count = held.class_count = dataset.class_count;
    for (std::uint32_t label = 0; label < dataset.class_count; ++label) {
        auto& idx = by_class[label];
        if (idx.empty()) {
            continue;
        }
        Rng rng(cfg.seed ^ (0xc2b2ae3d27d4eb4full * (label + 1)));
        rng.shuffle(idx);
        const auto n_train = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(idx.size()))));
        std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            (k < n_train ? train : held).records.push_back(dataset.records[idx[k]]);
        }
    }
    return {std::move(train), std::move(held)};
}

void export_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
    std::vector<std::uint8_t> buf;
    buf.reserve(16 + dataset.records.size() * (4 + kBlockSize));
    buf.insert(buf.end(), std::begin(kMagic), std::end(kMagic));
    detail::put_le<std::uint32_t>(buf, kVersion);
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(dataset.records.size()));
    detail::put_le<std::uint32_t>(buf, dataset.class_count);
    for (const auto& r : dataset.records) {
        detail::put_le<std::uint32_t>(buf, r.label);
        buf.insert(buf.end(), r.block.begin(), r.block.end());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size())) ||
        !out.flush()) {
        throw StoreIoError("cannot write dataset file: " + path.string());
    }
}

LabeledDataset import_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw StoreIoError("cannot open dataset file: " + path.string());
    }
    const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::Reader r(buf);

    std::span<const std::uint8_t> magic;
    if (!r.bytes(4, magic) || !std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
        throw FormatError("dataset file: bad magic");
    }
    std::uint32_t version = 0;
    std::uint32_t count = 0;
    LabeledDataset out;
    if (!r.le(version) || !r.le(count) || !r.le(out.class_count)) {
        throw FormatError("dataset file: truncated header");
    }
    if (version != kVersion) {
        throw FormatError("dataset file: unsupported version " + std::to_string(version));
    }
    if (r.remaining() != static_cast<std::uint64_t>(count) * (4 + kBlockSize)) {
        throw FormatError("dataset file: record count " + std::to_string(count) +
                          " does not match payload size");
    }
    out.records.resize(count);
    for (auto& rec : out.records) {
        std::span<const std::uint8_t> bytes;
        r.le(rec.label);
        r.bytes(kBlockSize, bytes);
        if (rec.label >= out.class_count) {
            throw FormatError("dataset file: label " + std::to_string(rec.label) + " >= class count");
        }
        std::copy(bytes.begin(), bytes.end(), rec.block.begin());
    }
    return out;
}

double largest_cluster_share(const Clustering& clustering, double top_fraction) {
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    for (const auto& c : clustering.clusters) {
        sizes.push_back(c.members.size());
        total += c.members.size();
    }
    if (total == 0) {
        return 0.0;
    }
    std::sort(sizes.rbegin(), sizes.rend());
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(top_fraction * static_cast<double>(sizes.size()))));
    std::size_t top = 0;
    for (std::size_t i = 0; i < k && i < sizes.size(); ++i) {
        top += sizes[i];
    }
    return static_cast<double>(top) / static_cast<double>(total);
}

}  // namespace dsketch
