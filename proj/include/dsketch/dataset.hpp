#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "dsketch/block.hpp"
#include "dsketch/corpus.hpp"
#include "dsketch/dkcluster.hpp"

namespace dsketch {

struct DatasetConfig {
    std::uint32_t n_blk = 64;             // records per class after balancing
    double train_fraction = 0.10;
    std::uint32_t perturb_bytes_max = 64;
    std::uint32_t perturb_runs_max = 4;
    std::uint64_t seed = 0;
};

struct LabeledRecord {
    Block block;
    std::uint32_t label;
};

struct LabeledDataset {
    std::vector<LabeledRecord> records;
    std::uint32_t class_count = 0;
};

/// Resizes every cluster to exactly `n_blk` records: large clusters are
/// down-sampled uniformly, small ones keep all members and are padded with
/// perturbed copies of their medoid. Label = cluster position.
LabeledDataset balance_clusters(const Clustering& clustering, const BlockCorpus& corpus,
                                const DatasetConfig& cfg);

/// Stratified split. Each class sends max(1, round(train_fraction * n)) records
/// to the training side, so a one-record class lands in training.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, const DatasetConfig& cfg);

// File layout ("DSDS"): magic, u32 version = 1, u32 record_count, u32 class_count,
// then per record u32 label followed by the 4096 block bytes. All integers LE.
void export_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset import_dataset(const std::filesystem::path& path);

/// Fraction of all clustered blocks held by the largest `top_fraction` of clusters
/// (at least one cluster). Used to quantify class imbalance before balancing.
double largest_cluster_share(const Clustering& clustering, double top_fraction);

}  // namespace dsketch
