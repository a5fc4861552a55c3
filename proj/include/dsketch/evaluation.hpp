#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsketch/block.hpp"
#include "dsketch/corpus.hpp"
#include "dsketch/runlog.hpp"

namespace dsketch {

struct OracleBlock {
    std::uint64_t index = 0;
    bool duplicate = false;
    std::optional<BlockId> ref;        // best candidate, present whenever a candidate existed
    std::uint64_t delta_size = 0;      // delta size against `ref`
    std::uint64_t lossless_size = 0;
    bool useful = false;               // delta against `ref` passes the pipeline's acceptance rule
};

struct OracleResult {
    std::string corpus_hash;
    std::vector<OracleBlock> blocks;
};

struct OracleOptions {
    std::size_t max_blocks = 4096;   // refuse larger corpora unless `force`
    bool force = false;
    /// Visit candidates in a seeded random order instead of ascending id. The
    /// result must not depend on it; tests use this to check that.
    std::optional<std::uint64_t> shuffle_seed;
};

/// Replays the corpus in order. Candidates for block i are the earlier blocks
/// that were not duplicates; the best is the smallest delta (highest DRR),
/// ties to the lowest id. Duplicates get no reference.
OracleResult brute_force_oracle(const BlockCorpus& corpus, const OracleOptions& opt = {});

void write_oracle(const OracleResult& r, const std::filesystem::path& path);
OracleResult read_oracle(const std::filesystem::path& path);

struct Metrics {
    std::uint64_t blocks = 0;
    std::uint64_t oracle_positive = 0;      // oracle found a useful reference
    std::uint64_t technique_positive = 0;   // technique stored a delta
    std::uint64_t fn_count = 0;
    std::uint64_t fp_count = 0;
    double fnr = 0.0;
    double fpr = 0.0;
    std::optional<double> drr_fn;   // mean per-block DRR relative to the oracle over FN blocks
    std::optional<double> drr_fp;   // ... over FP blocks
};

/// FN: the oracle has a useful reference but the technique stored no delta.
/// FP: the technique stored a delta against a reference other than the oracle's.
/// Per-block normalized DRR = oracle delta size / technique stored size.
Metrics compute_metrics(const RunLog& run, const OracleResult& oracle);
std::string metrics_to_json(const Metrics& m, const std::string& corpus_hash);

struct ScatterRow {
    std::uint64_t index;
    std::int64_t saved_a;   // 4096 - stored payload size
    std::int64_t saved_b;
};

/// Per-block saved bytes under two runs over the same corpus. Blocks
/// deduplicated in either run are skipped.
std::vector<ScatterRow> saved_bytes_scatter(const RunLog& a, const RunLog& b);

struct HammingBucket {
    std::uint32_t distance;   // bucket key; kHammingOverflow means "> 32"
    std::uint64_t count;
    double mean_saving;
};
inline constexpr std::uint32_t kHammingOverflow = 33;

/// Mean data saving, clamp(1 - delta_size / 4096, 0, 1), per Hamming distance
/// of the learned-sketch candidate. Uses every block for which a candidate was
/// retrieved; buckets without blocks are left out.
std::vector<HammingBucket> hamming_saving_curve(const RunLog& run);

void write_scatter_csv(const std::vector<ScatterRow>& rows, const std::filesystem::path& path);
void write_hamming_csv(const std::vector<HammingBucket>& buckets, const std::filesystem::path& path);

}  // namespace dsketch
