#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

#include "dsketch/container.hpp"
#include "dsketch/corpus.hpp"
#include "dsketch/fingerprint.hpp"
#include "dsketch/nnmodel.hpp"
#include "dsketch/runlog.hpp"
#include "dsketch/sfsketch.hpp"
#include "dsketch/skstore.hpp"

namespace dsketch {

enum class SketcherKind { None, Finesse, DeepSketch, Combined };

const char* to_string(SketcherKind kind);
SketcherKind parse_sketcher(const std::string& s);

struct PipelineConfig {
    SketcherKind sketcher = SketcherKind::None;
    std::shared_ptr<const SketchModel> model;   // required by DeepSketch and Combined
    std::filesystem::path store_path;           // empty = in-memory container
    SkStoreConfig sk;
    std::size_t top_k = 1;                      // learned-sketch candidates delta-encoded per block
};

enum class Step { SketchGeneration, SkRetrieval, SkUpdate, Dedup, Delta, Lossless };
inline constexpr std::size_t kStepCount = 6;
const char* to_string(Step step);

struct StepLatency {
    std::uint64_t total_ns = 0;
    std::uint64_t count = 0;
};

struct PipelineStats {
    std::uint64_t blocks_written = 0;
    std::uint64_t dedup_count = 0;
    std::uint64_t delta_count = 0;
    std::uint64_t lossless_count = 0;
    std::uint64_t logical_bytes = 0;
    std::uint64_t physical_bytes = 0;   // record bytes including per-record headers
    std::uint64_t payload_bytes = 0;    // frame bytes only
    std::uint64_t ds_delta_count = 0;   // deltas whose reference came from the learned sketch
    std::uint64_t buffer_hits = 0;      // ... of which the reference was still in the recent buffer
    std::array<StepLatency, kStepCount> latency{};

    double drr() const;
    /// Share of learned-sketch delta references found in the recent buffer.
    double buffer_hit_fraction() const;
};

/// JSON report of the stats plus sketcher name and corpus hash.
std::string stats_to_json(const PipelineStats& stats, SketcherKind sketcher, const std::string& corpus_hash);

/// Dedup -> delta -> lossless write path over one container.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg);

    /// Writes the next logical block (ids are assigned 0, 1, 2, ...).
    BlockLog write_block(const Block& b);

    Block read_block(BlockId id) const { return store_.read(id); }

    /// Commits the pending learned-sketch batch.
    void flush();

    const PipelineStats& stats() const { return stats_; }
    const Container& store() const { return store_; }
    const SkStore& sk_store() const { return sk_; }
    const PipelineConfig& config() const { return cfg_; }

private:
    struct Choice {
        BlockId ref;
        Frame frame;
    };

    PipelineConfig cfg_;
    Container store_;
    FpStore fp_;
    SfStore sf_;
    SkStore sk_;
    std::unordered_map<BlockId, Block> plain_;   // content of Lossless records, for delta encoding
    PipelineStats stats_;
    BlockId next_id_ = 0;
};

struct RunResult {
    PipelineStats stats;
    RunLog log;
};

/// Writes every block in order, flushes the sketch store, and (unless disabled)
/// reads every block back. Read-back mismatches raise VerifyError.
RunResult run_corpus(Pipeline& p, const BlockCorpus& corpus, bool verify = true);

/// Compares every block of an existing container against the corpus; returns
/// the number of mismatching blocks. Missing blocks count as mismatches.
std::size_t verify_store(const Container& store, const BlockCorpus& corpus);

}  // namespace dsketch
