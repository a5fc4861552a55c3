#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dsketch/block.hpp"
#include "dsketch/nnmodel.hpp"

namespace dsketch {

enum class SkMode { Exact, Approximate };

struct SkStoreConfig {
    std::size_t flush_threshold = 128;   // T_blk
    std::size_t buffer_capacity = 128;   // R
    SkMode mode = SkMode::Exact;
};

enum class SkSource { Index, Buffer };

struct SkCandidate {
    BlockId id;
    std::uint32_t distance;
    SkSource source;
};

struct QueryResult {
    std::vector<SkCandidate> candidates;   // nearest first

    bool empty() const { return candidates.empty(); }
    const SkCandidate& best() const { return candidates.front(); }
};

/// Learned-sketch store. Inserts land in a pending buffer that doubles as the
/// recent-sketch buffer; the buffer is committed to the index as one batch when
/// it reaches the flush threshold.
///
/// Approximate mode splits each sketch into eight 16-bit chunks and only scores
/// committed entries sharing at least one chunk with the query (multi-index
/// hashing with radius 0 per chunk). Pending entries are always scanned exactly.
class SkStore {
public:
    explicit SkStore(SkStoreConfig cfg = {});

    const SkStoreConfig& config() const { return cfg_; }

    /// k nearest entries over index and buffer, ordered by (distance, id), with the
    /// index winning exact ties. A buffer entry therefore outranks the best committed
    /// entry only when it is strictly closer.
    QueryResult query(const Sketch& h, std::size_t k = 1) const;

    void insert(const Sketch& h, BlockId id);
    void flush();

    std::size_t committed_size() const { return index_.size(); }
    std::size_t pending_size() const { return pending_.size(); }
    std::size_t flush_count() const { return flushes_; }

    struct Entry {
        Sketch sketch;
        BlockId id;
    };
    const std::vector<Entry>& committed() const { return index_; }
    const std::vector<Entry>& pending() const { return pending_; }

private:
    void commit_batch();
    std::vector<SkCandidate> scan_index(const Sketch& h, std::size_t k) const;

    SkStoreConfig cfg_;
    std::vector<Entry> index_;
    std::vector<Entry> pending_;
    std::size_t flushes_ = 0;
    // Approximate mode: chunk position -> chunk value -> positions in index_.
    std::array<std::unordered_map<std::uint16_t, std::vector<std::uint32_t>>, 8> chunks_;
};

}  // namespace dsketch
