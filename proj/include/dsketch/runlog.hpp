#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsketch/block.hpp"
#include "dsketch/container.hpp"

namespace dsketch {

/// Per-block record of one ingest run.
struct BlockLog {
    std::uint64_t index = 0;
    RecordKind outcome = RecordKind::Lossless;
    std::optional<BlockId> ref;              // Delta and Dedup
    std::uint64_t stored_size = 0;           // payload bytes (0 for Dedup)
    std::uint64_t lossless_size = 0;         // lossless frame size (0 for Dedup)
    std::optional<std::uint32_t> sketch_distance;   // Hamming distance of the learned-sketch candidate
    std::optional<std::uint64_t> ds_delta_size;     // delta size against the learned-sketch candidate
    std::optional<std::uint64_t> fs_delta_size;     // delta size against the super-feature candidate
    std::optional<std::uint32_t> fs_match_count;
    std::optional<bool> buffer_hit;          // learned-sketch candidate came from the recent buffer
    std::optional<std::string> source;       // sketcher whose candidate was stored as the delta reference
};

struct RunLog {
    std::string corpus_hash;
    std::string sketcher;
    std::uint64_t block_count = 0;
    std::vector<BlockLog> blocks;
};

// JSON lines: a header object {"type":"header","corpus_hash","sketcher","block_count"}
// followed by one object per block. Absent optionals are omitted.
void write_run_log(const RunLog& log, const std::filesystem::path& path);
RunLog read_run_log(const std::filesystem::path& path);

RecordKind parse_outcome(const std::string& s);

}  // namespace dsketch
