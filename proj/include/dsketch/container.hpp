#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <unordered_map>
#include <vector>

#include "dsketch/block.hpp"
#include "dsketch/codec.hpp"

namespace dsketch {

enum class RecordKind : std::uint8_t { Lossless = 0, Delta = 1, Dedup = 2 };

const char* to_string(RecordKind kind);

struct StoredRecord {
    RecordKind kind = RecordKind::Lossless;
    BlockId id = 0;
    BlockId ref = 0;   // Delta and Dedup only
    Frame payload;     // empty for Dedup
};

/// Bytes a record occupies in the container: kind, id, optional ref, length, payload.
std::size_t record_size(RecordKind kind, std::size_t payload_len);

/// Delta acceptance: the delta record must be strictly smaller than the lossless
/// record it replaces. Shared by the pipeline and the brute-force oracle.
inline bool delta_beats_lossless(std::size_t delta_frame, std::size_t lossless_frame) {
    return record_size(RecordKind::Delta, delta_frame) < record_size(RecordKind::Lossless, lossless_frame);
}

// Container layout ("DDCS"): magic, u32 version = 1, then append-only records
//   u8 kind, u64 logical id, [u64 ref id for Delta/Dedup], u32 payload length, payload.
// All integers little-endian. The id index is rebuilt by scanning on open.
class Container {
public:
    /// Creates (truncating) a container file. An empty path keeps it in memory.
    static Container create(const std::filesystem::path& path);
    /// Opens an existing container and rebuilds the index.
    static Container open(const std::filesystem::path& path);

    Container(Container&&) noexcept;
    Container& operator=(Container&&) noexcept;
    ~Container();

    /// Appends one record. The record is written with a single write and flushed;
    /// the in-memory index only changes once the write succeeded.
    void append(StoredRecord rec);

    bool contains(BlockId id) const { return index_.count(id) != 0; }
    const StoredRecord& record(BlockId id) const;
    const std::vector<StoredRecord>& records() const { return records_; }

    /// Decodes a logical block, following Dedup and Delta references.
    Block read(BlockId id) const;

    /// Number of records that must be decoded to read `id` (Lossless = 1).
    std::size_t read_depth(BlockId id) const;

    /// Checks every reference: targets exist and were appended earlier, Delta
    /// references point at Lossless records, Dedup references at Lossless or
    /// Delta records. Returns a description of the first violation, or empty.
    std::string check_references() const;

private:
    Container() = default;

    std::filesystem::path path_;
    std::unique_ptr<std::ofstream> out_;
    std::vector<StoredRecord> records_;
    std::unordered_map<BlockId, std::size_t> index_;
};

}  // namespace dsketch
