#include "dsketch/container.hpp"

#include <algorithm>
#include <iterator>

#include "binio.hpp"
#include "dsketch/errors.hpp"

namespace dsketch {

namespace {

constexpr char kMagic[4] = {'D', 'D', 'C', 'S'};
constexpr std::uint32_t kVersion = 1;

bool has_ref(RecordKind kind) { return kind != RecordKind::Lossless; }

std::vector<std::uint8_t> encode(const StoredRecord& rec) {
    std::vector<std::uint8_t> buf;
    buf.reserve(record_size(rec.kind, rec.payload.size()));
    buf.push_back(static_cast<std::uint8_t>(rec.kind));
    detail::put_le<std::uint64_t>(buf, rec.id);
    if (has_ref(rec.kind)) {
        detail::put_le<std::uint64_t>(buf, rec.ref);
    }
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(rec.payload.size()));
    buf.insert(buf.end(), rec.payload.begin(), rec.payload.end());
    return buf;
}

}  // namespace

const char* to_string(RecordKind kind) {
    switch (kind) {
        case RecordKind::Lossless: return "lossless";
        case RecordKind::Delta: return "delta";
        case RecordKind::Dedup: return "dedup";
    }
    return "?";
}

std::size_t record_size(RecordKind kind, std::size_t payload_len) {
    return 1 + 8 + (has_ref(kind) ? 8 : 0) + 4 + payload_len;
}

Container::Container(Container&&) noexcept = default;
Container& Container::operator=(Container&&) noexcept = default;
Container::~Container() = default;

Container Container::create(const std::filesystem::path& path) {
    Container c;
    c.path_ = path;
    if (path.empty()) {
        return c;
    }
    c.out_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    std::vector<std::uint8_t> header(std::begin(kMagic), std::end(kMagic));
    detail::put_le<std::uint32_t>(header, kVersion);
    if (!*c.out_ || !c.out_->write(reinterpret_cast<const char*>(header.data()), 8) || !c.out_->flush()) {
        throw StoreIoError("cannot create container: " + path.string());
    }
    return c;
}

Container Container::open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw StoreIoError("cannot open container: " + path.string());
    }
    const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::Reader r(buf);
    std::span<const std::uint8_t> magic;
    std::uint32_t version = 0;
    if (!r.bytes(4, magic) || !std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
        throw FormatError("container: bad magic in " + path.string());
    }
    if (!r.le(version)) {
        throw FormatError("container: truncated header");
    }
    if (version != kVersion) {
        throw UnsupportedVersionError("container: version " + std::to_string(version));
    }

    Container c;
    c.path_ = path;
    while (!r.at_end()) {
        const auto at = r.position();
        StoredRecord rec;
        std::uint8_t kind = 0;
        std::uint32_t len = 0;
        std::span<const std::uint8_t> payload;
        bool ok = r.le(kind) && kind <= 2;
        rec.kind = static_cast<RecordKind>(kind);
        ok = ok && r.le(rec.id) && (!has_ref(rec.kind) || r.le(rec.ref)) && r.le(len) && r.bytes(len, payload);
        if (!ok) {
            throw FormatError("container: malformed record at offset " + std::to_string(at));
        }
        if (rec.kind == RecordKind::Dedup && len != 0) {
            throw FormatError("container: dedup record with payload at offset " + std::to_string(at));
        }
        rec.payload.assign(payload.begin(), payload.end());
        if (!c.index_.emplace(rec.id, c.records_.size()).second) {
            throw FormatError("container: block " + std::to_string(rec.id) + " stored twice");
        }
        c.records_.push_back(std::move(rec));
    }
    return c;
}

void Container::append(StoredRecord rec) {
    if (contains(rec.id)) {
        throw StoreIoError("container: block " + std::to_string(rec.id) + " already stored");
    }
    if (out_) {
        const auto buf = encode(rec);
        if (!out_->write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size())) ||
            !out_->flush()) {
            throw StoreIoError("write failure on container: " + path_.string());
        }
    }
    index_.emplace(rec.id, records_.size());
    records_.push_back(std::move(rec));
}

const StoredRecord& Container::record(BlockId id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
        throw NotFoundError("block " + std::to_string(id) + " is not stored");
    }
    return records_[it->second];
}

Block Container::read(BlockId id) const {
    const auto& rec = record(id);
    switch (rec.kind) {
        case RecordKind::Lossless:
            return lossless_decompress(rec.payload);
        case RecordKind::Delta:
            return delta_decode(rec.payload, read(rec.ref));
        case RecordKind::Dedup:
            return read(rec.ref);
    }
    throw FormatError("container: unknown record kind");
}

std::size_t Container::read_depth(BlockId id) const {
    std::size_t depth = 1;
    for (const auto* rec = &record(id); rec->kind != RecordKind::Lossless; rec = &record(rec->ref)) {
        if (++depth > records_.size() + 1) {
            throw FormatError("container: reference cycle at block " + std::to_string(id));
        }
    }
    return depth;
}

std::string Container::check_references() const {
    for (std::size_t pos = 0; pos < records_.size(); ++pos) {
        const auto& rec = records_[pos];
        if (rec.kind == RecordKind::Lossless) {
            continue;
        }
        const auto it = index_.find(rec.ref);
        const auto name = std::string(to_string(rec.kind)) + " record " + std::to_string(rec.id);
        if (it == index_.end()) {
            return name + " references missing block " + std::to_string(rec.ref);
        }
        if (it->second >= pos) {
            return name + " references later block " + std::to_string(rec.ref);
        }
        const auto target = records_[it->second].kind;
        if (target == RecordKind::Dedup ||
            (rec.kind == RecordKind::Delta && target != RecordKind::Lossless)) {
            return name + " references a " + to_string(target) + " record";
        }
    }
    return {};
}

}  // namespace dsketch
