#include "dsketch/runlog.hpp"

#include <fstream>

#include <json.hpp>

#include "dsketch/errors.hpp"

namespace dsketch {

using nlohmann::json;

namespace {

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
    if (v) {
        j[key] = *v;
    }
}

template <typename T>
void get_opt(const json& j, const char* key, std::optional<T>& v) {
    if (const auto it = j.find(key); it != j.end() && !it->is_null()) {
        v = it->get<T>();
    }
}

}  // namespace

RecordKind parse_outcome(const std::string& s) {
    if (s == "lossless") {
        return RecordKind::Lossless;
    }
    if (s == "delta") {
        return RecordKind::Delta;
    }
    if (s == "dedup") {
        return RecordKind::Dedup;
    }
    throw FormatError("unknown outcome '" + s + "'");
}

void write_run_log(const RunLog& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw StoreIoError("cannot create run log: " + path.string());
    }
    out << json{{"type", "header"},
                {"corpus_hash", log.corpus_hash},
                {"sketcher", log.sketcher},
                {"block_count", log.block_count}}
               .dump()
        << '\n';
    for (const auto& b : log.blocks) {
        json j{{"index", b.index},
               {"outcome", to_string(b.outcome)},
               {"stored_size", b.stored_size},
               {"lossless_size", b.lossless_size}};
        put_opt(j, "ref", b.ref);
        put_opt(j, "sketch_distance", b.sketch_distance);
        put_opt(j, "ds_delta_size", b.ds_delta_size);
        put_opt(j, "fs_delta_size", b.fs_delta_size);
        put_opt(j, "fs_match_count", b.fs_match_count);
        put_opt(j, "buffer_hit", b.buffer_hit);
        put_opt(j, "source", b.source);
        out << j.dump() << '\n';
    }
    if (!out.flush()) {
        throw StoreIoError("write failure on run log: " + path.string());
    }
}

RunLog read_run_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw StoreIoError("cannot open run log: " + path.string());
    }
    RunLog log;
    bool have_header = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            if (!have_header) {
                if (j.value("type", "") != "header") {
                    throw FormatError("first line is not a header");
                }
                log.corpus_hash = j.at("corpus_hash").get<std::string>();
                log.sketcher = j.at("sketcher").get<std::string>();
                log.block_count = j.at("block_count").get<std::uint64_t>();
                have_header = true;
                continue;
            }
            BlockLog b;
            b.index = j.at("index").get<std::uint64_t>();
            b.outcome = parse_outcome(j.at("outcome").get<std::string>());
            b.stored_size = j.at("stored_size").get<std::uint64_t>();
            b.lossless_size = j.at("lossless_size").get<std::uint64_t>();
            get_opt(j, "ref", b.ref);
            get_opt(j, "sketch_distance", b.sketch_distance);
            get_opt(j, "ds_delta_size", b.ds_delta_size);
            get_opt(j, "fs_delta_size", b.fs_delta_size);
            get_opt(j, "fs_match_count", b.fs_match_count);
            get_opt(j, "buffer_hit", b.buffer_hit);
            get_opt(j, "source", b.source);
            if (b.index != log.blocks.size()) {
                throw FormatError("block indices must be consecutive from 0");
            }
            log.blocks.push_back(std::move(b));
        } catch (const json::exception& e) {
            throw FormatError("run log " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("run log " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) {
        throw FormatError("run log " + path.string() + ": missing header");
    }
    if (log.blocks.size() != log.block_count) {
        throw FormatError("run log " + path.string() + ": header announces " + std::to_string(log.block_count) +
                          " blocks, found " + std::to_string(log.blocks.size()));
    }
    return log;
}

}  // namespace dsketch
