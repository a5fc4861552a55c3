#include "dsketch/skstore.hpp"

#include <algorithm>

#include "dsketch/errors.hpp"

namespace dsketch {

namespace {

bool closer(const SkCandidate& a, const SkCandidate& b) {
    if (a.distance != b.distance) {
        return a.distance < b.distance;
    }
    if (a.id != b.id) {
        return a.id < b.id;
    }
    return a.source == SkSource::Index && b.source == SkSource::Buffer;
}

std::uint16_t chunk(const Sketch& s, std::size_t i) {
    return static_cast<std::uint16_t>(s.words[i / 4] >> (16 * (i % 4)));
}

// Keeps the k best of `cands` in order.
void keep_best(std::vector<SkCandidate>& cands, std::size_t k) {
    if (cands.size() > k) {
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), closer);
        cands.resize(k);
    } else {
        std::sort(cands.begin(), cands.end(), closer);
    }
}

}  // namespace

SkStore::SkStore(SkStoreConfig cfg) : cfg_(cfg) {
    if (cfg_.flush_threshold < 1 || cfg_.buffer_capacity < cfg_.flush_threshold) {
        throw ConfigError("sk store config: need flush_threshold >= 1 and buffer_capacity >= flush_threshold");
    }
    pending_.reserve(cfg_.flush_threshold);
}

std::vector<SkCandidate> SkStore::scan_index(const Sketch& h, std::size_t k) const {
    std::vector<SkCandidate> out;
    if (cfg_.mode == SkMode::Exact) {
        out.reserve(index_.size());
        for (const auto& e : index_) {
            out.push_back({e.id, hamming(h, e.sketch), SkSource::Index});
        }
    } else {
        std::vector<std::uint32_t> pos;
        for (std::size_t c = 0; c < chunks_.size(); ++c) {
            const auto it = chunks_[c].find(chunk(h, c));
            if (it != chunks_[c].end()) {
                pos.insert(pos.end(), it->second.begin(), it->second.end());
            }
        }
        std::sort(pos.begin(), pos.end());
        pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
        for (const auto p : pos) {
            out.push_back({index_[p].id, hamming(h, index_[p].sketch), SkSource::Index});
        }
    }
    keep_best(out, k);
    return out;
}

QueryResult SkStore::query(const Sketch& h, std::size_t k) const {
    if (k < 1) {
        throw ConfigError("sk query: k must be >= 1");
    }
    QueryResult r;
    auto committed = scan_index(h, k);

    std::vector<SkCandidate> buffered;
    for (const auto& e : pending_) {
        buffered.push_back({e.id, hamming(h, e.sketch), SkSource::Buffer});
    }
    keep_best(buffered, k);

    // A single (distance, id, index-before-buffer) order already puts every
    // buffer entry strictly closer than the best committed one ahead of it.
    r.candidates = std::move(committed);
    r.candidates.insert(r.candidates.end(), buffered.begin(), buffered.end());
    keep_best(r.candidates, k);
    return r;
}

void SkStore::insert(const Sketch& h, BlockId id) {
    pending_.push_back({h, id});
    if (pending_.size() >= cfg_.flush_threshold) {
        commit_batch();
    }
}

void SkStore::flush() {
    if (!pending_.empty()) {
        commit_batch();
    }
}

void SkStore::commit_batch() {
    for (auto& e : pending_) {
        const auto pos = static_cast<std::uint32_t>(index_.size());
        if (cfg_.mode == SkMode::Approximate) {
            for (std::size_t c = 0; c < chunks_.size(); ++c) {
                chunks_[c][chunk(e.sketch, c)].push_back(pos);
            }
        }
        index_.push_back(e);
    }
    pending_.clear();
    ++flushes_;
}

}  // namespace dsketch
