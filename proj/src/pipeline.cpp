#include "dsketch/pipeline.hpp"

#include <chrono>

#include <json.hpp>

#include "dsketch/codec.hpp"
#include "dsketch/errors.hpp"

namespace dsketch {

namespace {

class StepTimer {
public:
    StepTimer(PipelineStats& stats, Step step)
        : slot_(stats.latency[static_cast<std::size_t>(step)]), start_(std::chrono::steady_clock::now()) {}
    ~StepTimer() {
        const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_);
        slot_.total_ns += static_cast<std::uint64_t>(ns.count());
        ++slot_.count;
    }
    StepTimer(const StepTimer&) = delete;
    StepTimer& operator=(const StepTimer&) = delete;

private:
    StepLatency& slot_;
    std::chrono::steady_clock::time_point start_;
};

bool uses_finesse(SketcherKind k) { return k == SketcherKind::Finesse || k == SketcherKind::Combined; }
bool uses_deepsketch(SketcherKind k) { return k == SketcherKind::DeepSketch || k == SketcherKind::Combined; }

}  // namespace

const char* to_string(SketcherKind kind) {
    switch (kind) {
        case SketcherKind::None: return "none";
        case SketcherKind::Finesse: return "finesse";
        case SketcherKind::DeepSketch: return "deepsketch";
        case SketcherKind::Combined: return "combined";
    }
    return "?";
}

SketcherKind parse_sketcher(const std::string& s) {
    for (const auto k : {SketcherKind::None, SketcherKind::Finesse, SketcherKind::DeepSketch, SketcherKind::Combined}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown sketcher '" + s + "'");
}

const char* to_string(Step step) {
    switch (step) {
        case Step::SketchGeneration: return "sketch_generation";
        case Step::SkRetrieval: return "sk_retrieval";
        case Step::SkUpdate: return "sk_update";
        case Step::Dedup: return "dedup";
        case Step::Delta: return "delta";
        case Step::Lossless: return "lossless";
    }
    return "?";
}

double PipelineStats::drr() const {
    return physical_bytes == 0 ? 0.0 : static_cast<double>(logical_bytes) / static_cast<double>(physical_bytes);
}

double PipelineStats::buffer_hit_fraction() const {
    return ds_delta_count == 0 ? 0.0 : static_cast<double>(buffer_hits) / static_cast<double>(ds_delta_count);
}

std::string stats_to_json(const PipelineStats& s, SketcherKind sketcher, const std::string& corpus_hash) {
    nlohmann::json lat = nlohmann::json::object();
    for (std::size_t i = 0; i < kStepCount; ++i) {
        const auto& l = s.latency[i];
        lat[to_string(static_cast<Step>(i))] = {
            {"total_ns", l.total_ns},
            {"count", l.count},
            {"mean_ns", l.count == 0 ? 0.0 : static_cast<double>(l.total_ns) / static_cast<double>(l.count)}};
    }
    nlohmann::json j{{"corpus_hash", corpus_hash},
                     {"sketcher", to_string(sketcher)},
                     {"blocks_written", s.blocks_written},
                     {"dedup_count", s.dedup_count},
                     {"delta_count", s.delta_count},
                     {"lossless_count", s.lossless_count},
                     {"logical_bytes", s.logical_bytes},
                     {"physical_bytes", s.physical_bytes},
                     {"payload_bytes", s.payload_bytes},
                     {"drr", s.drr()},
                     {"ds_delta_count", s.ds_delta_count},
                     {"buffer_hits", s.buffer_hits},
                     {"buffer_hit_fraction", s.buffer_hit_fraction()},
                     {"latency", lat}};
    return j.dump(2);
}

Pipeline::Pipeline(PipelineConfig cfg)
    : cfg_(std::move(cfg)), store_(Container::create(cfg_.store_path)), sk_(cfg_.sk) {
    if (uses_deepsketch(cfg_.sketcher) && !cfg_.model) {
        throw ConfigError(std::string("sketcher ") + to_string(cfg_.sketcher) + " needs model weights");
    }
    if (cfg_.top_k < 1) {
        throw ConfigError("top_k must be >= 1");
    }
}

BlockLog Pipeline::write_block(const Block& b) {
    const BlockId id = next_id_++;
    BlockLog log;
    log.index = id;
    stats_.blocks_written++;
    stats_.logical_bytes += kBlockSize;

    std::optional<BlockId> dup;
    Fingerprint fp;
    {
        StepTimer t(stats_, Step::Dedup);
        fp = fingerprint(b);
        dup = fp_.lookup(fp);
    }
    if (dup) {
        store_.append({RecordKind::Dedup, id, *dup, {}});
        log.outcome = RecordKind::Dedup;
        log.ref = *dup;
        stats_.dedup_count++;
        stats_.physical_bytes += record_size(RecordKind::Dedup, 0);
        return log;
    }
    fp_.insert(fp, id);

    std::optional<SuperFeatureSet> sfs;
    std::optional<Sketch> h;
    if (cfg_.sketcher != SketcherKind::None) {
        StepTimer t(stats_, Step::SketchGeneration);
        if (uses_finesse(cfg_.sketcher)) {
            sfs = superfeatures(b);
        }
        if (uses_deepsketch(cfg_.sketcher)) {
            h = cfg_.model->sketch(b);
        }
    }

    std::optional<SfMatch> fs_match;
    QueryResult ds_result;
    if (cfg_.sketcher != SketcherKind::None) {
        StepTimer t(stats_, Step::SkRetrieval);
        if (sfs) {
            fs_match = sf_.match(*sfs);
        }
        if (h) {
            ds_result = sk_.query(*h, cfg_.top_k);
        }
    }

    std::optional<Choice> best;
    if (fs_match || !ds_result.empty()) {
        StepTimer t(stats_, Step::Delta);
        if (fs_match) {
            best = Choice{fs_match->id, delta_encode(b, plain_.at(fs_match->id))};
            log.fs_delta_size = best->frame.size();
            log.fs_match_count = static_cast<std::uint32_t>(fs_match->matches);
            log.source = "finesse";
        }
        std::optional<Choice> ds;
        for (const auto& c : ds_result.candidates) {
            Frame f = delta_encode(b, plain_.at(c.id));
            if (!ds || f.size() < ds->frame.size()) {
                ds = Choice{c.id, std::move(f)};
                log.sketch_distance = c.distance;
                log.buffer_hit = c.source == SkSource::Buffer;
            }
        }
        if (ds) {
            log.ds_delta_size = ds->frame.size();
            if (!best || ds->frame.size() < best->frame.size()) {
                best = std::move(ds);
                log.source = "deepsketch";
            }
        }
    }

    Frame lossless;
    {
        StepTimer t(stats_, Step::Lossless);
        lossless = lossless_compress(b);
    }
    log.lossless_size = lossless.size();

    if (best && delta_beats_lossless(best->frame.size(), lossless.size())) {
        log.outcome = RecordKind::Delta;
        log.ref = best->ref;
        log.stored_size = best->frame.size();
        stats_.delta_count++;
        stats_.payload_bytes += best->frame.size();
        stats_.physical_bytes += record_size(RecordKind::Delta, best->frame.size());
        if (*log.source == "deepsketch") {
            stats_.ds_delta_count++;
            stats_.buffer_hits += *log.buffer_hit ? 1 : 0;
        }
        store_.append({RecordKind::Delta, id, best->ref, std::move(best->frame)});
        return log;
    }

    log.source.reset();
    if (cfg_.sketcher != SketcherKind::None) {
        StepTimer t(stats_, Step::SkUpdate);
        if (sfs) {
            sf_.insert(*sfs, id);
        }
        if (h) {
            sk_.insert(*h, id);
        }
    }
    plain_.emplace(id, b);
    log.outcome = RecordKind::Lossless;
    log.stored_size = lossless.size();
    stats_.lossless_count++;
    stats_.payload_bytes += lossless.size();
    stats_.physical_bytes += record_size(RecordKind::Lossless, lossless.size());
    store_.append({RecordKind::Lossless, id, 0, std::move(lossless)});
    return log;
}

void Pipeline::flush() { sk_.flush(); }

std::size_t verify_store(const Container& store, const BlockCorpus& corpus) {
    std::size_t bad = 0;
    for (BlockId id = 0; id < corpus.size(); ++id) {
        if (!store.contains(id) || store.read(id) != corpus[id]) {
            ++bad;
        }
    }
    if (store.records().size() != corpus.size()) {
        bad += store.records().size() > corpus.size() ? store.records().size() - corpus.size() : 0;
    }
    return bad;
}

RunResult run_corpus(Pipeline& p, const BlockCorpus& corpus, bool verify) {
    RunResult r;
    r.log.corpus_hash = corpus_hash(corpus);
    r.log.sketcher = to_string(p.config().sketcher);
    r.log.block_count = corpus.size();
    r.log.blocks.reserve(corpus.size());
    for (const auto& b : corpus.blocks) {
        r.log.blocks.push_back(p.write_block(b));
    }
    p.flush();
    r.stats = p.stats();
    if (verify) {
        const auto bad = verify_store(p.store(), corpus);
        if (bad != 0) {
            throw VerifyError(std::to_string(bad) + " of " + std::to_string(corpus.size()) +
                              " blocks failed read-back verification");
        }
    }
    return r;
}

}  // namespace dsketch
