#include "dsketch/evaluation.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "dsketch/codec.hpp"
#include "dsketch/container.hpp"
#include "dsketch/errors.hpp"
#include "dsketch/fingerprint.hpp"

namespace dsketch {

using nlohmann::json;

OracleResult brute_force_oracle(const BlockCorpus& corpus, const OracleOptions& opt) {
    if (corpus.size() > opt.max_blocks && !opt.force) {
        const double pairs = static_cast<double>(corpus.size()) * static_cast<double>(corpus.size() - 1) / 2.0;
        throw GuardError("oracle refuses " + std::to_string(corpus.size()) + " blocks (limit " +
                         std::to_string(opt.max_blocks) + "): about " + std::to_string(static_cast<std::uint64_t>(pairs)) +
                         " delta encodings; pass the override flag to run anyway");
    }
    OracleResult out;
    out.corpus_hash = corpus_hash(corpus);
    out.blocks.resize(corpus.size());

    FpStore seen;
    std::vector<BlockId> candidates;
    for (BlockId i = 0; i < corpus.size(); ++i) {
        auto& ob = out.blocks[i];
        ob.index = i;
        if (!seen.insert(fingerprint(corpus[i]), i)) {
            ob.duplicate = true;
            continue;
        }
        ob.lossless_size = lossless_compress(corpus[i]).size();

        std::vector<BlockId> order = candidates;
        if (opt.shuffle_seed) {
            Rng rng(*opt.shuffle_seed ^ (i * 0x9e3779b97f4a7c15ull));
            rng.shuffle(order);
        }
        for (const auto c : order) {
            const auto size = delta_encode(corpus[i], corpus[c]).size();
            if (!ob.ref || size < ob.delta_size || (size == ob.delta_size && c < *ob.ref)) {
                ob.ref = c;
                ob.delta_size = size;
            }
        }
        ob.useful = ob.ref && delta_beats_lossless(ob.delta_size, ob.lossless_size);
        candidates.push_back(i);
    }
    return out;
}

void write_oracle(const OracleResult& r, const std::filesystem::path& path) {
    json blocks = json::array();
    for (const auto& b : r.blocks) {
        json j{{"index", b.index},
               {"duplicate", b.duplicate},
               {"ref", b.ref ? json(*b.ref) : json(nullptr)},
               {"delta_size", b.delta_size},
               {"lossless_size", b.lossless_size},
               {"useful", b.useful}};
        blocks.push_back(std::move(j));
    }
    std::ofstream out(path, std::ios::trunc);
    out << json{{"corpus_hash", r.corpus_hash}, {"block_count", r.blocks.size()}, {"blocks", blocks}}.dump(1) << '\n';
    if (!out.flush()) {
        throw StoreIoError("cannot write oracle report: " + path.string());
    }
}

OracleResult read_oracle(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw StoreIoError("cannot open oracle report: " + path.string());
    }
    try {
        const auto j = json::parse(in);
        OracleResult r;
        r.corpus_hash = j.at("corpus_hash").get<std::string>();
        for (const auto& jb : j.at("blocks")) {
            OracleBlock b;
            b.index = jb.at("index").get<std::uint64_t>();
            b.duplicate = jb.at("duplicate").get<bool>();
            if (!jb.at("ref").is_null()) {
                b.ref = jb.at("ref").get<BlockId>();
            }
            b.delta_size = jb.at("delta_size").get<std::uint64_t>();
            b.lossless_size = jb.at("lossless_size").get<std::uint64_t>();
            b.useful = jb.at("useful").get<bool>();
            if (b.index != r.blocks.size()) {
                throw FormatError("oracle report: block indices must be consecutive from 0");
            }
            r.blocks.push_back(b);
        }
        return r;
    } catch (const json::exception& e) {
        throw FormatError("oracle report " + path.string() + ": " + e.what());
    }
}

Metrics compute_metrics(const RunLog& run, const OracleResult& oracle) {
    if (run.corpus_hash != oracle.corpus_hash) {
        throw MismatchError("run log corpus " + run.corpus_hash + " differs from oracle corpus " + oracle.corpus_hash);
    }
    if (run.blocks.size() != oracle.blocks.size()) {
        throw MismatchError("run log has " + std::to_string(run.blocks.size()) + " blocks, oracle has " +
                            std::to_string(oracle.blocks.size()));
    }
    Metrics m;
    m.blocks = run.blocks.size();
    double fn_sum = 0.0;
    double fp_sum = 0.0;
    for (std::size_t i = 0; i < run.blocks.size(); ++i) {
        const auto& t = run.blocks[i];
        const auto& o = oracle.blocks[i];
        const bool tech_delta = t.outcome == RecordKind::Delta;
        m.oracle_positive += o.useful ? 1 : 0;
        m.technique_positive += tech_delta ? 1 : 0;
        const auto normalized = [&] {
            return static_cast<double>(o.delta_size) / static_cast<double>(std::max<std::uint64_t>(t.stored_size, 1));
        };
        if (o.useful && !tech_delta) {
            ++m.fn_count;
            fn_sum += normalized();
        }
        if (tech_delta && t.ref != o.ref) {
            ++m.fp_count;
            fp_sum += normalized();
        }
    }
    m.fnr = m.oracle_positive == 0 ? 0.0 : static_cast<double>(m.fn_count) / static_cast<double>(m.oracle_positive);
    m.fpr = m.technique_positive == 0 ? 0.0
                                      : static_cast<double>(m.fp_count) / static_cast<double>(m.technique_positive);
    if (m.fn_count > 0) {
        m.drr_fn = fn_sum / static_cast<double>(m.fn_count);
    }
    if (m.fp_count > 0) {
        m.drr_fp = fp_sum / static_cast<double>(m.fp_count);
    }
    return m;
}

std::string metrics_to_json(const Metrics& m, const std::string& corpus_hash) {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"corpus_hash", corpus_hash},
                {"blocks", m.blocks},
                {"oracle_positive", m.oracle_positive},
                {"technique_positive", m.technique_positive},
                {"fn_count", m.fn_count},
                {"fp_count", m.fp_count},
                {"fnr", m.fnr},
                {"fpr", m.fpr},
                {"drr_fn", opt(m.drr_fn)},
                {"drr_fp", opt(m.drr_fp)}}
        .dump(2);
}

std::vector<ScatterRow> saved_bytes_scatter(const RunLog& a, const RunLog& b) {
    if (a.corpus_hash != b.corpus_hash || a.blocks.size() != b.blocks.size()) {
        throw MismatchError("scatter inputs were produced from different corpora");
    }
    std::vector<ScatterRow> rows;
    for (std::size_t i = 0; i < a.blocks.size(); ++i) {
        const auto& x = a.blocks[i];
        const auto& y = b.blocks[i];
        if (x.outcome == RecordKind::Dedup || y.outcome == RecordKind::Dedup) {
            continue;
        }
        rows.push_back({i, static_cast<std::int64_t>(kBlockSize) - static_cast<std::int64_t>(x.stored_size),
                        static_cast<std::int64_t>(kBlockSize) - static_cast<std::int64_t>(y.stored_size)});
    }
    return rows;
}

std::vector<HammingBucket> hamming_saving_curve(const RunLog& run) {
    std::map<std::uint32_t, std::pair<std::uint64_t, double>> acc;
    for (const auto& b : run.blocks) {
        if (!b.sketch_distance || !b.ds_delta_size) {
            continue;
        }
        const auto key = std::min(*b.sketch_distance, kHammingOverflow);
        const double saving =
            std::clamp(1.0 - static_cast<double>(*b.ds_delta_size) / static_cast<double>(kBlockSize), 0.0, 1.0);
        auto& [n, sum] = acc[key];
        ++n;
        sum += saving;
    }
    std::vector<HammingBucket> out;
    for (const auto& [key, v] : acc) {
        out.push_back({key, v.first, v.second / static_cast<double>(v.first)});
    }
    return out;
}

void write_scatter_csv(const std::vector<ScatterRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << "index,saved_a,saved_b\n";
    for (const auto& r : rows) {
        out << r.index << ',' << r.saved_a << ',' << r.saved_b << '\n';
    }
    if (!out.flush()) {
        throw StoreIoError("cannot write " + path.string());
    }
}

void write_hamming_csv(const std::vector<HammingBucket>& buckets, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << "distance,count,mean_saving\n";
    out.precision(17);
    for (const auto& b : buckets) {
        if (b.distance == kHammingOverflow) {
            out << ">32";
        } else {
            out << b.distance;
        }
        out << ',' << b.count << ',' << b.mean_saving << '\n';
    }
    if (!out.flush()) {
        throw StoreIoError("cannot write " + path.string());
    }
}

}  // namespace dsketch
