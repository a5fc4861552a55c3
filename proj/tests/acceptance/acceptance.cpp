// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// Paths to the CLI, the metrics recomputation script, the python interpreter and
// the learned-sketch fixture are baked in at build time and can be overridden
// with DSKETCH_CLI, DSKETCH_RECOMPUTE, DSKETCH_PYTHON and DSKETCH_MODEL.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "dsketch/codec.hpp"
#include "dsketch/dkcluster.hpp"
#include "dsketch/evaluation.hpp"
#include "dsketch/pipeline.hpp"
#include "dsketch/sfsketch.hpp"
#include "dsketch/skstore.hpp"

using namespace dsketch;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string setting(const char* env, const char* fallback) {
    const char* v = std::getenv(env);
    return v && *v ? v : fallback;
}

const std::string kCli = setting("DSKETCH_CLI", DSKETCH_CLI_PATH);
const std::string kRecompute = setting("DSKETCH_RECOMPUTE", DSKETCH_RECOMPUTE_PATH);
const std::string kPython = setting("DSKETCH_PYTHON", DSKETCH_PYTHON_PATH);
const std::string kModel = setting("DSKETCH_MODEL", DSKETCH_MODEL_PATH);

struct Outcome {
    bool pass;
    std::string detail;
};

class Scratch {
public:
    Scratch() {
        path_ = fs::temp_directory_path() / ("dsketch_accept_" + std::to_string(::getpid()));
        fs::create_directories(path_);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    fs::path operator/(const std::string& n) const { return path_ / n; }

private:
    fs::path path_;
};

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// Runs a shell command, returns its stdout; throws on non-zero exit.
std::string run(const std::string& cmd) {
    std::string out;
    FILE* f = ::popen(cmd.c_str(), "r");
    if (!f) {
        throw std::runtime_error("cannot start: " + cmd);
    }
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) {
        out.append(buf, n);
    }
    if (::pclose(f) != 0) {
        throw std::runtime_error("command failed: " + cmd);
    }
    return out;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<const SketchModel> fixture_model() {
    static std::shared_ptr<const SketchModel> m;
    if (!m) {
        if (!fs::exists(kModel)) {
            throw std::runtime_error("learned-sketch weights not found at " + kModel);
        }
        m = std::make_shared<const SketchModel>(SketchModel::load(kModel));
    }
    return m;
}

PipelineConfig pipeline_config(SketcherKind k) {
    PipelineConfig c;
    c.sketcher = k;
    if (k == SketcherKind::DeepSketch || k == SketcherKind::Combined) {
        c.model = fixture_model();
    }
    return c;
}

// --------------------------------------------------------------------------

Outcome round_trip() {
    const auto g = generate_corpus({.families = 4, .blocks_per_family = 2500, .duplicate_rate = 0.3, .seed = 11});
    std::ostringstream detail;
    bool ok = true;
    for (const auto k : {SketcherKind::None, SketcherKind::Finesse, SketcherKind::DeepSketch, SketcherKind::Combined}) {
        const auto t0 = std::chrono::steady_clock::now();
        Pipeline p(pipeline_config(k));
        const auto r = run_corpus(p, g.corpus, /*verify=*/false);
        const auto bad = verify_store(p.store(), g.corpus);
        const double secs = seconds_since(t0);
        ok = ok && bad == 0 && secs < 120.0;
        detail << to_string(k) << ": " << bad << " mismatches, " << fmt(secs, 3) << "s, drr " << fmt(r.stats.drr()) << "; ";
    }
    return {ok, "10000 blocks; " + detail.str()};
}

Outcome dedup_arithmetic() {
    Rng rng(12);
    std::vector<Block> uniques(100);
    for (auto& b : uniques) {
        for (auto& x : b) {
            x = rng.byte();
        }
    }
    BlockCorpus corpus;
    for (int copy = 0; copy < 10; ++copy) {
        corpus.blocks.insert(corpus.blocks.end(), uniques.begin(), uniques.end());
    }
    Pipeline p({});
    const auto r = run_corpus(p, corpus);
    std::size_t lossless = 0, dedup = 0;
    for (const auto& rec : p.store().records()) {
        lossless += rec.kind == RecordKind::Lossless;
        dedup += rec.kind == RecordKind::Dedup;
    }
    std::uint64_t expect_payload = 0;
    for (const auto& u : uniques) {
        expect_payload += lossless_compress(u).size();
    }
    const bool ok = lossless == 100 && dedup == 900 && r.stats.payload_bytes == expect_payload;
    return {ok, std::to_string(lossless) + " lossless, " + std::to_string(dedup) + " dedup, payload " +
                    std::to_string(r.stats.payload_bytes) + " vs sum of lossless sizes " + std::to_string(expect_payload)};
}

Outcome oracle_equivalence(const Scratch& dir) {
    std::size_t shuffled_runs = 0, compared = 0;
    std::vector<std::string> modes{"finesse", "none"};
    if (fs::exists(kModel)) {
        modes.push_back("deepsketch");
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto g = generate_corpus({.families = 4, .blocks_per_family = 16, .duplicate_rate = 0.15, .perturb_bytes_max = 48, .seed = 300 + seed});
        const auto base = brute_force_oracle(g.corpus);
        for (std::uint64_t s = 1; s <= 3; ++s) {
            const auto sh = brute_force_oracle(g.corpus, {.max_blocks = 4096, .force = false, .shuffle_seed = seed * 100 + s});
            for (std::size_t i = 0; i < g.corpus.size(); ++i) {
                if (sh.blocks[i].ref != base.blocks[i].ref || sh.blocks[i].delta_size != base.blocks[i].delta_size) {
                    return {false, "seed " + std::to_string(seed) + ": block " + std::to_string(i) + " reference depends on candidate order"};
                }
            }
            ++shuffled_runs;
        }

        const auto corpus = dir / "oq.bin";
        save_corpus(g.corpus, corpus);
        run(kCli + " eval oracle --corpus " + quote(corpus) + " --report " + quote(dir / "oracle.json"));
        for (const auto& mode : modes) {
            std::string cmd = kCli + " ingest --corpus " + quote(corpus) + " --sketcher " + mode + " --store " +
                              quote(dir / "oq.ddcs") + " --report " + quote(dir / "ingest.json") + " --log " + quote(dir / "run.jsonl");
            if (mode == "deepsketch") {
                cmd += " --weights " + quote(kModel);
            }
            run(cmd + " > /dev/null");
            run(kCli + " eval metrics --run " + quote(dir / "run.jsonl") + " --oracle " + quote(dir / "oracle.json") +
                " --report " + quote(dir / "metrics.json"));
            const auto tool = read_json(dir / "metrics.json");
            const auto script = json::parse(run(kPython + " " + quote(kRecompute) + " --run " + quote(dir / "run.jsonl") +
                                                " --oracle " + quote(dir / "oracle.json")));
            for (const char* key : {"fnr", "fpr", "fn_count", "fp_count", "oracle_positive", "technique_positive", "drr_fn", "drr_fp"}) {
                if (tool.at(key) != script.at(key)) {
                    return {false, "seed " + std::to_string(seed) + " " + mode + ": " + key + " tool " + tool.at(key).dump() +
                                       " script " + script.at(key).dump()};
                }
            }
            ++compared;
        }
    }
    return {true, std::to_string(shuffled_runs) + " shuffled oracle runs identical; " + std::to_string(compared) +
                      " metric reports match the independent recomputation"};
}

Outcome sk_store_correctness() {
    Rng rng(13);
    SkStore store;
    std::vector<std::pair<Sketch, BlockId>> committed, pending;
    std::size_t queries = 0, buffer_wins = 0, commit_errors = 0;
    const auto random_sketch = [&] {
        Sketch s;
        s.words = {rng.next(), rng.next()};
        return s;
    };
    const auto near = [&](const Sketch& s, std::size_t flips) {
        Sketch t = s;
        for (std::size_t i = 0; i < flips; ++i) {
            const auto bit = rng.below(kSketchBits);
            t.words[bit / 64] ^= std::uint64_t{1} << (bit % 64);
        }
        return t;
    };
    const auto argmin = [](const std::vector<std::pair<Sketch, BlockId>>& v, const Sketch& q) {
        std::optional<std::pair<std::uint32_t, BlockId>> best;
        for (const auto& [s, id] : v) {
            const std::pair<std::uint32_t, BlockId> cand{hamming(q, s), id};
            if (!best || cand < *best) {
                best = cand;
            }
        }
        return best;
    };

    for (BlockId id = 0; id < 10000; ++id) {
        const auto h = random_sketch();
        store.insert(h, id);
        pending.push_back({h, id});
        if (pending.size() == 128) {
            committed.insert(committed.end(), pending.begin(), pending.end());
            pending.clear();
        }
        commit_errors += store.committed_size() != committed.size() || store.pending_size() != pending.size();
        if (id % 10 != 9) {
            continue;
        }
        Sketch q;
        switch (queries % 3) {
            case 0: q = random_sketch(); break;
            case 1: q = near(pending.empty() ? committed.back().first : pending[rng.below(pending.size())].first, rng.below(12)); break;
            default: q = near(committed.empty() ? pending.front().first : committed[rng.below(committed.size())].first, rng.below(12)); break;
        }
        const auto ci = argmin(committed, q);
        const auto pi = argmin(pending, q);
        std::pair<std::uint32_t, BlockId> expect = ci ? *ci : *pi;
        bool from_buffer = !ci;
        if (pi && ci && pi->first < ci->first) {
            expect = *pi;
            from_buffer = true;
        }
        const auto r = store.query(q, 1);
        ++queries;
        if (r.empty() || r.best().id != expect.second || r.best().distance != expect.first ||
            (r.best().source == SkSource::Buffer) != from_buffer) {
            return {false, "query " + std::to_string(queries) + " disagrees with brute-force argmin"};
        }
        if (ci && r.best().distance > ci->first) {
            return {false, "best candidate farther than best committed entry"};
        }
        buffer_wins += from_buffer && ci;
    }

    // commit boundary on a fresh store
    SkStore fresh;
    for (BlockId id = 0; id < 127; ++id) {
        fresh.insert(random_sketch(), id);
    }
    const bool before = fresh.committed_size() == 0 && fresh.pending_size() == 127;
    fresh.insert(random_sketch(), 127);
    const bool after = fresh.committed_size() == 128 && fresh.pending_size() == 0 && fresh.flush_count() == 1;

    const bool ok = commit_errors == 0 && buffer_wins > 0 && before && after;
    return {ok, std::to_string(queries) + " queries exact over 10000 sketches, " + std::to_string(buffer_wins) +
                    " won by the buffer; commit at insert 128: " + (before && after ? "yes" : "no") +
                    "; commit-count errors " + std::to_string(commit_errors)};
}

Outcome dk_cluster_postcondition() {
    const auto g = generate_corpus({.families = 2, .blocks_per_family = 50, .perturb_bytes_max = 16, .seed = 14});
    const auto c = dk_cluster(g.corpus, {});
    bool pure = c.clusters.size() == 2;
    std::set<std::uint32_t> families;
    std::size_t below = 0, members = 0;
    for (const auto& cl : c.clusters) {
        std::set<std::uint32_t> fam;
        for (const auto id : cl.members) {
            fam.insert(g.family[id]);
            below += cluster_distance(g.corpus[id], g.corpus[cl.medoid]) < cl.threshold;
            ++members;
        }
        pure = pure && fam.size() == 1;
        families.insert(fam.begin(), fam.end());
    }
    pure = pure && families.size() == 2;
    const bool ok = pure && below == 0 && c.stats.max_alternations <= 8;
    return {ok, std::to_string(c.clusters.size()) + " clusters (" + (pure ? "family-pure" : "not family-pure") + "), " +
                    std::to_string(members) + " members, " + std::to_string(below) + " below threshold, " +
                    std::to_string(c.discarded.size()) + " discarded, max alternations " + std::to_string(c.stats.max_alternations)};
}

Outcome sf_resemblance() {
    Rng rng(15);
    const auto random_block = [&] {
        Block b;
        for (auto& x : b) {
            x = rng.byte();
        }
        return b;
    };
    std::size_t similar_share = 0, random_share = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_block();
        auto b = a;
        const auto len = 1 + rng.below(32);
        const auto pos = rng.below(kBlockSize - len + 1);
        for (std::size_t j = 0; j < len; ++j) {
            b[pos + j] = rng.byte();
        }
        similar_share += match_count(superfeatures(a), superfeatures(b)) >= 1;
        random_share += match_count(superfeatures(random_block()), superfeatures(random_block())) >= 1;
    }
    const bool ok = similar_share >= 900 && random_share <= 1;
    return {ok, "similar pairs sharing an SF " + std::to_string(similar_share) + "/1000 (need >= 900); unrelated pairs " +
                    std::to_string(random_share) + "/1000 (need <= 1)"};
}

struct EndToEnd {
    std::map<SketcherKind, PipelineStats> stats;
    RunLog deepsketch_log;
};

EndToEnd run_family_corpus() {
    // Same corpus the fixture model was trained from (see tools/fixtures).
    const auto g = generate_corpus({.families = 64, .blocks_per_family = 32, .duplicate_rate = 0.1, .perturb_bytes_max = 64, .seed = 2024});
    EndToEnd e;
    for (const auto k : {SketcherKind::None, SketcherKind::Finesse, SketcherKind::DeepSketch, SketcherKind::Combined}) {
        Pipeline p(pipeline_config(k));
        auto r = run_corpus(p, g.corpus);
        e.stats[k] = r.stats;
        if (k == SketcherKind::DeepSketch) {
            e.deepsketch_log = std::move(r.log);
        }
    }
    return e;
}

Outcome end_to_end(const EndToEnd& e) {
    const auto& s = e.stats;
    const auto phys = [&](SketcherKind k) { return s.at(k).physical_bytes; };
    const bool a = phys(SketcherKind::Combined) <= phys(SketcherKind::Finesse);
    const bool b = phys(SketcherKind::Combined) <= phys(SketcherKind::DeepSketch);
    const bool c = s.at(SketcherKind::DeepSketch).drr() >= s.at(SketcherKind::None).drr();
    std::ostringstream d;
    d << "physical bytes none " << phys(SketcherKind::None) << ", finesse " << phys(SketcherKind::Finesse) << ", deepsketch "
      << phys(SketcherKind::DeepSketch) << ", combined " << phys(SketcherKind::Combined) << "; drr none "
      << fmt(s.at(SketcherKind::None).drr()) << ", finesse " << fmt(s.at(SketcherKind::Finesse).drr()) << ", deepsketch "
      << fmt(s.at(SketcherKind::DeepSketch).drr()) << ", combined " << fmt(s.at(SketcherKind::Combined).drr())
      << "; buffer-hit fraction " << fmt(s.at(SketcherKind::DeepSketch).buffer_hit_fraction());
    return {a && b && c, d.str()};
}

Outcome hamming_monotonicity(const EndToEnd& e) {
    const auto curve = hamming_saving_curve(e.deepsketch_log);
    std::uint64_t near_n = 0, far_n = 0;
    double near_sum = 0.0, far_mean = 0.0;
    for (const auto& b : curve) {
        if (b.distance <= 2) {
            near_n += b.count;
            near_sum += b.mean_saving * static_cast<double>(b.count);
        } else if (b.distance == kHammingOverflow) {
            far_n = b.count;
            far_mean = b.mean_saving;
        }
    }
    if (near_n == 0 || far_n == 0) {
        return {false, "empty bucket: " + std::to_string(near_n) + " blocks at distance <= 2, " + std::to_string(far_n) +
                           " above 32"};
    }
    const double near_mean = near_sum / static_cast<double>(near_n);
    return {near_mean > far_mean, "mean saving at distance <= 2: " + fmt(near_mean) + " (" + std::to_string(near_n) +
                                      " blocks); above 32: " + fmt(far_mean) + " (" + std::to_string(far_n) + " blocks)"};
}

}  // namespace

int main() {
    Scratch dir;
    int failed = 0;
    const auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("error: ") + ex.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << fmt(seconds_since(t0), 3) << "s]  " << o.detail
                  << std::endl;
    };

    report("round-trip fidelity", round_trip);
    report("dedup arithmetic", dedup_arithmetic);
    report("oracle equivalence", [&] { return oracle_equivalence(dir); });
    report("sk-store correctness", sk_store_correctness);
    report("dk-cluster post-condition", dk_cluster_postcondition);
    report("sf resemblance", sf_resemblance);

    std::optional<EndToEnd> e2e;
    report("end-to-end ordering", [&] {
        e2e = run_family_corpus();
        return end_to_end(*e2e);
    });
    report("hamming-vs-saving", [&]() -> Outcome {
        if (!e2e) {
            return {false, "end-to-end run unavailable"};
        }
        return hamming_monotonicity(*e2e);
    });

    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
