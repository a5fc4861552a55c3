#include "dsketch/dkcluster.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "dsketch/codec.hpp"
#include "dsketch/errors.hpp"

namespace dsketch {

double cluster_distance(const Block& a, const Block& mean) {
    return drr(kBlockSize, delta_encode(a, mean).size());
}

BlockId select_medoid(const BlockCorpus& corpus, const std::vector<BlockId>& members,
                      std::size_t sample_cap, std::uint64_t seed) {
    if (members.empty()) {
        throw ConfigError("select_medoid: empty cluster");
    }
    if (members.size() == 1) {
        return members.front();
    }

    std::vector<BlockId> pool = members;
    if (sample_cap >= 2 && pool.size() > sample_cap) {
        Rng rng(seed ^ (members.front() * 0x9e3779b97f4a7c15ull) ^ members.size());
        rng.shuffle(pool);
        pool.resize(sample_cap);
    }
    std::sort(pool.begin(), pool.end());

    BlockId best = pool.front();
    double best_score = -1.0;
    for (const auto m : pool) {
        double sum = 0.0;
        for (const auto x : pool) {
            if (x != m) {
                sum += cluster_distance(corpus[x], corpus[m]);
            }
        }
        const double score = sum / static_cast<double>(pool.size() - 1);
        if (score > best_score) {
            best_score = score;
            best = m;
        }
    }
    return best;
}

double mean_drr_to_medoid(const BlockCorpus& corpus, const Cluster& c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto id : c.members) {
        if (id != c.medoid) {
            sum += cluster_distance(corpus[id], corpus[c.medoid]);
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

void drop_singletons(std::vector<Cluster>& clusters, std::vector<BlockId>& discarded) {
    std::vector<Cluster> kept;
    kept.reserve(clusters.size());
    for (auto& c : clusters) {
        if (c.members.size() <= 1) {
            discarded.insert(discarded.end(), c.members.begin(), c.members.end());
        } else {
            kept.push_back(std::move(c));
        }
    }
    clusters = std::move(kept);
}

}  // namespace

void coarse_pass(const BlockCorpus& corpus, const std::vector<BlockId>& unlabeled,
                 std::vector<Cluster>& clusters, std::vector<BlockId>& discarded, double delta) {
    for (const auto id : unlabeled) {
        std::size_t best = clusters.size();
        double best_drr = 0.0;
        for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
            const double d = cluster_distance(corpus[id], corpus[clusters[ci].medoid]);
            if (d > best_drr) {
                best_drr = d;
                best = ci;
            }
        }
        if (best < clusters.size() && best_drr >= delta) {
            auto& m = clusters[best].members;
            m.insert(std::upper_bound(m.begin(), m.end(), id), id);
        } else {
            clusters.push_back(Cluster{{id}, id, delta});
        }
    }
    drop_singletons(clusters, discarded);
}

std::vector<BlockId> fine_pass(const BlockCorpus& corpus, std::vector<Cluster>& clusters,
                               double delta, const ClusterConfig& cfg) {
    for (auto& c : clusters) {
        c.medoid = select_medoid(corpus, c.members, cfg.medoid_sample_cap, cfg.seed);
    }

    struct Placement {
        BlockId id;
        std::size_t cluster;
        double drr;
    };
    std::vector<Placement> placements;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        for (const auto id : clusters[ci].members) {
            if (id == clusters[ci].medoid) {
                continue;
            }
            std::size_t best = ci;
            double best_drr = -1.0;
            for (std::size_t cj = 0; cj < clusters.size(); ++cj) {
                const double d = cluster_distance(corpus[id], corpus[clusters[cj].medoid]);
                if (d > best_drr) {
                    best_drr = d;
                    best = cj;
                }
            }
            placements.push_back({id, best, best_drr});
        }
    }

    std::vector<BlockId> evicted;
    for (auto& c : clusters) {
        c.members = {c.medoid};
        c.threshold = delta;
    }
    for (const auto& p : placements) {
        if (p.drr < delta) {
            evicted.push_back(p.id);
        } else {
            clusters[p.cluster].members.push_back(p.id);
        }
    }
    for (auto& c : clusters) {
        std::sort(c.members.begin(), c.members.end());
    }
    std::sort(evicted.begin(), evicted.end());
    return evicted;
}

namespace {

struct LevelResult {
    std::vector<Cluster> clusters;
    std::vector<BlockId> discarded;
    std::uint32_t alternations = 0;
    std::size_t coarse_clusters = 0;
    std::size_t fine_clusters = 0;
};

LevelResult run_level(const BlockCorpus& corpus, const std::vector<BlockId>& ids, double delta,
                      const ClusterConfig& cfg) {
    LevelResult r;
    std::vector<BlockId> unlabeled = ids;
    while (!unlabeled.empty() && r.alternations < cfg.max_iterations) {
        coarse_pass(corpus, unlabeled, r.clusters, r.discarded, delta);
        r.coarse_clusters = r.clusters.size();
        ++r.alternations;
        if (r.clusters.empty()) {
            unlabeled.clear();
            break;
        }
        unlabeled = fine_pass(corpus, r.clusters, delta, cfg);
        r.fine_clusters = r.clusters.size();
    }
    // Whatever the iteration cap left unlabeled is treated as an outlier.
    r.discarded.insert(r.discarded.end(), unlabeled.begin(), unlabeled.end());
    drop_singletons(r.clusters, r.discarded);
    std::sort(r.discarded.begin(), r.discarded.end());
    return r;
}

struct Recursion {
    const BlockCorpus& corpus;
    const ClusterConfig& cfg;
    Clustering& out;

    void refine(Cluster c, double delta, std::uint32_t depth) {
        if (depth > cfg.max_depth || c.members.size() < 2) {
            out.clusters.push_back(std::move(c));
            return;
        }
        LevelResult sub = run_level(corpus, c.members, delta, cfg);
        out.stats.max_alternations = std::max(out.stats.max_alternations, sub.alternations);
        const bool unchanged = sub.clusters.size() == 1 && sub.clusters[0].members == c.members;
        if (sub.clusters.empty() || unchanged) {
            out.clusters.push_back(std::move(c));
            return;
        }

        double weighted = 0.0;
        std::size_t total = 0;
        for (const auto& s : sub.clusters) {
            weighted += static_cast<double>(s.members.size()) * mean_drr_to_medoid(corpus, s);
            total += s.members.size();
        }
        weighted /= static_cast<double>(total);
        if (!(weighted > mean_drr_to_medoid(corpus, c))) {
            out.clusters.push_back(std::move(c));
            return;
        }

        out.stats.depth = std::max(out.stats.depth, depth);
        out.discarded.insert(out.discarded.end(), sub.discarded.begin(), sub.discarded.end());
        for (auto& s : sub.clusters) {
            refine(std::move(s), delta + cfg.alpha, depth + 1);
        }
    }
};

void validate(const ClusterConfig& cfg) {
    if (!(cfg.delta0 > 1.0) || !(cfg.alpha > 0.0) || cfg.max_iterations < 1) {
        throw ConfigError("cluster config: need delta0 > 1, alpha > 0, max_iterations >= 1");
    }
}

}  // namespace

Clustering dk_cluster(const BlockCorpus& corpus, const ClusterConfig& cfg) {
    validate(cfg);
    Clustering out;
    if (corpus.size() == 0) {
        return out;
    }
    std::vector<BlockId> ids(corpus.size());
    for (BlockId i = 0; i < ids.size(); ++i) {
        ids[i] = i;
    }

    LevelResult top = run_level(corpus, ids, cfg.delta0, cfg);
    out.stats.coarse_clusters = top.coarse_clusters;
    out.stats.fine_clusters = top.fine_clusters;
    out.stats.max_alternations = top.alternations;
    out.discarded = std::move(top.discarded);

    Recursion rec{corpus, cfg, out};
    for (auto& c : top.clusters) {
        rec.refine(std::move(c), cfg.delta0 + cfg.alpha, 1);
    }
    std::sort(out.discarded.begin(), out.discarded.end());
    out.stats.final_clusters = out.clusters.size();
    return out;
}

void save_assignments(const Clustering& clustering, std::size_t block_count,
                      const std::filesystem::path& path) {
    std::vector<std::int64_t> label(block_count, -1);
    for (std::size_t ci = 0; ci < clustering.clusters.size(); ++ci) {
        for (const auto id : clustering.clusters[ci].members) {
            label.at(id) = static_cast<std::int64_t>(ci);
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw StoreIoError("cannot create assignment file: " + path.string());
    }
    for (std::size_t i = 0; i < block_count; ++i) {
        out << i << ',' << label[i] << '\n';
    }
    if (!out.flush()) {
        throw StoreIoError("write failure on assignment file: " + path.string());
    }
}

std::vector<std::int64_t> load_assignments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw StoreIoError("cannot open assignment file: " + path.string());
    }
    std::map<std::uint64_t, std::int64_t> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        std::uint64_t idx = 0;
        std::int64_t cid = 0;
        char comma = 0;
        if (!(ss >> idx >> comma >> cid) || comma != ',' || cid < -1 || !(ss >> std::ws).eof()) {
            throw FormatError("assignment file line " + std::to_string(lineno) + ": expected block_index,cluster_id");
        }
        if (!rows.emplace(idx, cid).second) {
            throw FormatError("assignment file: block " + std::to_string(idx) + " listed twice");
        }
    }
    std::vector<std::int64_t> out;
    out.reserve(rows.size());
    for (const auto& [idx, cid] : rows) {
        if (idx != out.size()) {
            throw FormatError("assignment file: block indices are not contiguous from 0");
        }
        out.push_back(cid);
    }
    return out;
}

Clustering clustering_from_assignments(const BlockCorpus& corpus,
                                       const std::vector<std::int64_t>& assignment,
                                       const ClusterConfig& cfg) {
    if (assignment.size() != corpus.size()) {
        throw MismatchError("assignment covers " + std::to_string(assignment.size()) +
                            " blocks but the corpus has " + std::to_string(corpus.size()));
    }
    std::map<std::int64_t, std::vector<BlockId>> groups;
    Clustering out;
    for (BlockId i = 0; i < assignment.size(); ++i) {
        if (assignment[i] < 0) {
            out.discarded.push_back(i);
        } else {
            groups[assignment[i]].push_back(i);
        }
    }
    for (auto& [cid, members] : groups) {
        Cluster c;
        c.medoid = select_medoid(corpus, members, cfg.medoid_sample_cap, cfg.seed);
        c.members = std::move(members);
        c.threshold = cfg.delta0;
        out.clusters.push_back(std::move(c));
    }
    out.stats.final_clusters = out.clusters.size();
    return out;
}

}  // namespace dsketch
