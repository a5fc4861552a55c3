#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dsketch/block.hpp"
#include "dsketch/corpus.hpp"

namespace dsketch {

struct ClusterConfig {
    double delta0 = 2.0;                 // initial DRR threshold
    double alpha = 0.5;                  // threshold increment per recursion level
    std::uint32_t max_iterations = 8;    // coarse/fine alternations per level
    std::size_t medoid_sample_cap = 256;
    std::uint32_t max_depth = 64;        // hard stop on recursion levels
    std::uint64_t seed = 0;
};

struct Cluster {
    std::vector<BlockId> members;   // ascending
    BlockId medoid = 0;
    double threshold = 0.0;
};

struct ClusterStats {
    std::size_t coarse_clusters = 0;    // K_C: after the last top-level coarse pass
    std::size_t fine_clusters = 0;      // K_F: after the last top-level fine pass
    std::size_t final_clusters = 0;     // C_TRN
    std::uint32_t max_alternations = 0; // worst coarse/fine alternation count of any level
    std::uint32_t depth = 0;            // deepest accepted recursion level
};

struct Clustering {
    std::vector<Cluster> clusters;
    std::vector<BlockId> discarded;   // ascending
    ClusterStats stats;
};

/// DRR of `a` delta-compressed against `mean`; higher means more similar.
double cluster_distance(const Block& a, const Block& mean);

/// Member with the highest mean cluster_distance to the other members, ties to
/// the lowest id. Clusters larger than the cap are scored on a seeded sample.
BlockId select_medoid(const BlockCorpus& corpus, const std::vector<BlockId>& members,
                      std::size_t sample_cap, std::uint64_t seed);

/// Step 1. Each unlabeled block joins the cluster whose medoid gives the highest
/// DRR if that DRR >= delta, otherwise it seeds a new cluster. Singleton
/// clusters are then dropped and their blocks appended to `discarded`.
void coarse_pass(const BlockCorpus& corpus, const std::vector<BlockId>& unlabeled,
                 std::vector<Cluster>& clusters, std::vector<BlockId>& discarded, double delta);

/// Step 2. Re-selects medoids, reassigns members to the nearest medoid, then
/// evicts members below `delta`. Returns the evicted (now unlabeled) ids.
std::vector<BlockId> fine_pass(const BlockCorpus& corpus, std::vector<Cluster>& clusters,
                               double delta, const ClusterConfig& cfg);

Clustering dk_cluster(const BlockCorpus& corpus, const ClusterConfig& cfg);

/// Mean DRR of the non-medoid members to the medoid.
double mean_drr_to_medoid(const BlockCorpus& corpus, const Cluster& c);

/// Writes `block_index,cluster_id` for every block; discarded blocks get -1.
void save_assignments(const Clustering& clustering, std::size_t block_count,
                      const std::filesystem::path& path);

/// Reads an assignment file back into per-block cluster ids (-1 = discarded).
std::vector<std::int64_t> load_assignments(const std::filesystem::path& path);

/// Rebuilds clusters from an assignment vector, re-selecting each medoid.
Clustering clustering_from_assignments(const BlockCorpus& corpus,
                                       const std::vector<std::int64_t>& assignment,
                                       const ClusterConfig& cfg);

}  // namespace dsketch
