// Command-line front end: corpus generation, ingest/verify, clustering,
// dataset export, evaluation and sketch dumps.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsketch/corpus.hpp"
#include "dsketch/dataset.hpp"
#include "dsketch/dkcluster.hpp"
#include "dsketch/errors.hpp"
#include "dsketch/evaluation.hpp"
#include "dsketch/nnmodel.hpp"
#include "dsketch/pipeline.hpp"
#include "dsketch/runlog.hpp"

namespace {

using namespace dsketch;
using nlohmann::json;

constexpr int kExitUsage = 2;

class UsageError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "usage"; }
};

int exit_code(const std::string& kind) {
    if (kind == "usage" || kind == "config") {
        return kExitUsage;
    }
    if (kind == "store-io" || kind == "corpus-load" || kind == "not-found") {
        return 3;
    }
    if (kind == "format" || kind == "decode" || kind == "unsupported-version" || kind == "weight-load") {
        return 4;
    }
    if (kind == "verify") {
        return 5;
    }
    if (kind == "guard") {
        return 6;
    }
    if (kind == "mismatch") {
        return 7;
    }
    return 1;
}

int report_error(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return exit_code(kind);
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    out << text << '\n';
    if (!out.flush()) {
        throw StoreIoError("cannot write " + path);
    }
}

struct CorpusGenArgs {
    SynthSpec spec;
    std::string out;
    std::string labels;
};

void cmd_corpus_gen(const CorpusGenArgs& a) {
    const auto g = generate_corpus(a.spec);
    save_corpus(g.corpus, a.out);
    if (!a.labels.empty()) {
        std::ofstream out(a.labels, std::ios::trunc);
        out << "index,family,duplicate\n";
        for (std::size_t i = 0; i < g.family.size(); ++i) {
            out << i << ',' << g.family[i] << ',' << (g.duplicate[i] ? 1 : 0) << '\n';
        }
        if (!out.flush()) {
            throw StoreIoError("cannot write " + a.labels);
        }
    }
    std::cout << json{{"blocks", g.corpus.size()}, {"corpus_hash", corpus_hash(g.corpus)}}.dump() << '\n';
}

struct IngestArgs {
    std::string corpus, sketcher = "none", weights, store, report, log;
    std::size_t top_k = 1;
    bool no_verify = false;
};

void cmd_ingest(const IngestArgs& a) {
    PipelineConfig cfg;
    cfg.sketcher = parse_sketcher(a.sketcher);
    cfg.store_path = a.store;
    cfg.top_k = a.top_k;
    const bool needs_model = cfg.sketcher == SketcherKind::DeepSketch || cfg.sketcher == SketcherKind::Combined;
    if (needs_model && a.weights.empty()) {
        throw UsageError("--sketcher " + a.sketcher + " requires --weights");
    }
    if (needs_model) {
        cfg.model = std::make_shared<const SketchModel>(SketchModel::load(a.weights));
    }
    const auto corpus = load_corpus(a.corpus);
    Pipeline p(cfg);
    const auto r = run_corpus(p, corpus, !a.no_verify);
    const auto report = stats_to_json(r.stats, cfg.sketcher, r.log.corpus_hash);
    write_text(report, a.report);
    if (!a.log.empty()) {
        write_run_log(r.log, a.log);
    }
    std::cout << json{{"blocks", r.stats.blocks_written}, {"drr", r.stats.drr()}, {"verified", !a.no_verify}}.dump()
              << '\n';
}

void cmd_verify(const std::string& store_path, const std::string& corpus_path) {
    const auto store = Container::open(store_path);
    const auto corpus = load_corpus(corpus_path);
    const auto bad = verify_store(store, corpus);
    std::size_t depth = 0;
    for (const auto& rec : store.records()) {
        depth = std::max(depth, store.read_depth(rec.id));
    }
    const auto refs = store.check_references();
    std::cout << json{{"blocks", corpus.size()},
                      {"records", store.records().size()},
                      {"mismatches", bad},
                      {"max_read_depth", depth},
                      {"reference_check", refs.empty() ? "ok" : refs}}
                     .dump()
              << '\n';
    if (bad != 0) {
        throw VerifyError(std::to_string(bad) + " blocks differ from the corpus");
    }
    if (!refs.empty()) {
        throw VerifyError(refs);
    }
}

struct ClusterArgs {
    std::string corpus, out;
    ClusterConfig cfg;
};

void cmd_cluster(const ClusterArgs& a) {
    const auto corpus = load_corpus(a.corpus);
    const auto c = dk_cluster(corpus, a.cfg);
    save_assignments(c, corpus.size(), a.out);
    std::cout << json{{"clusters", c.clusters.size()},
                      {"discarded", c.discarded.size()},
                      {"coarse_clusters", c.stats.coarse_clusters},
                      {"fine_clusters", c.stats.fine_clusters},
                      {"max_alternations", c.stats.max_alternations},
                      {"depth", c.stats.depth},
                      {"largest_10pct_share", largest_cluster_share(c, 0.10)}}
                     .dump()
              << '\n';
}

struct DatasetArgs {
    std::string corpus, clusters, out, heldout_out;
    DatasetConfig cfg;
};

void cmd_dataset_build(const DatasetArgs& a) {
    const auto corpus = load_corpus(a.corpus);
    ClusterConfig ccfg;
    ccfg.seed = a.cfg.seed;
    const auto clustering = clustering_from_assignments(corpus, load_assignments(a.clusters), ccfg);
    const auto balanced = balance_clusters(clustering, corpus, a.cfg);
    const auto [train, held] = split(balanced, a.cfg);
    const auto held_path = a.heldout_out.empty() ? a.out + ".heldout" : a.heldout_out;
    export_dataset(train, a.out);
    export_dataset(held, held_path);
    std::cout << json{{"classes", balanced.class_count},
                      {"train_records", train.records.size()},
                      {"heldout_records", held.records.size()},
                      {"heldout_path", held_path}}
                     .dump()
              << '\n';
}

void cmd_sketch_dump(const std::string& weights, const std::string& corpus_path, const std::string& out_path) {
    const auto model = SketchModel::load(weights);
    const auto corpus = load_corpus(corpus_path);
    std::ofstream out(out_path, std::ios::trunc);
    out << "index,sketch\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        out << i << ',' << model.sketch(corpus[i]).hex() << '\n';
    }
    if (!out.flush()) {
        throw StoreIoError("cannot write " + out_path);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Post-deduplication delta compression toolkit"};
    app.require_subcommand(1);

    auto* corpus = app.add_subcommand("corpus", "Corpus utilities")->require_subcommand(1);
    CorpusGenArgs gen;
    auto* gen_cmd = corpus->add_subcommand("gen", "Generate a synthetic family corpus");
    gen_cmd->add_option("--families", gen.spec.families)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--per-family", gen.spec.blocks_per_family)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--dup-rate", gen.spec.duplicate_rate)->check(CLI::Range(0.0, 1.0));
    gen_cmd->add_option("--perturb-bytes", gen.spec.perturb_bytes_max)->check(CLI::Range(0, 4096));
    gen_cmd->add_option("--perturb-runs", gen.spec.perturb_runs_max)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.spec.seed);
    gen_cmd->add_option("--out", gen.out)->required();
    gen_cmd->add_option("--labels", gen.labels, "Optional CSV of per-block family labels");

    IngestArgs ing;
    auto* ing_cmd = app.add_subcommand("ingest", "Write a corpus through the reduction pipeline");
    ing_cmd->add_option("--corpus", ing.corpus)->required();
    ing_cmd->add_option("--sketcher", ing.sketcher)
        ->check(CLI::IsMember({"none", "finesse", "deepsketch", "combined"}));
    ing_cmd->add_option("--weights", ing.weights);
    ing_cmd->add_option("--store", ing.store)->required();
    ing_cmd->add_option("--report", ing.report)->required();
    ing_cmd->add_option("--log", ing.log, "Per-block JSON-lines run log");
    ing_cmd->add_option("--top-k", ing.top_k, "Learned-sketch candidates tried per block")->check(CLI::PositiveNumber);
    ing_cmd->add_flag("--no-verify", ing.no_verify, "Skip read-back verification");

    std::string v_store, v_corpus;
    auto* ver_cmd = app.add_subcommand("verify", "Check a store against its corpus");
    ver_cmd->add_option("--store", v_store)->required();
    ver_cmd->add_option("--corpus", v_corpus)->required();

    ClusterArgs cl;
    auto* cl_cmd = app.add_subcommand("cluster", "Cluster blocks by delta-compression ratio");
    cl_cmd->add_option("--corpus", cl.corpus)->required();
    cl_cmd->add_option("--delta0", cl.cfg.delta0);
    cl_cmd->add_option("--alpha", cl.cfg.alpha);
    cl_cmd->add_option("--max-iter", cl.cfg.max_iterations);
    cl_cmd->add_option("--sample-cap", cl.cfg.medoid_sample_cap);
    cl_cmd->add_option("--seed", cl.cfg.seed);
    cl_cmd->add_option("--out", cl.out)->required();

    auto* ds = app.add_subcommand("dataset", "Training dataset utilities")->require_subcommand(1);
    DatasetArgs dsa;
    auto* ds_cmd = ds->add_subcommand("build", "Balance clusters and export train/held-out files");
    ds_cmd->add_option("--corpus", dsa.corpus)->required();
    ds_cmd->add_option("--clusters", dsa.clusters)->required();
    ds_cmd->add_option("--nblk", dsa.cfg.n_blk)->check(CLI::PositiveNumber);
    ds_cmd->add_option("--train-frac", dsa.cfg.train_fraction);
    ds_cmd->add_option("--perturb-bytes", dsa.cfg.perturb_bytes_max)->check(CLI::Range(1, 4096));
    ds_cmd->add_option("--seed", dsa.cfg.seed);
    ds_cmd->add_option("--out", dsa.out)->required();
    ds_cmd->add_option("--heldout-out", dsa.heldout_out, "Held-out file (default: <out>.heldout)");

    auto* ev = app.add_subcommand("eval", "Evaluation")->require_subcommand(1);
    std::string o_corpus, o_report;
    OracleOptions o_opt;
    auto* or_cmd = ev->add_subcommand("oracle", "Brute-force best reference per block");
    or_cmd->add_option("--corpus", o_corpus)->required();
    or_cmd->add_option("--report", o_report)->required();
    or_cmd->add_option("--max-blocks", o_opt.max_blocks);
    or_cmd->add_flag("--force", o_opt.force, "Run even above --max-blocks");

    std::string m_run, m_oracle, m_report;
    auto* me_cmd = ev->add_subcommand("metrics", "FNR/FPR of a run against the oracle");
    me_cmd->add_option("--run", m_run)->required();
    me_cmd->add_option("--oracle", m_oracle)->required();
    me_cmd->add_option("--report", m_report)->required();

    std::string s_a, s_b, s_out;
    auto* sc_cmd = ev->add_subcommand("scatter", "Per-block saved bytes of two runs");
    sc_cmd->add_option("--run-a", s_a)->required();
    sc_cmd->add_option("--run-b", s_b)->required();
    sc_cmd->add_option("--out", s_out)->required();

    std::string h_run, h_out;
    auto* hm_cmd = ev->add_subcommand("hamming", "Mean saving per Hamming distance");
    hm_cmd->add_option("--run", h_run)->required();
    hm_cmd->add_option("--out", h_out)->required();

    auto* sk = app.add_subcommand("sketch", "Learned sketches")->require_subcommand(1);
    std::string d_weights, d_corpus, d_out;
    auto* du_cmd = sk->add_subcommand("dump", "Write the learned sketch of every block");
    du_cmd->add_option("--weights", d_weights)->required();
    du_cmd->add_option("--corpus", d_corpus)->required();
    du_cmd->add_option("--out", d_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", e.what());
    }

    try {
        if (gen_cmd->parsed()) {
            cmd_corpus_gen(gen);
        } else if (ing_cmd->parsed()) {
            cmd_ingest(ing);
        } else if (ver_cmd->parsed()) {
            cmd_verify(v_store, v_corpus);
        } else if (cl_cmd->parsed()) {
            cmd_cluster(cl);
        } else if (ds_cmd->parsed()) {
            cmd_dataset_build(dsa);
        } else if (or_cmd->parsed()) {
            write_oracle(brute_force_oracle(load_corpus(o_corpus), o_opt), o_report);
        } else if (me_cmd->parsed()) {
            const auto run = read_run_log(m_run);
            const auto m = compute_metrics(run, read_oracle(m_oracle));
            write_text(metrics_to_json(m, run.corpus_hash), m_report);
        } else if (sc_cmd->parsed()) {
            write_scatter_csv(saved_bytes_scatter(read_run_log(s_a), read_run_log(s_b)), s_out);
        } else if (hm_cmd->parsed()) {
            write_hamming_csv(hamming_saving_curve(read_run_log(h_run)), h_out);
        } else if (du_cmd->parsed()) {
            cmd_sketch_dump(d_weights, d_corpus, d_out);
        }
    } catch (const Error& e) {
        return report_error(e.kind(), e.what());
    } catch (const std::exception& e) {
        return report_error("internal", e.what());
    }
    return 0;
}
