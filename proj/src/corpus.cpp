#include "dsketch/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dsketch/errors.hpp"
#include "dsketch/fingerprint.hpp"

namespace dsketch {

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased and independent of the stdlib.
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % n;
}

BlockCorpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CorpusLoadError("cannot open corpus file: " + path.string());
    }
    BlockCorpus corpus;
    corpus.source_id = path.string();
    for (;;) {
        Block b{};
        in.read(reinterpret_cast<char*>(b.data()), kBlockSize);
        const auto got = in.gcount();
        if (got > 0) {
            corpus.blocks.push_back(b);
        }
        if (got < static_cast<std::streamsize>(kBlockSize)) {
            break;
        }
    }
    if (in.bad()) {
        throw CorpusLoadError("read failure on corpus file: " + path.string());
    }
    return corpus;
}

void save_corpus(const BlockCorpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CorpusLoadError("cannot create corpus file: " + path.string());
    }
    for (const auto& b : corpus.blocks) {
        out.write(reinterpret_cast<const char*>(b.data()), kBlockSize);
    }
    if (!out.flush()) {
        throw CorpusLoadError("write failure on corpus file: " + path.string());
    }
}

Block perturb_block(const Block& b, std::uint32_t max_bytes, std::uint32_t max_runs, Rng& rng) {
    if (max_bytes < 1 || max_bytes > kBlockSize || max_runs < 1) {
        throw ConfigError("perturb_block: need 1 <= max_bytes <= 4096 and max_runs >= 1");
    }
    const std::uint32_t total = 1 + static_cast<std::uint32_t>(rng.below(max_bytes));
    const std::uint32_t runs = 1 + static_cast<std::uint32_t>(rng.below(std::min(max_runs, total)));

    // Split `total` into `runs` positive lengths.
    std::vector<std::uint32_t> lengths(runs, 1);
    for (std::uint32_t left = total - runs; left > 0; --left) {
        ++lengths[rng.below(runs)];
    }

    std::array<bool, kBlockSize> touched{};
    for (const auto len : lengths) {
        const auto start = rng.below(kBlockSize - len + 1);
        for (std::uint32_t k = 0; k < len; ++k) {
            touched[start + k] = true;
        }
    }

    // Replacements are drawn against the original byte so overlapping runs can
    // never restore it.
    Block out = b;
    for (std::size_t i = 0; i < kBlockSize; ++i) {
        if (touched[i]) {
            out[i] = static_cast<std::uint8_t>(b[i] + 1 + rng.below(255));
        }
    }
    return out;
}

namespace {

constexpr std::size_t kSegment = 1024;

// A family template is four 1 KiB segments, each either uniform noise or text
// drawn from a per-family word list, so blocks vary in lossless compressibility.
Block make_template(Rng& rng) {
    std::vector<std::string> words(24 + rng.below(40));
    for (auto& w : words) {
        w.resize(2 + rng.below(9));
        for (auto& c : w) {
            c = static_cast<char>('!' + rng.below(94));
        }
    }

    Block b{};
    for (std::size_t seg = 0; seg < kBlockSize / kSegment; ++seg) {
        const std::size_t base = seg * kSegment;
        if (rng.below(2) == 0) {
            for (std::size_t i = 0; i < kSegment; ++i) {
                b[base + i] = rng.byte();
            }
            continue;
        }
        std::size_t i = 0;
        while (i < kSegment) {
            const auto& w = words[rng.below(words.size())];
            for (std::size_t k = 0; k < w.size() && i < kSegment; ++k, ++i) {
                b[base + i] = static_cast<std::uint8_t>(w[k]);
            }
            if (i < kSegment) {
                b[base + i++] = ' ';
            }
        }
    }
    return b;
}

}  // namespace

GeneratedCorpus generate_corpus(const SynthSpec& spec) {
    if (spec.families < 1 || spec.blocks_per_family < 1) {
        throw ConfigError("generate_corpus: families and blocks_per_family must be >= 1");
    }
    if (!(spec.duplicate_rate >= 0.0 && spec.duplicate_rate <= 1.0)) {
        throw ConfigError("generate_corpus: duplicate_rate must lie in [0, 1]");
    }
    if (spec.perturb_bytes_max > kBlockSize) {
        throw ConfigError("generate_corpus: perturb_bytes_max must be <= 4096");
    }
    if (spec.perturb_bytes_max > 0 && spec.perturb_runs_max < 1) {
        throw ConfigError("generate_corpus: perturb_runs_max must be >= 1");
    }

    Rng rng(spec.seed);
    GeneratedCorpus out;
    out.templates.reserve(spec.families);
    for (std::uint32_t f = 0; f < spec.families; ++f) {
        out.templates.push_back(make_template(rng));
    }

    struct Item {
        Block block;
        std::uint32_t family;
    };
    std::vector<Item> items;
    items.reserve(static_cast<std::size_t>(spec.families) * spec.blocks_per_family);
    for (std::uint32_t f = 0; f < spec.families; ++f) {
        for (std::uint32_t k = 0; k < spec.blocks_per_family; ++k) {
            Block b = spec.perturb_bytes_max == 0
                          ? out.templates[f]
                          : perturb_block(out.templates[f], spec.perturb_bytes_max,
                                          spec.perturb_runs_max, rng);
            items.push_back({b, f});
        }
    }
    rng.shuffle(items);

    const std::size_t n = items.size();
    std::vector<bool> dup(n, false);
    const auto n_dup = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(std::llround(spec.duplicate_rate * static_cast<double>(n))));
    if (n_dup > 0) {
        std::vector<std::size_t> positions(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            positions[i] = i + 1;
        }
        rng.shuffle(positions);
        positions.resize(n_dup);
        std::sort(positions.begin(), positions.end());
        for (const auto pos : positions) {
            const auto src = rng.below(pos);
            items[pos] = items[src];
            dup[pos] = true;
        }
    }

    out.corpus.source_id = "synth:seed=" + std::to_string(spec.seed);
    out.corpus.blocks.reserve(n);
    out.family.reserve(n);
    for (const auto& it : items) {
        out.corpus.blocks.push_back(it.block);
        out.family.push_back(it.family);
    }
    out.duplicate = std::move(dup);
    return out;
}

std::string corpus_hash(const BlockCorpus& corpus) {
    Md5 md5;
    for (const auto& b : corpus.blocks) {
        md5.update(b);
    }
    return to_hex(md5.finish());
}

}  // namespace dsketch
