#include "dsketch/nnmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "binio.hpp"
#include "dsketch/errors.hpp"

namespace dsketch {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'K', 'W'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kPadLeft = 3;   // kernel 8, same padding: 3 before, 4 after

using Shape = std::vector<std::uint32_t>;

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

void check_config(const ModelConfig& cfg) {
    const ModelConfig ref;
    if (cfg.input_len != ref.input_len || cfg.conv_channels != ref.conv_channels ||
        cfg.conv_kernel != ref.conv_kernel || cfg.pool != ref.pool || cfg.dense_units != ref.dense_units ||
        cfg.hash_bits != ref.hash_bits || cfg.class_count < 1) {
        throw ConfigError("model config: only the fixed architecture with class_count >= 1 is supported");
    }
}

// conv1d (same padding) -> batch-norm -> ReLU -> max-pool. `in` is [cin][len].
std::vector<float> conv_block(const std::vector<float>& in, std::size_t cin, std::size_t len,
                              const ConvBlockWeights& w, std::size_t cout, const ModelConfig& cfg) {
    const std::size_t k = cfg.conv_kernel;
    const std::size_t plen = len + k - 1;
    std::vector<float> padded(cin * plen, 0.0f);
    for (std::size_t c = 0; c < cin; ++c) {
        std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(c * len), len,
                    padded.begin() + static_cast<std::ptrdiff_t>(c * plen + kPadLeft));
    }

    const std::size_t olen = len / cfg.pool;
    std::vector<float> out(cout * olen);
    std::vector<float> acc(len);
    for (std::size_t oc = 0; oc < cout; ++oc) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (std::size_t ic = 0; ic < cin; ++ic) {
            const float* src = padded.data() + ic * plen;
            const float* wk = w.weight.data() + (oc * cin + ic) * k;
            for (std::size_t t = 0; t < k; ++t) {
                const float wt = wk[t];
                const float* s = src + t;
                for (std::size_t i = 0; i < len; ++i) {
                    acc[i] += wt * s[i];
                }
            }
        }
        const float bias = w.bias[oc];
        const float gamma = w.gamma[oc];
        const float mean = w.mean[oc];
        const float beta = w.beta[oc];
        const float denom = std::sqrt(w.var[oc] + cfg.bn_epsilon);
        for (std::size_t i = 0; i < len; ++i) {
            const float y = (gamma * ((acc[i] + bias) - mean)) / denom + beta;
            acc[i] = y > 0.0f ? y : 0.0f;
        }
        float* dst = out.data() + oc * olen;
        for (std::size_t j = 0; j < olen; ++j) {
            const float* p = acc.data() + j * cfg.pool;
            float m = p[0];
            for (std::size_t q = 1; q < cfg.pool; ++q) {
                m = std::max(m, p[q]);
            }
            dst[j] = m;
        }
    }
    return out;
}

// y = W x + b with W stored transposed as [in][out].
std::vector<float> dense(const std::vector<float>& x, const std::vector<float>& wt,
                         const std::vector<float>& bias) {
    const std::size_t nout = bias.size();
    std::vector<float> acc(nout, 0.0f);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float xi = x[i];
        const float* row = wt.data() + i * nout;
        for (std::size_t j = 0; j < nout; ++j) {
            acc[j] += row[j] * xi;
        }
    }
    for (std::size_t j = 0; j < nout; ++j) {
        acc[j] += bias[j];
    }
    return acc;
}

std::vector<float> transpose(const std::vector<float>& w, std::size_t rows, std::size_t cols) {
    std::vector<float> t(w.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            t[c * rows + r] = w[r * cols + c];
        }
    }
    return t;
}

}  // namespace

std::size_t ModelConfig::flat_len() const {
    std::size_t len = input_len;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
        len /= pool;
    }
    return len * conv_channels.back();
}

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (const auto d : shape) {
        n *= d;
    }
    return n;
}

std::vector<std::pair<std::string, Shape>> tensor_layout(const ModelConfig& cfg) {
    std::vector<std::pair<std::string, Shape>> out;
    std::size_t cin = 1;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto c = u32(cfg.conv_channels[i]);
        const auto conv = "conv" + std::to_string(i + 1);
        const auto bn = "bn" + std::to_string(i + 1);
        out.push_back({conv + ".weight", {c, u32(cin), u32(cfg.conv_kernel)}});
        out.push_back({conv + ".bias", {c}});
        out.push_back({bn + ".gamma", {c}});
        out.push_back({bn + ".beta", {c}});
        out.push_back({bn + ".mean", {c}});
        out.push_back({bn + ".var", {c}});
        cin = c;
    }
    out.push_back({"dense.weight", {u32(cfg.dense_units), u32(cfg.flat_len())}});
    out.push_back({"dense.bias", {u32(cfg.dense_units)}});
    out.push_back({"hash.weight", {u32(cfg.hash_bits), u32(cfg.dense_units)}});
    out.push_back({"hash.bias", {u32(cfg.hash_bits)}});
    out.push_back({"head.weight", {u32(cfg.class_count), u32(cfg.hash_bits)}});
    out.push_back({"head.bias", {u32(cfg.class_count)}});
    return out;
}

std::vector<Tensor> to_tensors(const ModelConfig& cfg, const WeightBundle& w) {
    std::vector<const std::vector<float>*> src;
    for (const auto& c : w.conv) {
        src.insert(src.end(), {&c.weight, &c.bias, &c.gamma, &c.beta, &c.mean, &c.var});
    }
    src.insert(src.end(), {&w.dense.weight, &w.dense.bias, &w.hash.weight, &w.hash.bias,
                           &w.head.weight, &w.head.bias});
    auto layout = tensor_layout(cfg);
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        Tensor t{std::move(layout[i].first), std::move(layout[i].second), *src[i]};
        if (t.values.size() != t.numel()) {
            throw ConfigError("tensor " + t.name + ": value count does not match its shape");
        }
        out.push_back(std::move(t));
    }
    return out;
}

WeightBundle from_tensors(const ModelConfig& cfg, std::vector<Tensor> tensors) {
    const auto layout = tensor_layout(cfg);
    if (tensors.size() != layout.size()) {
        throw WeightLoadError("expected " + std::to_string(layout.size()) + " tensors, got " +
                              std::to_string(tensors.size()));
    }
    WeightBundle w;
    std::vector<std::vector<float>*> dst;
    for (auto& c : w.conv) {
        dst.insert(dst.end(), {&c.weight, &c.bias, &c.gamma, &c.beta, &c.mean, &c.var});
    }
    dst.insert(dst.end(), {&w.dense.weight, &w.dense.bias, &w.hash.weight, &w.hash.bias,
                           &w.head.weight, &w.head.bias});
    for (std::size_t i = 0; i < layout.size(); ++i) {
        auto& t = tensors[i];
        if (t.name != layout[i].first) {
            throw WeightLoadError("tensor " + std::to_string(i) + ": expected " + layout[i].first +
                                  ", found " + t.name);
        }
        if (t.shape != layout[i].second || t.values.size() != t.numel()) {
            throw WeightLoadError("tensor " + t.name + ": shape mismatch");
        }
        for (const float v : t.values) {
            if (!std::isfinite(v)) {
                throw WeightLoadError("tensor " + t.name + ": non-finite value");
            }
        }
        if (t.name.ends_with(".var") &&
            std::any_of(t.values.begin(), t.values.end(), [](float v) { return v < 0.0f; })) {
            throw WeightLoadError("tensor " + t.name + ": negative variance");
        }
        *dst[i] = std::move(t.values);
    }
    return w;
}

WeightBundle zero_weights(const ModelConfig& cfg) {
    std::vector<Tensor> tensors;
    for (auto& [name, shape] : tensor_layout(cfg)) {
        Tensor t{name, shape, {}};
        const float fill = name.ends_with(".gamma") ? 1.0f : name.ends_with(".var") ? 1.0f - cfg.bn_epsilon : 0.0f;
        t.values.assign(t.numel(), fill);
        tensors.push_back(std::move(t));
    }
    return from_tensors(cfg, std::move(tensors));
}

LoadedModel load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw WeightLoadError("cannot open weight file: " + path.string());
    }
    const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::Reader r(buf);

    std::span<const std::uint8_t> magic;
    if (!r.bytes(4, magic) || !std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
        throw WeightLoadError("weight file: bad magic");
    }
    std::uint32_t version = 0, classes = 0, bits = 0, count = 0;
    if (!r.le(version) || !r.le(classes) || !r.le(bits) || !r.le(count)) {
        throw WeightLoadError("weight file: truncated header");
    }
    if (version != kVersion) {
        throw WeightLoadError("weight file: unsupported version " + std::to_string(version));
    }
    if (bits != kSketchBits) {
        throw WeightLoadError("weight file: hash_bits must be 128, got " + std::to_string(bits));
    }
    if (classes < 1) {
        throw WeightLoadError("weight file: class_count must be >= 1");
    }

    LoadedModel m;
    m.config.class_count = classes;
    const auto layout = tensor_layout(m.config);
    if (count != layout.size()) {
        throw WeightLoadError("weight file: expected " + std::to_string(layout.size()) + " tensors, got " +
                              std::to_string(count));
    }

    std::vector<Tensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string& expect = layout[i].first;
        Tensor t;
        std::uint8_t name_len = 0;
        std::span<const std::uint8_t> name;
        std::uint8_t rank = 0;
        if (!r.le(name_len) || !r.bytes(name_len, name) || !r.le(rank)) {
            throw WeightLoadError("weight file: truncated header of tensor " + expect);
        }
        t.name.assign(name.begin(), name.end());
        if (t.name != expect) {
            throw WeightLoadError("weight file: tensor " + std::to_string(i) + " should be " + expect +
                                  ", found " + t.name);
        }
        t.shape.resize(rank);
        for (auto& d : t.shape) {
            if (!r.le(d)) {
                throw WeightLoadError("weight file: truncated shape of tensor " + expect);
            }
        }
        if (t.shape != layout[i].second) {
            throw WeightLoadError("weight file: shape mismatch in tensor " + expect);
        }
        t.values.resize(t.numel());
        for (auto& v : t.values) {
            if (!r.f32(v)) {
                throw WeightLoadError("weight file: truncated values of tensor " + expect);
            }
        }
        tensors.push_back(std::move(t));
    }
    if (!r.at_end()) {
        throw WeightLoadError("weight file: trailing bytes after last tensor");
    }
    m.weights = from_tensors(m.config, std::move(tensors));
    return m;
}

void save_weights(const ModelConfig& cfg, const WeightBundle& w, const std::filesystem::path& path) {
    check_config(cfg);
    const auto tensors = to_tensors(cfg, w);
    std::vector<std::uint8_t> buf(std::begin(kMagic), std::end(kMagic));
    detail::put_le<std::uint32_t>(buf, kVersion);
    detail::put_le<std::uint32_t>(buf, u32(cfg.class_count));
    detail::put_le<std::uint32_t>(buf, u32(cfg.hash_bits));
    detail::put_le<std::uint32_t>(buf, u32(tensors.size()));
    for (const auto& t : tensors) {
        buf.push_back(static_cast<std::uint8_t>(t.name.size()));
        buf.insert(buf.end(), t.name.begin(), t.name.end());
        buf.push_back(static_cast<std::uint8_t>(t.shape.size()));
        for (const auto d : t.shape) {
            detail::put_le<std::uint32_t>(buf, d);
        }
        for (const float v : t.values) {
            detail::put_f32(buf, v);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size())) ||
        !out.flush()) {
        throw StoreIoError("cannot write weight file: " + path.string());
    }
}

std::string Sketch::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(32, '0');
    for (std::size_t i = 0; i < 32; ++i) {
        const std::size_t nibble = 31 - i;   // most significant first
        s[i] = kDigits[(words[nibble / 16] >> (4 * (nibble % 16))) & 0xf];
    }
    return s;
}

Sketch Sketch::from_hex(const std::string& s) {
    if (s.size() != 32) {
        throw FormatError("sketch hex must be 32 digits");
    }
    Sketch out;
    for (std::size_t i = 0; i < 32; ++i) {
        const char c = s[i];
        std::uint64_t v = 0;
        if (c >= '0' && c <= '9') {
            v = static_cast<std::uint64_t>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            v = static_cast<std::uint64_t>(c - 'a' + 10);
        } else if (c >= 'A' && c <= 'F') {
            v = static_cast<std::uint64_t>(c - 'A' + 10);
        } else {
            throw FormatError("sketch hex: invalid digit");
        }
        const std::size_t nibble = 31 - i;
        out.words[nibble / 16] |= v << (4 * (nibble % 16));
    }
    return out;
}

SketchModel::SketchModel(ModelConfig cfg, WeightBundle weights) : cfg_(cfg), weights_(std::move(weights)) {
    check_config(cfg_);
    // Re-validates shapes and values when built from an in-memory bundle.
    weights_ = from_tensors(cfg_, to_tensors(cfg_, weights_));
    dense_t_ = transpose(weights_.dense.weight, cfg_.dense_units, cfg_.flat_len());
    hash_t_ = transpose(weights_.hash.weight, cfg_.hash_bits, cfg_.dense_units);
}

SketchModel SketchModel::load(const std::filesystem::path& path) {
    auto m = load_weights(path);
    return SketchModel(m.config, std::move(m.weights));
}

std::vector<float> SketchModel::hash_preactivations(const Block& b) const {
    std::vector<float> x(cfg_.input_len);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<float>(b[i]) / 255.0f * 2.0f - 1.0f;
    }
    std::size_t cin = 1;
    std::size_t len = cfg_.input_len;
    for (std::size_t l = 0; l < 3; ++l) {
        x = conv_block(x, cin, len, weights_.conv[l], cfg_.conv_channels[l], cfg_);
        cin = cfg_.conv_channels[l];
        len /= cfg_.pool;
    }
    auto h = dense(x, dense_t_, weights_.dense.bias);
    for (auto& v : h) {
        v = v > 0.0f ? v : 0.0f;
    }
    return dense(h, hash_t_, weights_.hash.bias);
}

Sketch SketchModel::sketch(const Block& b) const {
    const auto pre = hash_preactivations(b);
    Sketch s;
    for (std::size_t i = 0; i < pre.size(); ++i) {
        if (pre[i] >= 0.0f) {
            s.set(i);
        }
    }
    return s;
}

}  // namespace dsketch
