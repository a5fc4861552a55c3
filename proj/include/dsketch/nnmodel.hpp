#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsketch/block.hpp"

namespace dsketch {

inline constexpr std::size_t kSketchBits = 128;

/// Architecture of the sketch network. Everything except `class_count` is fixed;
/// the struct records it so loaders can check shapes against one place.
struct ModelConfig {
    std::size_t input_len = kBlockSize;
    std::array<std::size_t, 3> conv_channels{16, 32, 64};
    std::size_t conv_kernel = 8;
    std::size_t pool = 4;
    std::size_t dense_units = 1024;
    std::size_t hash_bits = kSketchBits;
    std::size_t class_count = 1;
    float bn_epsilon = 1e-5f;

    /// Length of the flattened feature map after the last conv block (64 x 64).
    std::size_t flat_len() const;
};

struct Tensor {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> values;

    std::size_t numel() const;
};

struct ConvBlockWeights {
    std::vector<float> weight;   // [out][in][kernel]
    std::vector<float> bias;     // [out]
    std::vector<float> gamma, beta, mean, var;   // batch-norm, [out]
};

struct DenseWeights {
    std::vector<float> weight;   // [out][in]
    std::vector<float> bias;     // [out]
};

struct WeightBundle {
    std::array<ConvBlockWeights, 3> conv;
    DenseWeights dense;
    DenseWeights hash;
    DenseWeights head;
};

/// Tensor names and shapes in file order.
std::vector<std::pair<std::string, std::vector<std::uint32_t>>> tensor_layout(const ModelConfig& cfg);

/// Flattens a bundle into file-order tensors and back.
std::vector<Tensor> to_tensors(const ModelConfig& cfg, const WeightBundle& w);
WeightBundle from_tensors(const ModelConfig& cfg, std::vector<Tensor> tensors);

/// All-zero weights with identity batch-norm statistics.
WeightBundle zero_weights(const ModelConfig& cfg);

struct LoadedModel {
    ModelConfig config;
    WeightBundle weights;
};

// DSKW layout: magic "DSKW", u32 version = 1, u32 class_count, u32 hash_bits,
// u32 tensor_count, then per tensor: u8 name_len, name, u8 rank, u32 dims[rank],
// float32 values row-major. Integers and floats little-endian.
LoadedModel load_weights(const std::filesystem::path& path);
void save_weights(const ModelConfig& cfg, const WeightBundle& w, const std::filesystem::path& path);

struct Sketch {
    std::array<std::uint64_t, 2> words{};

    bool bit(std::size_t i) const { return (words[i / 64] >> (i % 64)) & 1u; }
    void set(std::size_t i) { words[i / 64] |= std::uint64_t{1} << (i % 64); }

    /// 32 hex digits of the 128-bit integer sum(bit_i << i), most significant first.
    std::string hex() const;
    static Sketch from_hex(const std::string& s);

    friend bool operator==(const Sketch&, const Sketch&) = default;
};

inline std::uint32_t hamming(const Sketch& a, const Sketch& b) {
    return static_cast<std::uint32_t>(std::popcount(a.words[0] ^ b.words[0]) +
                                      std::popcount(a.words[1] ^ b.words[1]));
}

/// Inference-ready network. Immutable after construction, so concurrent calls
/// to `sketch` on one instance are safe.
///
/// Forward pass: bytes scaled to [-1, 1], three blocks of conv1d (same padding,
/// 3 left / 4 right) -> batch-norm -> ReLU -> max-pool 4, flatten channel-major,
/// dense 1024 -> ReLU, hash layer 128, sign. Every dot product starts from 0,
/// accumulates its terms in index order (input channel, then tap) in float32 and
/// adds the bias last, so results are bit-reproducible.
class SketchModel {
public:
    SketchModel(ModelConfig cfg, WeightBundle weights);

    static SketchModel load(const std::filesystem::path& path);

    const ModelConfig& config() const { return cfg_; }
    const WeightBundle& weights() const { return weights_; }

    /// Hash-layer pre-activations (before the sign).
    std::vector<float> hash_preactivations(const Block& b) const;

    Sketch sketch(const Block& b) const;

private:
    ModelConfig cfg_;
    WeightBundle weights_;
    std::vector<float> dense_t_;   // dense weights as [in][out]
    std::vector<float> hash_t_;    // hash weights as [in][out]
};

}  // namespace dsketch
