#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sur/tensor.hpp"
#include "sur/text.hpp"
#include "sur/weights.hpp"

namespace sur {

// Desk-scale stand-ins for the 7B/13B/33B language models.
struct LlmProfile {
    std::string name;
    std::size_t n_layers;
    std::size_t d_llm;
};

std::span<const LlmProfile> llm_profiles();
const LlmProfile& llm_profile(std::string_view name);

struct EncoderDims {
    std::size_t d_en = 48;
    std::size_t l_max = 16;
    std::size_t image_size = 8;
};

// Token + position embedding followed by a per-token residual feed-forward layer
// and a causal mean-mixing layer. Pad positions bypass both layers and emit
// their raw embedding sum.
class FrozenTextEncoder {
public:
    FrozenTextEncoder(Tensor token_embedding, Tensor position_embedding, Tensor ff_weight, Tensor ff_bias,
                      Tensor mix_weight, Tensor mix_bias);

    static FrozenTextEncoder generate(std::size_t vocab_size, std::size_t l_max, std::size_t d_en,
                                      std::uint64_t seed);

    // ids.size() must equal l_max; returns [l_max x d_en].
    Tensor encode(std::span<const int> ids) const;
    Tensor encode(const TokenSequence& seq) const { return encode(std::span<const int>(seq.ids)); }

    std::size_t vocab_size() const { return token_embedding_.dim(0); }
    std::size_t l_max() const { return position_embedding_.dim(0); }
    std::size_t d_en() const { return token_embedding_.dim(1); }

    const Tensor& token_embedding() const { return token_embedding_; }
    const Tensor& position_embedding() const { return position_embedding_; }
    NamedTensors weights() const;

private:
    Tensor token_embedding_, position_embedding_, ff_weight_, ff_bias_, mix_weight_, mix_bias_;
};

// Residual stack: each layer adds tanh(causal_mean(H) W_l + b_l). Hidden states are
// reported per layer, 1-based.
class FrozenLlm {
public:
    FrozenLlm(Tensor token_embedding, Tensor position_embedding, std::vector<Tensor> layer_weights,
              std::vector<Tensor> layer_biases);

    static FrozenLlm generate(std::size_t vocab_size, std::size_t l_max, const LlmProfile& profile,
                              std::uint64_t seed);

    // Returns [l_max x d_llm]; layer must lie in 1..n_layers.
    Tensor hidden_states(std::span<const int> ids, std::size_t layer) const;

    std::size_t n_layers() const { return layer_weights_.size(); }
    std::size_t d_llm() const { return token_embedding_.dim(1); }
    NamedTensors weights() const;

private:
    Tensor token_embedding_, position_embedding_;
    std::vector<Tensor> layer_weights_, layer_biases_;
};

// Linear map from the flattened image to d_en.
class FrozenImageEmbedder {
public:
    FrozenImageEmbedder(Tensor weight, Tensor bias, std::size_t image_size);

    static FrozenImageEmbedder generate(std::size_t image_size, std::size_t d_en, std::uint64_t seed);

    Tensor embed(const Tensor& image) const;

    std::size_t image_size() const { return image_size_; }
    const Tensor& bias() const { return bias_; }
    NamedTensors weights() const;

private:
    Tensor weight_, bias_;
    std::size_t image_size_;
};

// Mean over the first true_length rows (padding excluded).
Tensor pool_knowledge_vector(const Tensor& states, std::size_t true_length);

// Everything a pipeline needs from the frozen side, persisted as one directory:
// manifest.json plus one .tns per weight matrix.
struct EncoderBundle {
    static constexpr int kFormatVersion = 1;

    std::uint64_t seed = 0;
    EncoderDims dims;
    LlmProfile profile;
    Vocabulary vocab;
    FrozenTextEncoder text;
    FrozenLlm llm;
    FrozenImageEmbedder image;

    static EncoderBundle generate(std::uint64_t seed, const LlmProfile& profile, Vocabulary vocab,
                                  EncoderDims dims = {});
    void save(const std::filesystem::path& dir) const;
    static EncoderBundle load(const std::filesystem::path& dir);

    TokenSequence tokenize(std::string_view text) const;
    Tensor encode_text(std::string_view text) const;
    Tensor knowledge_vector(std::string_view text, std::size_t layer) const;
};

// Names of the weight files an encoder directory holds (without extension).
std::vector<std::string> encoder_weight_names(const std::filesystem::path& dir);

}  // namespace sur
