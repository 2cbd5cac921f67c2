#include "sur/encoders.hpp"

#include <array>
#include <cmath>

#include "sur/error.hpp"
#include "sur/json_io.hpp"

namespace sur {

namespace {

const std::array<LlmProfile, 3> kProfiles = {{
    {"7b-toy", 8, 64},
    {"13b-toy", 10, 80},
    {"33b-toy", 12, 104},
}};

void check_ids(std::span<const int> ids, std::size_t vocab_size, std::size_t l_max) {
    if (ids.size() != l_max) {
        fail(ErrorKind::Dimension,
             "expected " + std::to_string(l_max) + " token ids, got " + std::to_string(ids.size()));
    }
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
            fail(ErrorKind::Vocabulary,
                 "token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(vocab_size));
        }
    }
}

}  // namespace

std::span<const LlmProfile> llm_profiles() { return kProfiles; }

const LlmProfile& llm_profile(std::string_view name) {
    for (const auto& p : kProfiles) {
        if (p.name == name) return p;
    }
    fail(ErrorKind::Config, "unknown llm profile '" + std::string(name) + "' (expected 7b-toy, 13b-toy or 33b-toy)");
}

// ---- text encoder -----------------------------------------------------------

FrozenTextEncoder::FrozenTextEncoder(Tensor token_embedding, Tensor position_embedding, Tensor ff_weight,
                                     Tensor ff_bias, Tensor mix_weight, Tensor mix_bias)
    : token_embedding_(std::move(token_embedding)),
      position_embedding_(std::move(position_embedding)),
      ff_weight_(std::move(ff_weight)),
      ff_bias_(std::move(ff_bias)),
      mix_weight_(std::move(mix_weight)),
      mix_bias_(std::move(mix_bias)) {
    const std::size_t d = d_en();
    if (position_embedding_.dim(1) != d || ff_weight_.shape() != Shape{d, d} || ff_bias_.shape() != Shape{d} ||
        mix_weight_.shape() != Shape{d, d} || mix_bias_.shape() != Shape{d}) {
        fail(ErrorKind::Dimension, "inconsistent text encoder weight shapes");
    }
}

FrozenTextEncoder FrozenTextEncoder::generate(std::size_t vocab_size, std::size_t l_max, std::size_t d_en,
                                              std::uint64_t seed) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(d_en));
    return FrozenTextEncoder(seeded_normal({vocab_size, d_en}, 1.0, seed, "text_token_embedding"),
                             seeded_normal({l_max, d_en}, 0.1, seed, "text_position_embedding"),
                             seeded_normal({d_en, d_en}, inv, seed, "text_ff_weight"),
                             seeded_normal({d_en}, 0.1, seed, "text_ff_bias"),
                             seeded_normal({d_en, d_en}, inv, seed, "text_mix_weight"),
                             seeded_normal({d_en}, 0.1, seed, "text_mix_bias"));
}

Tensor FrozenTextEncoder::encode(std::span<const int> ids) const {
    check_ids(ids, vocab_size(), l_max());
    const std::size_t d = d_en();
    const auto emb = token_embedding_.data();
    const auto pos = position_embedding_.data();
    std::vector<double> out(l_max() * d);
    std::vector<double> running(d, 0.0);
    std::size_t seen = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) x[j] = emb[static_cast<std::size_t>(ids[i]) * d + j] + pos[i * d + j];
        if (ids[i] == Vocabulary::kPad) {
            std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
            continue;
        }
        const Tensor xt(Shape{1, d}, x);
        const Tensor ff = tanh(linear(xt, ff_weight_, ff_bias_));
        std::vector<double> u(d);
        for (std::size_t j = 0; j < d; ++j) {
            u[j] = x[j] + ff[j];
            running[j] += u[j];
        }
        ++seen;
        std::vector<double> mean(d);
        for (std::size_t j = 0; j < d; ++j) mean[j] = running[j] / static_cast<double>(seen);
        const Tensor mix = tanh(linear(Tensor(Shape{1, d}, mean), mix_weight_, mix_bias_));
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = u[j] + mix[j];
    }
    return Tensor(Shape{l_max(), d}, std::move(out));
}

NamedTensors FrozenTextEncoder::weights() const {
    return {{"text_token_embedding", token_embedding_}, {"text_position_embedding", position_embedding_},
            {"text_ff_weight", ff_weight_},             {"text_ff_bias", ff_bias_},
            {"text_mix_weight", mix_weight_},           {"text_mix_bias", mix_bias_}};
}

// ---- language model -----------------------------------------------------------

FrozenLlm::FrozenLlm(Tensor token_embedding, Tensor position_embedding, std::vector<Tensor> layer_weights,
                     std::vector<Tensor> layer_biases)
    : token_embedding_(std::move(token_embedding)),
      position_embedding_(std::move(position_embedding)),
      layer_weights_(std::move(layer_weights)),
      layer_biases_(std::move(layer_biases)) {
    if (layer_weights_.empty() || layer_weights_.size() != layer_biases_.size()) {
        fail(ErrorKind::Dimension, "language model needs matching, non-empty layer weight and bias lists");
    }
}

FrozenLlm FrozenLlm::generate(std::size_t vocab_size, std::size_t l_max, const LlmProfile& profile,
                              std::uint64_t seed) {
    const std::size_t d = profile.d_llm;
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Tensor> ws, bs;
    for (std::size_t l = 1; l <= profile.n_layers; ++l) {
        ws.push_back(seeded_normal({d, d}, inv, seed, "llm_layer" + std::to_string(l) + "_weight"));
        bs.push_back(seeded_normal({d}, 0.1, seed, "llm_layer" + std::to_string(l) + "_bias"));
    }
    return FrozenLlm(seeded_normal({vocab_size, d}, 1.0, seed, "llm_token_embedding"),
                     seeded_normal({l_max, d}, 0.1, seed, "llm_position_embedding"), std::move(ws), std::move(bs));
}

Tensor FrozenLlm::hidden_states(std::span<const int> ids, std::size_t layer) const {
    if (layer < 1 || layer > n_layers()) {
        fail(ErrorKind::Range,
             "llm layer " + std::to_string(layer) + " outside 1.." + std::to_string(n_layers()));
    }
    const std::size_t l_max = position_embedding_.dim(0);
    check_ids(ids, token_embedding_.dim(0), l_max);
    const std::size_t d = d_llm();
    const auto emb = token_embedding_.data();
    const auto pos = position_embedding_.data();
    std::vector<double> h(l_max * d);
    for (std::size_t i = 0; i < l_max; ++i)
        for (std::size_t j = 0; j < d; ++j) h[i * d + j] = emb[static_cast<std::size_t>(ids[i]) * d + j] + pos[i * d + j];

    for (std::size_t l = 0; l < layer; ++l) {
        // Causal prefix means of the current states.
        std::vector<double> means(l_max * d);
        std::vector<double> running(d, 0.0);
        for (std::size_t i = 0; i < l_max; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                running[j] += h[i * d + j];
                means[i * d + j] = running[j] / static_cast<double>(i + 1);
            }
        const Tensor update = tanh(linear(Tensor(Shape{l_max, d}, std::move(means)), layer_weights_[l], layer_biases_[l]));
        for (std::size_t k = 0; k < h.size(); ++k) h[k] += update[k];
    }
    return Tensor(Shape{l_max, d}, std::move(h));
}

NamedTensors FrozenLlm::weights() const {
    NamedTensors out = {{"llm_token_embedding", token_embedding_}, {"llm_position_embedding", position_embedding_}};
    for (std::size_t l = 0; l < layer_weights_.size(); ++l) {
        out.emplace_back("llm_layer" + std::to_string(l + 1) + "_weight", layer_weights_[l]);
        out.emplace_back("llm_layer" + std::to_string(l + 1) + "_bias", layer_biases_[l]);
    }
    return out;
}

// ---- image embedder -----------------------------------------------------------

FrozenImageEmbedder::FrozenImageEmbedder(Tensor weight, Tensor bias, std::size_t image_size)
    : weight_(std::move(weight)), bias_(std::move(bias)), image_size_(image_size) {
    if (weight_.rank() != 2 || weight_.dim(0) != image_size_ * image_size_ || bias_.shape() != Shape{weight_.dim(1)}) {
        fail(ErrorKind::Dimension, "inconsistent image embedder weight shapes");
    }
}

FrozenImageEmbedder FrozenImageEmbedder::generate(std::size_t image_size, std::size_t d_en, std::uint64_t seed) {
    const std::size_t pixels = image_size * image_size;
    return FrozenImageEmbedder(seeded_normal({pixels, d_en}, 1.0 / std::sqrt(static_cast<double>(pixels)), seed,
                                             "image_weight"),
                               seeded_normal({d_en}, 0.1, seed, "image_bias"), image_size);
}

Tensor FrozenImageEmbedder::embed(const Tensor& image) const {
    if (image.shape() != Shape{image_size_, image_size_}) {
        fail(ErrorKind::Dimension, "image shape " + shape_string(image.shape()) + " does not match configured [" +
                                       std::to_string(image_size_) + "x" + std::to_string(image_size_) + "]");
    }
    const Tensor flat = reshape(image, {1, image.numel()});
    return reshape(linear(flat, weight_, bias_), {bias_.numel()});
}

NamedTensors FrozenImageEmbedder::weights() const { return {{"image_weight", weight_}, {"image_bias", bias_}}; }

Tensor pool_knowledge_vector(const Tensor& states, std::size_t true_length) {
    if (true_length == 0) fail(ErrorKind::EmptyInput, "knowledge pooling over zero tokens");
    if (states.rank() != 2) fail(ErrorKind::Dimension, "pooling expects a matrix, got " + shape_string(states.shape()));
    if (true_length > states.dim(0)) {
        fail(ErrorKind::Range, "true length " + std::to_string(true_length) + " exceeds " +
                                   std::to_string(states.dim(0)) + " rows");
    }
    return mean_rows(slice_rows(states, 0, true_length));
}

// ---- bundle -------------------------------------------------------------------

EncoderBundle EncoderBundle::generate(std::uint64_t seed, const LlmProfile& profile, Vocabulary vocab,
                                      EncoderDims dims) {
    const std::size_t v = vocab.size();
    return EncoderBundle{seed,
                         dims,
                         profile,
                         std::move(vocab),
                         FrozenTextEncoder::generate(v, dims.l_max, dims.d_en, seed),
                         FrozenLlm::generate(v, dims.l_max, profile, seed),
                         FrozenImageEmbedder::generate(dims.image_size, dims.d_en, seed)};
}

void EncoderBundle::save(const std::filesystem::path& dir) const {
    NamedTensors all = text.weights();
    for (auto& w : llm.weights()) all.push_back(std::move(w));
    for (auto& w : image.weights()) all.push_back(std::move(w));
    const Json files = write_weight_files(dir, all);
    Json manifest = {
        {"format_version", kFormatVersion},
        {"kind", "encoders"},
        {"seed", seed},
        {"d_en", dims.d_en},
        {"l_max", dims.l_max},
        {"image_size", dims.image_size},
        {"llm_profile", profile.name},
        {"llm_layers", profile.n_layers},
        {"d_llm", profile.d_llm},
        {"vocab", vocab.words()},
        {"files", files},
    };
    write_json(dir / "manifest.json", manifest);
}

EncoderBundle EncoderBundle::load(const std::filesystem::path& dir) {
    const Json m = read_json(dir / "manifest.json");
    check_format_version(m, kFormatVersion, (dir / "manifest.json").string());
    try {
        EncoderDims dims{m.at("d_en").get<std::size_t>(), m.at("l_max").get<std::size_t>(),
                         m.at("image_size").get<std::size_t>()};
        const LlmProfile& profile = llm_profile(m.at("llm_profile").get<std::string>());
        Vocabulary vocab(m.at("vocab").get<std::vector<std::string>>());
        const Json& files = m.at("files");
        auto w = [&](const std::string& name) { return read_weight_file(dir, files, name); };
        FrozenTextEncoder text(w("text_token_embedding"), w("text_position_embedding"), w("text_ff_weight"),
                               w("text_ff_bias"), w("text_mix_weight"), w("text_mix_bias"));
        std::vector<Tensor> ws, bs;
        for (std::size_t l = 1; l <= profile.n_layers; ++l) {
            ws.push_back(w("llm_layer" + std::to_string(l) + "_weight"));
            bs.push_back(w("llm_layer" + std::to_string(l) + "_bias"));
        }
        FrozenLlm llm(w("llm_token_embedding"), w("llm_position_embedding"), std::move(ws), std::move(bs));
        FrozenImageEmbedder image(w("image_weight"), w("image_bias"), dims.image_size);
        if (text.vocab_size() != vocab.size() || text.l_max() != dims.l_max || text.d_en() != dims.d_en ||
            llm.d_llm() != profile.d_llm) {
            fail(ErrorKind::Format, dir.string() + ": weights disagree with manifest dimensions");
        }
        return EncoderBundle{m.at("seed").get<std::uint64_t>(), dims, profile, std::move(vocab),
                             std::move(text), std::move(llm), std::move(image)};
    } catch (const Json::exception& e) {
        fail(ErrorKind::Format, (dir / "manifest.json").string() + ": " + e.what());
    }
}

TokenSequence EncoderBundle::tokenize(std::string_view text_in) const { return sur::tokenize(text_in, vocab, dims.l_max); }

Tensor EncoderBundle::encode_text(std::string_view text_in) const { return text.encode(tokenize(text_in)); }

Tensor EncoderBundle::knowledge_vector(std::string_view text_in, std::size_t layer) const {
    const auto seq = tokenize(text_in);
    return pool_knowledge_vector(llm.hidden_states(seq.ids, layer), seq.length);
}

std::vector<std::string> encoder_weight_names(const std::filesystem::path& dir) {
    const Json m = read_json(dir / "manifest.json");
    std::vector<std::string> names;
    for (auto it = m.at("files").begin(); it != m.at("files").end(); ++it) names.push_back(it.key());
    return names;
}

}  // namespace sur
