#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sur/json_io.hpp"
#include "sur/tensor.hpp"
#include "sur/weights.hpp"

namespace sur {

// y = x W + b, W stored [in x out].
struct Affine {
    Tensor weight;
    Tensor bias;

    Tensor apply(const Tensor& x, Tape* tape = nullptr) const { return linear(x, weight, bias, tape); }
};

// phi2 = {h1, h2, h3} (Kaiming-initialized) and phi1 = {g} (all zeros at creation).
struct AdapterParams {
    Affine h1, h2, h3;
    Affine g;

    static AdapterParams initialize(std::size_t d_en, std::uint64_t seed);

    std::size_t d_en() const { return g.weight.dim(0); }
    // Handles onto the learnable tensors: g.weight, g.bias, then h1, h2, h3.
    std::vector<Tensor> parameters() const;
    NamedTensors named() const;
    // Deep copy with the same requires_grad flags.
    AdapterParams snapshot() const;
};

// W0 [d_en x d_llm]: fixed Kaiming projection of the knowledge vector; never trained.
struct FixedProjection {
    Tensor w0;

    static FixedProjection generate(std::size_t d_en, std::size_t d_llm, std::uint64_t seed);
    Tensor project(const Tensor& knowledge, Tape* tape = nullptr) const;
};

struct LossConfig {
    double eta = 1e-5;
    double tau = 1.0;
    double lambda1 = 1e-5;
    double lambda2 = 1e-5;
    bool enable_llm = true;
    bool enable_cp = true;

    // Throws a config error naming the offending field.
    void validate() const;
    Json to_json() const;
    static LossConfig from_json(const Json& j);
};

struct AdapterOutput {
    Tensor c_llm;  // [l_max x d_en]
    Tensor q;      // [l_max x d_en]
    Tensor att;    // [l_max x l_max]
};

// Q = h3(enc), K = h2(enc), V = enc, att = softmax(Q K^T / sqrt(d)), V' = att V,
// c_llm = g(V' + V + h1(V' + V)).
AdapterOutput adapter_forward(const AdapterParams& params, const Tensor& enc, Tape* tape = nullptr);

// eta * c_llm + (1 - eta) * enc.
Tensor blend_condition(const Tensor& c_llm, const Tensor& enc, double eta, Tape* tape = nullptr);

// KL(softmax(W0 k / tau) || softmax(mean(Q[:len]) / tau)).
Tensor loss_llm(const Tensor& q, const Tensor& knowledge, const FixedProjection& proj, std::size_t true_length,
                double tau, Tape* tape = nullptr);

// KL(softmax(mean(enc_c[:len_c]) / tau) || softmax(mean(c'[:len_s]) / tau)).
Tensor loss_cp(const Tensor& c_prime, const Tensor& enc_complex, std::size_t simple_length,
               std::size_t complex_length, double tau, Tape* tape = nullptr);

struct LossParts {
    Tensor l_llm;
    Tensor l_cp;
    Tensor l_simple;
};

// lambda1 l_llm [enable_llm] + lambda2 l_cp [enable_cp] + l_simple. Disabled terms are
// left out of the graph entirely.
Tensor total_loss(const LossParts& parts, const LossConfig& cfg, Tape* tape = nullptr);

struct AdapterState {
    static constexpr int kFormatVersion = 1;

    AdapterParams params;
    FixedProjection projection;
    LossConfig loss;
    std::uint64_t init_seed = 0;
    std::uint64_t projection_seed = 0;
    std::size_t step = 0;
    Json metadata = Json::object();

    static AdapterState create(std::size_t d_en, std::size_t d_llm, std::uint64_t init_seed,
                               std::uint64_t projection_seed, LossConfig loss);

    std::size_t d_en() const { return params.d_en(); }
    std::size_t d_llm() const { return projection.w0.dim(1); }

    // Blended per-token condition for inference (no gradient tracking).
    Tensor condition_tokens(const Tensor& enc) const;

    void save(const std::filesystem::path& dir) const;
    static AdapterState load(const std::filesystem::path& dir);
};

}  // namespace sur
