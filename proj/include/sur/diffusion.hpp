#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sur/json_io.hpp"
#include "sur/tensor.hpp"
#include "sur/weights.hpp"

namespace sur {

// sigma linear in t from sigma_min to sigma_max, alpha_t = sqrt(1 - sigma_t^2).
class NoiseSchedule {
public:
    explicit NoiseSchedule(std::size_t steps = 50, double sigma_min = 0.02, double sigma_max = 0.999);

    std::size_t steps() const { return sigma_.size(); }
    double sigma(std::size_t t) const;
    double alpha(std::size_t t) const;
    double sigma_min() const { return sigma_.front(); }
    double sigma_max() const { return sigma_.back(); }
    std::span<const double> sigmas() const { return sigma_; }
    std::span<const double> alphas() const { return alpha_; }

private:
    std::vector<double> sigma_, alpha_;
};

// x_t = alpha_t x0 + sigma_t eps.
Tensor forward_noise(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);

// Mean over all token rows, pad rows included.
Tensor condition_pool(const Tensor& cond_tokens, Tape* tape = nullptr);

// [sin(t w_0), cos(t w_0), ..., sin(t w_{k-1}), cos(t w_{k-1})] with w_i = 10000^(-i/k), k = dim/2.
Tensor time_embedding(std::size_t t, std::size_t dim);

struct DenoiserConfig {
    std::size_t image_size = 8;
    std::size_t d_cond = 48;
    std::size_t hidden = 128;
    std::size_t time_dim = 16;
};

// Two tanh hidden layers over [flattened x_t, time embedding, condition].
class Denoiser {
public:
    Denoiser(DenoiserConfig config, NamedTensors weights);

    static Denoiser initialize(DenoiserConfig config, std::uint64_t seed);

    Tensor predict_eps(const Tensor& xt, std::size_t t, const Tensor& cond, Tape* tape = nullptr) const;

    const DenoiserConfig& config() const { return config_; }
    NamedTensors weights() const;
    std::vector<Tensor> parameters() const;
    void set_trainable(bool on);

private:
    DenoiserConfig config_;
    Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

Tensor simple_loss(const Denoiser& den, const Tensor& x0, std::size_t t, const Tensor& eps, const Tensor& cond,
                   const NoiseSchedule& sched, Tape* tape = nullptr);

// Ancestral sampling. Draw order from Rng(seed): x_{T-1} (row-major), then one
// noise image per step t = T-1 .. 1. The step at t = 0 returns x0_hat without noise.
Tensor ddpm_sample(const Denoiser& den, const NoiseSchedule& sched, const Tensor& cond, std::uint64_t seed);

struct PretrainConfig {
    std::size_t steps = 3000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct PretrainExample {
    Tensor image;
    Tensor cond;
};

// Fits all denoiser weights with Adam on the eps-prediction objective. Returns
// the per-step mean loss.
std::vector<double> pretrain_denoiser(Denoiser& den, const NoiseSchedule& sched,
                                      std::span<const PretrainExample> data, const PretrainConfig& config);

struct DenoiserCheckpoint {
    static constexpr int kFormatVersion = 1;

    Denoiser denoiser;
    NoiseSchedule schedule;
    std::uint64_t seed = 0;
    Json info = Json::object();

    void save(const std::filesystem::path& dir) const;
    static DenoiserCheckpoint load(const std::filesystem::path& dir);
};

}  // namespace sur
