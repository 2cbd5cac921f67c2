#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sur/adapter.hpp"
#include "sur/diffusion.hpp"
#include "sur/encoders.hpp"
#include "sur/json_io.hpp"
#include "sur/optim.hpp"
#include "sur/rng.hpp"
#include "sur/surd.hpp"

namespace sur {

struct TrainConfig {
    std::size_t steps = 5000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-5;
    std::uint64_t seed = 0;
    LossConfig loss;
    std::size_t llm_layer = 0;         // 0 selects the profile's last layer
    std::size_t checkpoint_every = 0;  // 0 disables intermediate checkpoints
    std::size_t log_every = 1;
    std::string optimizer = "sgd";
    double flip_probability = 0.5;

    void validate() const;
    Json to_json() const;
    // Missing keys keep their defaults; unknown keys are rejected.
    static TrainConfig from_json(const Json& j);
};

struct TrainRecord {
    std::size_t step = 0;
    double l_llm = 0.0;
    double l_cp = 0.0;
    double l_simple = 0.0;
    double l_total = 0.0;
    double grad_norm = 0.0;

    OrderedJson to_json() const;
    static TrainRecord from_json(const Json& j);
};

std::vector<TrainRecord> read_train_log(const std::filesystem::path& path);

// One record's frozen inputs, computed once before training.
struct TrainExample {
    std::string id;
    Tensor image;
    Tensor enc_simple;
    std::size_t simple_length = 0;
    Tensor enc_complex;
    std::size_t complex_length = 0;
    std::optional<Tensor> knowledge;  // absent: train_step fails naming the record
};

// Per-record randomness for one step, drawn in this order: flip, t, eps.
struct StepDraws {
    bool flip = false;
    std::size_t t = 0;
    Tensor eps;
};

StepDraws draw_step(Rng& rng, const NoiseSchedule& sched, std::size_t image_size, double flip_probability);

Tensor flip_horizontal(const Tensor& image);

struct TrainContext {
    const Denoiser* denoiser = nullptr;
    const NoiseSchedule* schedule = nullptr;
};

struct CompositeLoss {
    LossParts parts;  // batch means
    Tensor total;
};

// Batch-mean l_llm, l_cp and l_simple plus the weighted total. Terms disabled in
// the loss config are still evaluated for logging but kept off the tape.
CompositeLoss composite_loss(const AdapterState& state, const TrainContext& ctx,
                             std::span<const TrainExample> batch, std::span<const StepDraws> draws,
                             Tape* tape = nullptr);

// Clears gradients, draws per-record randomness, back-propagates the total and
// applies one optimizer update to the adapter parameters.
TrainRecord train_step(AdapterState& state, const TrainContext& ctx, std::span<const TrainExample> batch,
                       Rng& rng, Optimizer& optimizer, double flip_probability);

// Encodes both prompts of every usable record and attaches its cached knowledge vector.
std::vector<TrainExample> prepare_examples(const Dataset& data, const EncoderBundle& encoders,
                                           const std::filesystem::path& knowledge_dir, std::size_t layer);

std::size_t resolve_layer(std::size_t requested, const LlmProfile& profile);

struct TrainResult {
    AdapterState state;
    std::vector<TrainRecord> log;
};

// Writes config.json, adapter-init/, checkpoints/step-N/, adapter/ and
// train_log.jsonl under out_dir.
TrainResult run_training(const TrainConfig& cfg, const Dataset& data, const EncoderBundle& encoders,
                         const DenoiserCheckpoint& denoiser, const std::filesystem::path& knowledge_dir,
                         const std::filesystem::path& out_dir);

}  // namespace sur
