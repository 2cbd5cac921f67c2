#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sur/diffusion.hpp"
#include "sur/json_io.hpp"
#include "sur/trainer.hpp"

namespace sur {

// Top-level run configuration. Every section is optional and falls back to its
// defaults; unknown keys anywhere are rejected. The top-level seed drives every
// seeded stage.
struct AppConfig {
    static constexpr int kSchemaVersion = 1;

    std::uint64_t seed = 0;

    std::string profile_name = "13b-toy";
    EncoderDims encoder_dims;

    std::size_t diffusion_steps = 50;
    double sigma_min = 0.02;
    double sigma_max = 0.999;
    std::size_t denoiser_hidden = 128;
    std::size_t denoiser_time_dim = 16;

    PretrainConfig pretrain;
    TrainConfig train;  // train.loss holds the loss section

    void validate() const;
    Json to_json() const;
    static AppConfig from_json(const Json& j);
    static AppConfig load(const std::filesystem::path& path);

    // Replaces the seed everywhere when `value` is set; must be an unsigned integer.
    void override_seed(const char* value);

    NoiseSchedule schedule() const { return NoiseSchedule(diffusion_steps, sigma_min, sigma_max); }
    DenoiserConfig denoiser_config() const;
};

}  // namespace sur
