#include "sur/config.hpp"

#include <cmath>

#include "sur/error.hpp"

namespace sur {

namespace {

void require_positive(std::size_t v, const char* field) {
    if (v == 0) fail(ErrorKind::Config, std::string(field) + " must be positive");
}

}  // namespace

void AppConfig::validate() const {
    try {
        (void)llm_profile(profile_name);
    } catch (const Error&) {
        fail(ErrorKind::Config, "encoders.profile: unknown profile '" + profile_name + "'");
    }
    require_positive(encoder_dims.d_en, "encoders.d_en");
    require_positive(encoder_dims.l_max, "encoders.l_max");
    if (diffusion_steps < 2) fail(ErrorKind::Config, "diffusion.steps must be at least 2");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max < 1.0)) {
        fail(ErrorKind::Config, "diffusion.sigma_min/sigma_max must satisfy 0 < sigma_min < sigma_max < 1");
    }
    require_positive(denoiser_hidden, "diffusion.hidden");
    require_positive(denoiser_time_dim, "diffusion.time_dim");
    if (denoiser_time_dim % 2 != 0) fail(ErrorKind::Config, "diffusion.time_dim must be even");
    require_positive(pretrain.steps, "pretrain.steps");
    require_positive(pretrain.batch_size, "pretrain.batch_size");
    if (!(pretrain.learning_rate > 0.0) || !std::isfinite(pretrain.learning_rate)) {
        fail(ErrorKind::Config, "pretrain.learning_rate must be positive");
    }
    train.validate();
}

Json AppConfig::to_json() const {
    Json train_json = train.to_json();
    train_json.erase("loss");
    train_json.erase("seed");
    return {{"schema_version", kSchemaVersion},
            {"seed", seed},
            {"encoders", {{"profile", profile_name}, {"d_en", encoder_dims.d_en}, {"l_max", encoder_dims.l_max}}},
            {"diffusion",
             {{"steps", diffusion_steps},
              {"sigma_min", sigma_min},
              {"sigma_max", sigma_max},
              {"hidden", denoiser_hidden},
              {"time_dim", denoiser_time_dim}}},
            {"pretrain",
             {{"steps", pretrain.steps}, {"batch_size", pretrain.batch_size}, {"learning_rate", pretrain.learning_rate}}},
            {"train", train_json},
            {"loss", train.loss.to_json()}};
}

AppConfig AppConfig::from_json(const Json& j) {
    check_keys(j, {"schema_version", "seed", "encoders", "diffusion", "pretrain", "train", "loss"}, "");
    if (!j.contains("schema_version")) fail(ErrorKind::Config, "schema_version is required");
    int version = 0;
    read_field(j, "schema_version", version, "");
    if (version != kSchemaVersion) {
        fail(ErrorKind::Config, "schema_version must be " + std::to_string(kSchemaVersion) + ", got " +
                                    std::to_string(version));
    }
    AppConfig c;
    read_field(j, "seed", c.seed, "");
    if (j.contains("encoders")) {
        const Json& e = j["encoders"];
        check_keys(e, {"profile", "d_en", "l_max"}, "encoders");
        read_field(e, "profile", c.profile_name, "encoders");
        read_field(e, "d_en", c.encoder_dims.d_en, "encoders");
        read_field(e, "l_max", c.encoder_dims.l_max, "encoders");
    }
    if (j.contains("diffusion")) {
        const Json& d = j["diffusion"];
        check_keys(d, {"steps", "sigma_min", "sigma_max", "hidden", "time_dim"}, "diffusion");
        read_field(d, "steps", c.diffusion_steps, "diffusion");
        read_field(d, "sigma_min", c.sigma_min, "diffusion");
        read_field(d, "sigma_max", c.sigma_max, "diffusion");
        read_field(d, "hidden", c.denoiser_hidden, "diffusion");
        read_field(d, "time_dim", c.denoiser_time_dim, "diffusion");
    }
    if (j.contains("pretrain")) {
        const Json& p = j["pretrain"];
        check_keys(p, {"steps", "batch_size", "learning_rate"}, "pretrain");
        read_field(p, "steps", c.pretrain.steps, "pretrain");
        read_field(p, "batch_size", c.pretrain.batch_size, "pretrain");
        read_field(p, "learning_rate", c.pretrain.learning_rate, "pretrain");
    }
    if (j.contains("train")) {
        const Json& t = j["train"];
        if (t.is_object() && t.contains("seed")) fail(ErrorKind::Config, "train.seed: use the top-level seed");
        if (t.is_object() && t.contains("loss")) fail(ErrorKind::Config, "train.loss: use the top-level loss section");
        c.train = TrainConfig::from_json(t);
    }
    if (j.contains("loss")) c.train.loss = LossConfig::from_json(j["loss"]);
    c.train.seed = c.seed;
    c.pretrain.seed = c.seed;
    c.validate();
    return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    Json j;
    try {
        j = read_json(path);
    } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("config: ") + e.what());
    }
    return from_json(j);
}

void AppConfig::override_seed(const char* value) {
    if (value == nullptr) return;
    const std::string s(value);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        if (s.empty() || s[0] == '-' || s[0] == '+') throw std::invalid_argument("sign");
        v = std::stoull(s, &used, 10);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) fail(ErrorKind::Config, "SUR_SEED must be an unsigned integer, got '" + s + "'");
    seed = v;
    train.seed = v;
    pretrain.seed = v;
}

DenoiserConfig AppConfig::denoiser_config() const {
    return DenoiserConfig{encoder_dims.image_size, encoder_dims.d_en, denoiser_hidden, denoiser_time_dim};
}

}  // namespace sur
