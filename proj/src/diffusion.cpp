#include "sur/diffusion.hpp"

#include <cmath>

#include "sur/error.hpp"
#include "sur/optim.hpp"
#include "sur/rng.hpp"

namespace sur {

NoiseSchedule::NoiseSchedule(std::size_t steps, double sigma_min, double sigma_max) {
    if (steps < 2) fail(ErrorKind::Config, "noise schedule needs at least 2 steps");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max < 1.0)) {
        fail(ErrorKind::Config, "noise schedule needs 0 < sigma_min < sigma_max < 1");
    }
    sigma_.resize(steps);
    alpha_.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double frac = static_cast<double>(t) / static_cast<double>(steps - 1);
        sigma_[t] = sigma_min * (1.0 - frac) + sigma_max * frac;
        alpha_[t] = std::sqrt(1.0 - sigma_[t] * sigma_[t]);
    }
}

double NoiseSchedule::sigma(std::size_t t) const {
    if (t >= steps()) fail(ErrorKind::Range, "step " + std::to_string(t) + " outside 0.." + std::to_string(steps() - 1));
    return sigma_[t];
}

double NoiseSchedule::alpha(std::size_t t) const {
    if (t >= steps()) fail(ErrorKind::Range, "step " + std::to_string(t) + " outside 0.." + std::to_string(steps() - 1));
    return alpha_[t];
}

Tensor forward_noise(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    if (x0.shape() != eps.shape()) {
        fail(ErrorKind::Dimension, "forward_noise shape mismatch: " + shape_string(x0.shape()) + " vs " +
                                       shape_string(eps.shape()));
    }
    const double a = sched.alpha(t), s = sched.sigma(t);
    std::vector<double> out(x0.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + s * eps[i];
    return Tensor(x0.shape(), std::move(out));
}

Tensor condition_pool(const Tensor& cond_tokens, Tape* tape) { return mean_rows(cond_tokens, tape); }

Tensor time_embedding(std::size_t t, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) fail(ErrorKind::Config, "time embedding dimension must be even and positive");
    const std::size_t half = dim / 2;
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        out[2 * i] = std::sin(static_cast<double>(t) * freq);
        out[2 * i + 1] = std::cos(static_cast<double>(t) * freq);
    }
    return Tensor::vector(std::move(out));
}

// ---- denoiser -----------------------------------------------------------------

namespace {

const Tensor& find_weight(const NamedTensors& weights, const std::string& name) {
    for (const auto& [n, t] : weights) {
        if (n == name) return t;
    }
    fail(ErrorKind::Format, "denoiser weight '" + name + "' missing");
}

void expect_shape(const Tensor& t, const Shape& shape, const char* name) {
    if (t.shape() != shape) {
        fail(ErrorKind::Dimension, std::string("denoiser weight ") + name + " has shape " + shape_string(t.shape()) +
                                       ", expected " + shape_string(shape));
    }
}

}  // namespace

Denoiser::Denoiser(DenoiserConfig config, NamedTensors weights)
    : config_(config),
      w1_(find_weight(weights, "w1")),
      b1_(find_weight(weights, "b1")),
      w2_(find_weight(weights, "w2")),
      b2_(find_weight(weights, "b2")),
      w3_(find_weight(weights, "w3")),
      b3_(find_weight(weights, "b3")) {
    const std::size_t pixels = config_.image_size * config_.image_size;
    const std::size_t in = pixels + config_.time_dim + config_.d_cond;
    expect_shape(w1_, {in, config_.hidden}, "w1");
    expect_shape(b1_, {config_.hidden}, "b1");
    expect_shape(w2_, {config_.hidden, config_.hidden}, "w2");
    expect_shape(b2_, {config_.hidden}, "b2");
    expect_shape(w3_, {config_.hidden, pixels}, "w3");
    expect_shape(b3_, {pixels}, "b3");
}

Denoiser Denoiser::initialize(DenoiserConfig config, std::uint64_t seed) {
    const std::size_t pixels = config.image_size * config.image_size;
    const std::size_t in = pixels + config.time_dim + config.d_cond;
    const auto inv = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
    return Denoiser(config, {
                                {"w1", seeded_normal({in, config.hidden}, inv(in), seed, "denoiser_w1")},
                                {"b1", Tensor::zeros({config.hidden})},
                                {"w2", seeded_normal({config.hidden, config.hidden}, inv(config.hidden), seed, "denoiser_w2")},
                                {"b2", Tensor::zeros({config.hidden})},
                                {"w3", seeded_normal({config.hidden, pixels}, inv(config.hidden), seed, "denoiser_w3")},
                                {"b3", Tensor::zeros({pixels})},
                            });
}

Tensor Denoiser::predict_eps(const Tensor& xt, std::size_t t, const Tensor& cond, Tape* tape) const {
    const std::size_t pixels = config_.image_size * config_.image_size;
    if (xt.numel() != pixels || xt.rank() != 2) {
        fail(ErrorKind::Dimension, "denoiser input " + shape_string(xt.shape()) + " does not match image size " +
                                       std::to_string(config_.image_size));
    }
    if (cond.shape() != Shape{config_.d_cond}) {
        fail(ErrorKind::Dimension, "condition " + shape_string(cond.shape()) + " does not match d_cond " +
                                       std::to_string(config_.d_cond));
    }
    const Tensor input = concat({reshape(xt, {pixels}, tape), time_embedding(t, config_.time_dim), cond}, tape);
    const Tensor row = reshape(input, {1, input.numel()}, tape);
    const Tensor h1 = tanh(linear(row, w1_, b1_, tape), tape);
    const Tensor h2 = tanh(linear(h1, w2_, b2_, tape), tape);
    return reshape(linear(h2, w3_, b3_, tape), xt.shape(), tape);
}

NamedTensors Denoiser::weights() const {
    return {{"w1", w1_}, {"b1", b1_}, {"w2", w2_}, {"b2", b2_}, {"w3", w3_}, {"b3", b3_}};
}

std::vector<Tensor> Denoiser::parameters() const { return {w1_, b1_, w2_, b2_, w3_, b3_}; }

void Denoiser::set_trainable(bool on) {
    for (Tensor* t : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}) t->set_requires_grad(on);
}

Tensor simple_loss(const Denoiser& den, const Tensor& x0, std::size_t t, const Tensor& eps, const Tensor& cond,
                   const NoiseSchedule& sched, Tape* tape) {
    const Tensor xt = forward_noise(x0, t, eps, sched);
    return mse(eps, den.predict_eps(xt, t, cond, tape), tape);
}

Tensor ddpm_sample(const Denoiser& den, const NoiseSchedule& sched, const Tensor& cond, std::uint64_t seed) {
    const std::size_t side = den.config().image_size;
    const std::size_t n = side * side;
    Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    for (std::size_t t = sched.steps() - 1;; --t) {
        const Tensor eps_hat = den.predict_eps(Tensor(Shape{side, side}, x), t, cond);
        const double a_t = sched.alpha(t), s_t = sched.sigma(t);
        if (t == 0) {
            for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - s_t * eps_hat[i]) / a_t;
            break;
        }
        const double a_s = sched.alpha(t - 1), s_s = sched.sigma(t - 1);
        const double a_ts = a_t / a_s;
        const double var_ts = s_t * s_t - a_ts * a_ts * s_s * s_s;
        const double coef_x = a_ts * s_s * s_s / (s_t * s_t);
        const double coef_x0 = a_s * var_ts / (s_t * s_t);
        const double stddev = std::sqrt(var_ts * s_s * s_s / (s_t * s_t));
        for (std::size_t i = 0; i < n; ++i) {
            const double x0_hat = (x[i] - s_t * eps_hat[i]) / a_t;
            x[i] = coef_x * x[i] + coef_x0 * x0_hat + stddev * rng.normal();
        }
    }
    return Tensor(Shape{side, side}, std::move(x));
}

std::vector<double> pretrain_denoiser(Denoiser& den, const NoiseSchedule& sched,
                                      std::span<const PretrainExample> data, const PretrainConfig& config) {
    if (data.empty()) fail(ErrorKind::Data, "denoiser pretraining needs at least one example");
    if (config.batch_size == 0) fail(ErrorKind::Config, "batch_size must be positive");
    den.set_trainable(true);
    auto params = den.parameters();
    Adam opt(config.learning_rate);
    Rng rng(mix_seed(config.seed, fnv1a("denoiser_pretrain")));
    std::vector<double> trace;
    trace.reserve(config.steps);
    const std::size_t side = den.config().image_size;
    for (std::size_t step = 0; step < config.steps; ++step) {
        Tape tape;
        Tensor total = Tensor::scalar(0.0);
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const auto& ex = data[rng.uniform_index(data.size())];
            const std::size_t t = rng.uniform_index(sched.steps());
            std::vector<double> eps(side * side);
            for (double& v : eps) v = rng.normal();
            const Tensor loss = simple_loss(den, ex.image, t, Tensor(Shape{side, side}, std::move(eps)), ex.cond, sched, &tape);
            total = add(total, loss, &tape);
        }
        const Tensor mean = scale(total, 1.0 / static_cast<double>(config.batch_size), &tape);
        for (auto& p : params) p.zero_grad();
        tape.backward(mean);
        opt.step(params);
        trace.push_back(mean.item());
    }
    for (auto& p : params) p.clear_grad();
    den.set_trainable(false);
    return trace;
}

// ---- checkpoint ---------------------------------------------------------------

void DenoiserCheckpoint::save(const std::filesystem::path& dir) const {
    const Json files = write_weight_files(dir, denoiser.weights());
    const auto& c = denoiser.config();
    Json manifest = {
        {"format_version", kFormatVersion},
        {"kind", "denoiser"},
        {"T", schedule.steps()},
        {"sigma_min", schedule.sigma_min()},
        {"sigma_max", schedule.sigma_max()},
        {"image_size", c.image_size},
        {"d_cond", c.d_cond},
        {"hidden", c.hidden},
        {"time_dim", c.time_dim},
        {"seed", seed},
        {"info", info},
        {"files", files},
    };
    write_json(dir / "manifest.json", manifest);
}

DenoiserCheckpoint DenoiserCheckpoint::load(const std::filesystem::path& dir) {
    const Json m = read_json(dir / "manifest.json");
    check_format_version(m, kFormatVersion, (dir / "manifest.json").string());
    try {
        DenoiserConfig c{m.at("image_size").get<std::size_t>(), m.at("d_cond").get<std::size_t>(),
                         m.at("hidden").get<std::size_t>(), m.at("time_dim").get<std::size_t>()};
        NamedTensors weights;
        for (const char* name : {"w1", "b1", "w2", "b2", "w3", "b3"}) {
            weights.emplace_back(name, read_weight_file(dir, m.at("files"), name));
        }
        return DenoiserCheckpoint{
            Denoiser(c, std::move(weights)),
            NoiseSchedule(m.at("T").get<std::size_t>(), m.at("sigma_min").get<double>(), m.at("sigma_max").get<double>()),
            m.at("seed").get<std::uint64_t>(), m.value("info", Json::object())};
    } catch (const Json::exception& e) {
        fail(ErrorKind::Format, (dir / "manifest.json").string() + ": " + e.what());
    }
}

}  // namespace sur
