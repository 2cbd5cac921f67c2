#include "sur/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sur/error.hpp"
#include "sur/hash.hpp"
#include "sur/weights.hpp"

namespace sur {

// ---- config -------------------------------------------------------------------

void TrainConfig::validate() const {
    if (steps == 0) fail(ErrorKind::Config, "train.steps must be positive");
    if (batch_size == 0) fail(ErrorKind::Config, "train.batch_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorKind::Config, "train.learning_rate must be a finite non-negative number");
    }
    if (log_every == 0) fail(ErrorKind::Config, "train.log_every must be positive");
    if (optimizer != "sgd" && optimizer != "adam") fail(ErrorKind::Config, "train.optimizer must be sgd or adam");
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
        fail(ErrorKind::Config, "train.flip_probability must lie in [0, 1]");
    }
    loss.validate();
}

Json TrainConfig::to_json() const {
    return {{"steps", steps},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"loss", loss.to_json()},
            {"llm_layer", llm_layer},
            {"checkpoint_every", checkpoint_every},
            {"log_every", log_every},
            {"optimizer", optimizer},
            {"flip_probability", flip_probability}};
}

TrainConfig TrainConfig::from_json(const Json& j) {
    check_keys(j,
               {"steps", "batch_size", "learning_rate", "seed", "loss", "llm_layer", "checkpoint_every", "log_every",
                "optimizer", "flip_probability"},
               "train");
    TrainConfig c;
    read_field(j, "steps", c.steps, "train");
    read_field(j, "batch_size", c.batch_size, "train");
    read_field(j, "learning_rate", c.learning_rate, "train");
    read_field(j, "seed", c.seed, "train");
    if (j.contains("loss")) c.loss = LossConfig::from_json(j["loss"]);
    read_field(j, "llm_layer", c.llm_layer, "train");
    read_field(j, "checkpoint_every", c.checkpoint_every, "train");
    read_field(j, "log_every", c.log_every, "train");
    read_field(j, "optimizer", c.optimizer, "train");
    read_field(j, "flip_probability", c.flip_probability, "train");
    c.validate();
    return c;
}

// ---- log ----------------------------------------------------------------------

OrderedJson TrainRecord::to_json() const {
    OrderedJson j;
    j["step"] = step;
    j["l_llm"] = l_llm;
    j["l_cp"] = l_cp;
    j["l_simple"] = l_simple;
    j["l_total"] = l_total;
    j["grad_norm"] = grad_norm;
    return j;
}

TrainRecord TrainRecord::from_json(const Json& j) {
    return TrainRecord{j.at("step").get<std::size_t>(), j.at("l_llm").get<double>(),   j.at("l_cp").get<double>(),
                       j.at("l_simple").get<double>(),  j.at("l_total").get<double>(), j.at("grad_norm").get<double>()};
}

std::vector<TrainRecord> read_train_log(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::vector<TrainRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(TrainRecord::from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            fail(ErrorKind::Format, path.string() + ": " + e.what());
        }
    }
    return out;
}

// ---- one step -----------------------------------------------------------------

Tensor flip_horizontal(const Tensor& image) {
    if (image.rank() != 2) fail(ErrorKind::Dimension, "flip expects a 2-D image, got " + shape_string(image.shape()));
    const std::size_t rows = image.dim(0), cols = image.dim(1);
    std::vector<double> out(image.numel());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = image[r * cols + (cols - 1 - c)];
    return Tensor(image.shape(), std::move(out));
}

StepDraws draw_step(Rng& rng, const NoiseSchedule& sched, std::size_t image_size, double flip_probability) {
    StepDraws d;
    d.flip = rng.bernoulli(flip_probability);
    d.t = rng.uniform_index(sched.steps());
    std::vector<double> eps(image_size * image_size);
    for (auto& e : eps) e = rng.normal();
    d.eps = Tensor(Shape{image_size, image_size}, std::move(eps));
    return d;
}

CompositeLoss composite_loss(const AdapterState& state, const TrainContext& ctx,
                             std::span<const TrainExample> batch, std::span<const StepDraws> draws, Tape* tape) {
    if (batch.empty()) fail(ErrorKind::EmptyInput, "training batch is empty");
    if (draws.size() != batch.size()) fail(ErrorKind::Contract, "one set of draws is needed per batch record");
    const LossConfig& cfg = state.loss;
    Tape* llm_tape = cfg.enable_llm ? tape : nullptr;
    Tape* cp_tape = cfg.enable_cp ? tape : nullptr;

    Tensor sum_llm, sum_cp, sum_simple;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const TrainExample& ex = batch[i];
        if (!ex.knowledge) fail(ErrorKind::Data, "record '" + ex.id + "' has no cached knowledge vector");
        const StepDraws& d = draws[i];
        const Tensor image = d.flip ? flip_horizontal(ex.image) : ex.image;

        const AdapterOutput out = adapter_forward(state.params, ex.enc_simple, tape);
        const Tensor c_prime = blend_condition(out.c_llm, ex.enc_simple, cfg.eta, tape);
        const Tensor cond = condition_pool(c_prime, tape);
        const Tensor l_simple = simple_loss(*ctx.denoiser, image, d.t, d.eps, cond, *ctx.schedule, tape);
        const Tensor l_llm = loss_llm(out.q, *ex.knowledge, state.projection, ex.simple_length, cfg.tau, llm_tape);
        const Tensor l_cp = loss_cp(c_prime, ex.enc_complex, ex.simple_length, ex.complex_length, cfg.tau, cp_tape);
        if (i == 0) {
            sum_llm = l_llm, sum_cp = l_cp, sum_simple = l_simple;
        } else {
            sum_llm = add(sum_llm, l_llm, llm_tape);
            sum_cp = add(sum_cp, l_cp, cp_tape);
            sum_simple = add(sum_simple, l_simple, tape);
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    CompositeLoss result;
    result.parts = LossParts{scale(sum_llm, inv, llm_tape), scale(sum_cp, inv, cp_tape), scale(sum_simple, inv, tape)};
    result.total = total_loss(result.parts, cfg, tape);
    return result;
}

TrainRecord train_step(AdapterState& state, const TrainContext& ctx, std::span<const TrainExample> batch, Rng& rng,
                       Optimizer& optimizer, double flip_probability) {
    if (batch.empty()) fail(ErrorKind::EmptyInput, "training batch is empty");
    for (const auto& ex : batch) {
        if (!ex.knowledge) fail(ErrorKind::Data, "record '" + ex.id + "' has no cached knowledge vector");
    }
    std::vector<Tensor> params = state.params.parameters();
    for (auto& p : params) p.clear_grad();

    const std::size_t image_size = ctx.denoiser->config().image_size;
    std::vector<StepDraws> draws;
    draws.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) draws.push_back(draw_step(rng, *ctx.schedule, image_size, flip_probability));

    Tape tape;
    const CompositeLoss loss = composite_loss(state, ctx, batch, draws, &tape);
    backward(loss.total, tape);
    const double norm = grad_norm(params);
    optimizer.step(params);
    ++state.step;
    return TrainRecord{state.step,
                       loss.parts.l_llm.item(),
                       loss.parts.l_cp.item(),
                       loss.parts.l_simple.item(),
                       loss.total.item(),
                       norm};
}

// ---- full run -----------------------------------------------------------------

std::size_t resolve_layer(std::size_t requested, const LlmProfile& profile) {
    const std::size_t layer = requested == 0 ? profile.n_layers : requested;
    if (layer > profile.n_layers) {
        fail(ErrorKind::Range, "llm layer " + std::to_string(layer) + " outside 1.." +
                                   std::to_string(profile.n_layers) + " for profile " + profile.name);
    }
    return layer;
}

std::vector<TrainExample> prepare_examples(const Dataset& data, const EncoderBundle& encoders,
                                           const std::filesystem::path& knowledge_dir, std::size_t layer) {
    if (!std::filesystem::exists(knowledge_dir / "manifest.json")) {
        fail(ErrorKind::Data, "no knowledge cache at " + knowledge_dir.string() + " (run embed --layer " +
                                  std::to_string(layer) + ")");
    }
    const KnowledgeCache cache = KnowledgeCache::load(knowledge_dir);
    if (cache.layer != layer || cache.llm_profile != encoders.profile.name) {
        fail(ErrorKind::Data, "knowledge cache at " + knowledge_dir.string() + " holds " + cache.llm_profile +
                                  " layer " + std::to_string(cache.layer) + ", expected " + encoders.profile.name +
                                  " layer " + std::to_string(layer));
    }
    std::vector<TrainExample> out;
    for (const auto& rec : data.records) {
        if (rec.retained.has_value() && !*rec.retained) continue;
        TrainExample ex;
        ex.id = rec.id;
        ex.image = data.load_image(rec);
        const TokenSequence simple = encoders.tokenize(rec.simple_prompt);
        const TokenSequence complex = encoders.tokenize(rec.complex_prompt);
        ex.enc_simple = encoders.text.encode(simple);
        ex.simple_length = simple.length;
        ex.enc_complex = encoders.text.encode(complex);
        ex.complex_length = complex.length;
        ex.knowledge = cache.vector(knowledge_dir, rec.id);
        out.push_back(std::move(ex));
    }
    return out;
}

namespace {

std::string manifest_digest(const std::vector<TripletRecord>& records) {
    std::string text;
    for (const auto& r : records) text += r.to_json().dump() + "\n";
    return sha256_hex(text);
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const Dataset& data, const EncoderBundle& encoders,
                         const DenoiserCheckpoint& denoiser, const std::filesystem::path& knowledge_dir,
                         const std::filesystem::path& out_dir) {
    cfg.validate();
    const std::size_t layer = resolve_layer(cfg.llm_layer, encoders.profile);
    if (data.records.empty()) fail(ErrorKind::Data, "dataset " + data.root.string() + " has no records");
    const std::vector<TrainExample> examples = prepare_examples(data, encoders, knowledge_dir, layer);
    if (examples.empty()) fail(ErrorKind::Data, "dataset " + data.root.string() + " has no retained records");
    if (denoiser.denoiser.config().d_cond != encoders.dims.d_en) {
        fail(ErrorKind::Dimension, "denoiser condition width does not match the text encoder");
    }
    ensure_directory(out_dir);

    Json config = cfg.to_json();
    config["llm_layer"] = layer;
    write_json(out_dir / "config.json", config);

    AdapterState state =
        AdapterState::create(encoders.dims.d_en, encoders.profile.d_llm, cfg.seed, cfg.seed, cfg.loss);
    state.metadata = {{"llm_profile", encoders.profile.name},
                      {"llm_layer", layer},
                      {"dataset_manifest_sha256", manifest_digest(data.records)},
                      {"train", config}};
    state.save(out_dir / "adapter-init");

    const TrainContext ctx{&denoiser.denoiser, &denoiser.schedule};
    auto optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate);
    Rng rng(mix_seed(cfg.seed, fnv1a("train")));

    std::ofstream log(out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) fail(ErrorKind::Io, "cannot write " + (out_dir / "train_log.jsonl").string());

    TrainResult result{state, {}};
    std::vector<TrainExample> batch(cfg.batch_size);
    for (std::size_t s = 1; s <= cfg.steps; ++s) {
        for (auto& slot : batch) slot = examples[rng.uniform_index(examples.size())];
        const TrainRecord rec = train_step(result.state, ctx, batch, rng, *optimizer, cfg.flip_probability);
        if (s % cfg.log_every == 0 || s == cfg.steps) {
            log << rec.to_json().dump() << '\n';
            result.log.push_back(rec);
        }
        if (cfg.checkpoint_every != 0 && s % cfg.checkpoint_every == 0) {
            result.state.save(out_dir / "checkpoints" / ("step-" + std::to_string(s)));
        }
    }
    log.flush();
    if (!log) fail(ErrorKind::Io, "write failed for " + (out_dir / "train_log.jsonl").string());
    result.state.save(out_dir / "adapter");
    return result;
}

}  // namespace sur
