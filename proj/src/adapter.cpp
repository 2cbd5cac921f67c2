#include "sur/adapter.hpp"

#include <cmath>

#include "sur/error.hpp"

namespace sur {

namespace {

Affine kaiming_affine(std::size_t d, std::uint64_t seed, const std::string& name) {
    return Affine{kaiming_normal({d, d}, d, seed, "adapter_" + name + "_weight"), Tensor::zeros({d})};
}

Affine copy_affine(const Affine& a) { return Affine{a.weight.clone(), a.bias.clone()}; }

Tensor pool_prefix(const Tensor& x, std::size_t length, Tape* tape) {
    if (length == 0) fail(ErrorKind::EmptyInput, "pooling over zero tokens");
    return mean_rows(slice_rows(x, 0, length, tape), tape);
}

}  // namespace

AdapterParams AdapterParams::initialize(std::size_t d_en, std::uint64_t seed) {
    AdapterParams p{kaiming_affine(d_en, seed, "h1"), kaiming_affine(d_en, seed, "h2"), kaiming_affine(d_en, seed, "h3"),
                    Affine{Tensor::zeros({d_en, d_en}), Tensor::zeros({d_en})}};
    for (auto& t : p.parameters()) t.set_requires_grad(true);
    return p;
}

std::vector<Tensor> AdapterParams::parameters() const {
    return {g.weight, g.bias, h1.weight, h1.bias, h2.weight, h2.bias, h3.weight, h3.bias};
}

NamedTensors AdapterParams::named() const {
    return {{"g_weight", g.weight},   {"g_bias", g.bias},   {"h1_weight", h1.weight}, {"h1_bias", h1.bias},
            {"h2_weight", h2.weight}, {"h2_bias", h2.bias}, {"h3_weight", h3.weight}, {"h3_bias", h3.bias}};
}

AdapterParams AdapterParams::snapshot() const {
    return AdapterParams{copy_affine(h1), copy_affine(h2), copy_affine(h3), copy_affine(g)};
}

FixedProjection FixedProjection::generate(std::size_t d_en, std::size_t d_llm, std::uint64_t seed) {
    return FixedProjection{kaiming_normal({d_en, d_llm}, d_llm, seed, "adapter_w0")};
}

Tensor FixedProjection::project(const Tensor& knowledge, Tape* tape) const {
    if (knowledge.shape() != Shape{w0.dim(1)}) {
        fail(ErrorKind::Dimension, "knowledge vector " + shape_string(knowledge.shape()) + " does not match W0 " +
                                       shape_string(w0.shape()));
    }
    const Tensor column = reshape(knowledge, {w0.dim(1), 1}, tape);
    return reshape(matmul(w0, column, tape), {w0.dim(0)}, tape);
}

// ---- loss config --------------------------------------------------------------

void LossConfig::validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) fail(ErrorKind::Config, "loss.eta must lie in [0, 1]");
    if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::Config, "loss.tau must be positive");
    if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) fail(ErrorKind::Config, "loss.lambda1 must lie in [0, 1]");
    if (!(lambda2 >= 0.0 && lambda2 <= 1.0)) fail(ErrorKind::Config, "loss.lambda2 must lie in [0, 1]");
}

Json LossConfig::to_json() const {
    return {{"eta", eta},       {"tau", tau},
            {"lambda1", lambda1}, {"lambda2", lambda2},
            {"enable_llm", enable_llm}, {"enable_cp", enable_cp}};
}

LossConfig LossConfig::from_json(const Json& j) {
    check_keys(j, {"eta", "tau", "lambda1", "lambda2", "enable_llm", "enable_cp"}, "loss");
    LossConfig c;
    read_field(j, "eta", c.eta, "loss");
    read_field(j, "tau", c.tau, "loss");
    read_field(j, "lambda1", c.lambda1, "loss");
    read_field(j, "lambda2", c.lambda2, "loss");
    read_field(j, "enable_llm", c.enable_llm, "loss");
    read_field(j, "enable_cp", c.enable_cp, "loss");
    c.validate();
    return c;
}

// ---- forward & losses ---------------------------------------------------------

AdapterOutput adapter_forward(const AdapterParams& params, const Tensor& enc, Tape* tape) {
    const std::size_t d = params.d_en();
    if (enc.rank() != 2 || enc.dim(1) != d) {
        fail(ErrorKind::Dimension, "adapter input " + shape_string(enc.shape()) + " does not match d_en " +
                                       std::to_string(d));
    }
    const Tensor q = params.h3.apply(enc, tape);
    const Tensor k = params.h2.apply(enc, tape);
    const Tensor& v = enc;
    const Tensor scores = scale(matmul(q, transpose(k, tape), tape), 1.0 / std::sqrt(static_cast<double>(d)), tape);
    const Tensor att = row_softmax(scores, tape);
    const Tensor v_prime = matmul(att, v, tape);
    const Tensor residual = add(v_prime, v, tape);
    const Tensor mixed = add(residual, params.h1.apply(residual, tape), tape);
    return AdapterOutput{params.g.apply(mixed, tape), q, att};
}

Tensor blend_condition(const Tensor& c_llm, const Tensor& enc, double eta, Tape* tape) {
    if (!(eta >= 0.0 && eta <= 1.0)) fail(ErrorKind::Config, "eta must lie in [0, 1], got " + std::to_string(eta));
    if (c_llm.shape() != enc.shape()) {
        fail(ErrorKind::Dimension, "blend shape mismatch: " + shape_string(c_llm.shape()) + " vs " +
                                       shape_string(enc.shape()));
    }
    return add(scale(c_llm, eta, tape), scale(enc, 1.0 - eta, tape), tape);
}

Tensor loss_llm(const Tensor& q, const Tensor& knowledge, const FixedProjection& proj, std::size_t true_length,
                double tau, Tape* tape) {
    if (q.rank() != 2 || q.dim(1) != proj.w0.dim(0)) {
        fail(ErrorKind::Dimension, "Q " + shape_string(q.shape()) + " does not match W0 " + shape_string(proj.w0.shape()));
    }
    const Tensor teacher = proj.project(knowledge, tape);
    const Tensor student = pool_prefix(q, true_length, tape);
    return kl_div(teacher, student, tau, tape);
}

Tensor loss_cp(const Tensor& c_prime, const Tensor& enc_complex, std::size_t simple_length,
               std::size_t complex_length, double tau, Tape* tape) {
    if (c_prime.rank() != 2 || enc_complex.rank() != 2 || c_prime.dim(1) != enc_complex.dim(1)) {
        fail(ErrorKind::Dimension, "loss_cp operands disagree: " + shape_string(c_prime.shape()) + " vs " +
                                       shape_string(enc_complex.shape()));
    }
    const Tensor teacher = pool_prefix(enc_complex, complex_length, tape);
    const Tensor student = pool_prefix(c_prime, simple_length, tape);
    return kl_div(teacher, student, tau, tape);
}

Tensor total_loss(const LossParts& parts, const LossConfig& cfg, Tape* tape) {
    Tensor total = parts.l_simple;
    if (cfg.enable_llm) total = add(scale(parts.l_llm, cfg.lambda1, tape), total, tape);
    if (cfg.enable_cp) total = add(total, scale(parts.l_cp, cfg.lambda2, tape), tape);
    return total;
}

// ---- state --------------------------------------------------------------------

AdapterState AdapterState::create(std::size_t d_en, std::size_t d_llm, std::uint64_t init_seed,
                                  std::uint64_t projection_seed, LossConfig loss) {
    loss.validate();
    return AdapterState{AdapterParams::initialize(d_en, init_seed),
                        FixedProjection::generate(d_en, d_llm, projection_seed),
                        loss,
                        init_seed,
                        projection_seed,
                        0,
                        Json::object()};
}

Tensor AdapterState::condition_tokens(const Tensor& enc) const {
    const AdapterOutput out = adapter_forward(params, enc);
    return blend_condition(out.c_llm, enc, loss.eta);
}

void AdapterState::save(const std::filesystem::path& dir) const {
    NamedTensors all = params.named();
    all.emplace_back("w0", projection.w0);
    const Json files = write_weight_files(dir, all);
    Json manifest = {
        {"format_version", kFormatVersion},
        {"kind", "adapter"},
        {"d_en", d_en()},
        {"d_llm", d_llm()},
        {"init_seed", init_seed},
        {"projection_seed", projection_seed},
        {"loss", loss.to_json()},
        {"step", step},
        {"metadata", metadata},
        {"files", files},
    };
    write_json(dir / "manifest.json", manifest);
}

AdapterState AdapterState::load(const std::filesystem::path& dir) {
    const Json m = read_json(dir / "manifest.json");
    check_format_version(m, kFormatVersion, (dir / "manifest.json").string());
    try {
        const Json& files = m.at("files");
        auto w = [&](const char* name) { return read_weight_file(dir, files, name); };
        AdapterParams params{Affine{w("h1_weight"), w("h1_bias")}, Affine{w("h2_weight"), w("h2_bias")},
                             Affine{w("h3_weight"), w("h3_bias")}, Affine{w("g_weight"), w("g_bias")}};
        for (auto& t : params.parameters()) t.set_requires_grad(true);
        AdapterState s{std::move(params),
                       FixedProjection{w("w0")},
                       LossConfig::from_json(m.at("loss")),
                       m.at("init_seed").get<std::uint64_t>(),
                       m.at("projection_seed").get<std::uint64_t>(),
                       m.at("step").get<std::size_t>(),
                       m.value("metadata", Json::object())};
        const std::size_t d = m.at("d_en").get<std::size_t>();
        for (const auto& [name, t] : s.params.named()) {
            const bool is_bias = name.ends_with("_bias");
            if (t.shape() != (is_bias ? Shape{d} : Shape{d, d})) {
                fail(ErrorKind::Format, dir.string() + ": " + name + " has shape " + shape_string(t.shape()));
            }
        }
        if (s.projection.w0.shape() != Shape{d, m.at("d_llm").get<std::size_t>()}) {
            fail(ErrorKind::Format, dir.string() + ": w0 shape disagrees with manifest");
        }
        return s;
    } catch (const Json::exception& e) {
        fail(ErrorKind::Format, (dir / "manifest.json").string() + ": " + e.what());
    }
}

}  // namespace sur
