#include <cmath>

#include "support.hpp"
#include "sur/adapter.hpp"
#include "sur/diffusion.hpp"
#include "sur/trainer.hpp"

namespace sur::test {

namespace {

Tensor probe(const Tensor& y, const Tensor& weights, Tape* tape) {
    const Tensor row = reshape(y, {1, y.numel()}, tape);
    return sum(matmul(row, weights, tape), tape);
}

}  // namespace

std::vector<OpCase> op_cases(std::uint64_t seed) {
    Rng rng(seed);
    auto r = [&](Shape s, double scale = 1.0) { return random_tensor(std::move(s), rng, scale, true); };
    using In = const std::vector<Tensor>&;
    std::vector<OpCase> cases;
    cases.push_back({"matmul", {r({3, 4}), r({4, 5})}, [](In x, Tape* t) { return matmul(x[0], x[1], t); }});
    cases.push_back({"transpose", {r({3, 5})}, [](In x, Tape* t) { return transpose(x[0], t); }});
    cases.push_back({"add", {r({2, 3}), r({2, 3})}, [](In x, Tape* t) { return add(x[0], x[1], t); }});
    cases.push_back({"sub", {r({2, 3}), r({2, 3})}, [](In x, Tape* t) { return sub(x[0], x[1], t); }});
    cases.push_back({"scale", {r({4})}, [](In x, Tape* t) { return scale(x[0], -1.7, t); }});
    cases.push_back({"add_row", {r({3, 4}), r({4})}, [](In x, Tape* t) { return add_row(x[0], x[1], t); }});
    cases.push_back({"tanh", {r({3, 4})}, [](In x, Tape* t) { return tanh(x[0], t); }});
    cases.push_back({"row_softmax", {r({3, 5}, 2.0)}, [](In x, Tape* t) { return row_softmax(x[0], t); }});
    cases.push_back({"kl_div", {r({6}, 2.0), r({6}, 2.0)}, [](In x, Tape* t) { return kl_div(x[0], x[1], 1.7, t); }});
    cases.push_back({"mse", {r({3, 3}), r({3, 3})}, [](In x, Tape* t) { return mse(x[0], x[1], t); }});
    cases.push_back({"mean_rows", {r({4, 3})}, [](In x, Tape* t) { return mean_rows(x[0], t); }});
    cases.push_back({"slice_rows", {r({5, 3})}, [](In x, Tape* t) { return slice_rows(x[0], 1, 3, t); }});
    cases.push_back({"concat", {r({3}), r({4})}, [](In x, Tape* t) { return concat({x[0], x[1]}, t); }});
    cases.push_back({"reshape", {r({2, 6})}, [](In x, Tape* t) { return reshape(x[0], {3, 4}, t); }});
    cases.push_back({"sum", {r({2, 3})}, [](In x, Tape* t) { return sum(x[0], t); }});
    cases.push_back({"linear", {r({3, 4}), r({4, 2}), r({2})},
                     [](In x, Tape* t) { return linear(x[0], x[1], x[2], t); }});
    return cases;
}

double op_gradient_error(const OpCase& c, double step) {
    const std::size_t n_out = c.forward(c.inputs, nullptr).numel();
    Rng rng(n_out * 7919 + c.inputs.size());
    const Tensor weights = random_tensor({n_out, 1}, rng);

    for (Tensor in : c.inputs) in.clear_grad();
    Tape tape;
    backward(probe(c.forward(c.inputs, &tape), weights, &tape), tape);

    double worst = 0.0;
    for (const auto& in : c.inputs) {
        const std::vector<double> analytic(in.grad().begin(), in.grad().end());
        const auto numeric = numeric_grad(in, [&] { return probe(c.forward(c.inputs, nullptr), weights, nullptr).item(); },
                                          step);
        worst = std::max(worst, relative_error(analytic, numeric));
    }
    return worst;
}

CompositeCheck composite_gradient_error(std::uint64_t seed, double step) {
    Rng rng(seed);
    const std::size_t d_en = 48, l_max = 16, d_llm = 80;
    LossConfig loss;
    loss.eta = 0.5;
    loss.tau = 1.3;
    loss.lambda1 = 1.0;
    loss.lambda2 = 1.0;
    AdapterState state = AdapterState::create(d_en, d_llm, seed, seed + 1, loss);
    // A nonzero output map so every adapter tensor receives gradient.
    for (auto& v : state.params.g.weight.mutable_data()) v = 0.2 * rng.normal();
    for (auto& v : state.params.g.bias.mutable_data()) v = 0.1 * rng.normal();

    DenoiserConfig dc;
    dc.hidden = 32;
    const Denoiser den = Denoiser::initialize(dc, seed + 2);
    const NoiseSchedule sched;

    TrainExample ex;
    ex.id = "toy";
    ex.image = random_tensor({8, 8}, rng);
    ex.enc_simple = random_tensor({l_max, d_en}, rng);
    ex.simple_length = 5;
    ex.enc_complex = random_tensor({l_max, d_en}, rng);
    ex.complex_length = 12;
    ex.knowledge = random_tensor({d_llm}, rng);
    const std::vector<TrainExample> batch = {ex};
    StepDraws draws{false, 17, random_tensor({8, 8}, rng)};
    const std::vector<StepDraws> all_draws = {draws};
    const TrainContext ctx{&den, &sched};

    auto params = state.params.parameters();
    for (auto& p : params) p.clear_grad();
    Tape tape;
    backward(composite_loss(state, ctx, batch, all_draws, &tape).total, tape);

    // Tensors whose gradient is far below the global gradient norm (the key bias
    // shifts every logit of a row equally, so its gradient is exactly zero) are
    // measured against a floor of 1e-3 of that norm instead of their own size.
    double global = 0.0;
    for (const auto& p : params)
        for (double g : p.grad()) global += g * g;
    const double floor = 1e-3 * std::sqrt(global);

    CompositeCheck out;
    const auto named = state.params.named();
    for (const auto& [name, t] : named) {
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        const auto numeric =
            numeric_grad(t, [&] { return composite_loss(state, ctx, batch, all_draws, nullptr).total.item(); }, step);
        const double err = relative_error(analytic, numeric, floor);
        out.checked += t.numel();
        if (err >= out.max_error) {
            out.max_error = err;
            out.worst_tensor = name;
        }
    }
    return out;
}

}  // namespace sur::test
