#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "support.hpp"
#include "sur/diffusion.hpp"
#include "sur/error.hpp"

using namespace sur;
using namespace sur::test;

TEST_CASE("schedule endpoints and identity") {
    const NoiseSchedule s(50, 0.02, 0.999);
    CHECK(s.steps() == 50);
    CHECK(s.sigma(0) == 0.02);
    CHECK(s.sigma(49) == 0.999);
    for (std::size_t t = 0; t < s.steps(); ++t) {
        CHECK(std::abs(s.alpha(t) * s.alpha(t) + s.sigma(t) * s.sigma(t) - 1.0) < 1e-12);
        if (t > 0) CHECK(s.sigma(t) > s.sigma(t - 1));
    }
    CHECK_THROWS_AS(s.sigma(50), Error);
    CHECK_THROWS_AS(NoiseSchedule(1), Error);
    CHECK_THROWS_AS(NoiseSchedule(10, 0.5, 0.2), Error);
}

TEST_CASE("forward_noise moments") {
    const NoiseSchedule s;
    Rng rng(0);
    const double x0 = 0.7;
    for (std::size_t t : {0u, 10u, 25u, 49u}) {
        const int n = 10000;
        double mean = 0, sq = 0;
        for (int i = 0; i < n; ++i) {
            const double v = forward_noise(Tensor::vector({x0}), t, Tensor::vector({rng.normal()}), s)[0];
            mean += v;
            sq += v * v;
        }
        mean /= n;
        const double sd = std::sqrt(sq / n - mean * mean);
        CHECK(std::abs(mean - s.alpha(t) * x0) < 4 * s.sigma(t) / std::sqrt(n));
        CHECK(std::abs(sd - s.sigma(t)) < 4 * s.sigma(t) / std::sqrt(2.0 * n));
    }
}

TEST_CASE("time embedding matches the sinusoid formula") {
    const Tensor e = time_embedding(7, 8);
    for (std::size_t i = 0; i < 4; ++i) {
        const double w = std::pow(10000.0, -static_cast<double>(i) / 4.0);
        CHECK(e[2 * i] == doctest::Approx(std::sin(7 * w)).epsilon(1e-15));
        CHECK(e[2 * i + 1] == doctest::Approx(std::cos(7 * w)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(time_embedding(1, 7), Error);
}

TEST_CASE("denoiser shapes and gradient through the condition") {
    const Denoiser den = Denoiser::initialize(DenoiserConfig{}, 1);
    Rng rng(2);
    const Tensor x = random_tensor({8, 8}, rng);
    Tensor cond = random_tensor({48}, rng, 1.0, true);
    CHECK(den.predict_eps(x, 3, cond).shape() == Shape{8, 8});
    CHECK_THROWS_AS(den.predict_eps(x, 3, Tensor::zeros({47})), Error);

    const NoiseSchedule s;
    const Tensor eps = random_tensor({8, 8}, rng);
    Tape tape;
    backward(simple_loss(den, x, 11, eps, cond, s, &tape), tape);
    const std::vector<double> analytic(cond.grad().begin(), cond.grad().end());
    const auto numeric = numeric_grad(cond, [&] { return simple_loss(den, x, 11, eps, cond, s).item(); });
    CHECK(relative_error(analytic, numeric) < 1e-6);
}

TEST_CASE("simple loss is the mean squared noise error") {
    const Denoiser den = Denoiser::initialize(DenoiserConfig{}, 4);
    const NoiseSchedule s;
    Rng rng(5);
    const Tensor x0 = random_tensor({8, 8}, rng), eps = random_tensor({8, 8}, rng), cond = random_tensor({48}, rng);
    const Tensor pred = den.predict_eps(forward_noise(x0, 20, eps, s), 20, cond);
    double acc = 0;
    for (std::size_t i = 0; i < 64; ++i) acc += (eps[i] - pred[i]) * (eps[i] - pred[i]);
    CHECK(simple_loss(den, x0, 20, eps, cond, s).item() == doctest::Approx(acc / 64).epsilon(1e-14));
}

TEST_CASE("ddpm_sample is a pure function of its seed") {
    const Denoiser den = Denoiser::initialize(DenoiserConfig{}, 6);
    const NoiseSchedule s(20);
    const Tensor cond = Tensor::zeros({48});
    const Tensor a = ddpm_sample(den, s, cond, 77), b = ddpm_sample(den, s, cond, 77), c = ddpm_sample(den, s, cond, 78);
    bool differ = false;
    for (std::size_t i = 0; i < 64; ++i) {
        CHECK(a[i] == b[i]);
        CHECK(std::isfinite(a[i]));
        differ = differ || a[i] != c[i];
    }
    CHECK(differ);
}

TEST_CASE("pretraining lowers the noise-prediction loss") {
    Denoiser den = Denoiser::initialize(DenoiserConfig{8, 48, 32, 16}, 0);
    const NoiseSchedule s;
    Rng rng(8);
    std::vector<PretrainExample> data;
    for (int i = 0; i < 8; ++i) {
        std::vector<double> img(64, -1.0);
        img[static_cast<std::size_t>(i)] = 1.0;
        data.push_back({Tensor(Shape{8, 8}, img), random_tensor({48}, rng)});
    }
    const auto trace = pretrain_denoiser(den, s, data, PretrainConfig{400, 8, 1e-3, 0});
    double head = 0, tail = 0;
    for (int i = 0; i < 50; ++i) head += trace[static_cast<std::size_t>(i)], tail += trace[trace.size() - 1 - i];
    CHECK(tail < head);
    for (const auto& p : den.parameters()) CHECK_FALSE(p.requires_grad());
}

TEST_CASE("checkpoint round trip, version and tamper checks") {
    TempDir dir;
    const DenoiserCheckpoint ckpt{Denoiser::initialize(DenoiserConfig{}, 3), NoiseSchedule(30, 0.05, 0.95), 3,
                                  Json{{"note", "x"}}};
    ckpt.save(dir / "a");
    const DenoiserCheckpoint back = DenoiserCheckpoint::load(dir / "a");
    back.save(dir / "b");
    CHECK(hash_tree(dir / "a") == hash_tree(dir / "b"));
    CHECK(back.schedule.steps() == 30);
    for (std::size_t t = 0; t < 30; ++t) CHECK(back.schedule.sigma(t) == ckpt.schedule.sigma(t));

    Json m = read_json(dir / "a" / "manifest.json");
    m["format_version"] = 2;
    write_json(dir / "a" / "manifest.json", m);
    try {
        DenoiserCheckpoint::load(dir / "a");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
    }

    const fs::path w = dir / "b" / "w1.tns";
    std::string bytes;
    {
        std::ifstream in(w, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    bytes[20] ^= 0x01;
    std::ofstream(w, std::ios::binary) << bytes;
    CHECK_THROWS_AS(DenoiserCheckpoint::load(dir / "b"), Error);

    std::ofstream(dir / "b" / "b1.tns", std::ios::binary) << "JUNKJUNK";
    CHECK_THROWS_AS(DenoiserCheckpoint::load(dir / "b"), Error);
}
