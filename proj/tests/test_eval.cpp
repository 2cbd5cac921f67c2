#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "support.hpp"
#include "sur/error.hpp"
#include "sur/eval.hpp"
#include "sur/synth.hpp"

using namespace sur;
using namespace sur::test;

namespace {

PromptSuite suite_of(std::size_t prompts, std::size_t images) {
    PromptSuite s;
    for (const auto& name : PromptSuite::category_names()) {
        std::vector<std::string> list;
        for (std::size_t i = 0; i < prompts; ++i) list.push_back("one red cat " + std::to_string(i));
        s.categories.emplace_back(name, list);
    }
    s.images_per_prompt = images;
    return s;
}

// The first `correct` images of the category, in prompt-major order, are labelled true.
void label(std::map<std::string, bool>& labels, const PromptSuite& s, const std::string& category, std::size_t correct) {
    std::size_t seen = 0;
    const auto& prompts = std::find_if(s.categories.begin(), s.categories.end(),
                                       [&](const auto& c) { return c.first == category; })->second;
    for (std::size_t p = 0; p < prompts.size(); ++p)
        for (std::size_t k = 0; k < s.images_per_prompt; ++k) labels[image_id("m", category, p, k)] = seen++ < correct;
}

std::vector<double> normals(Rng& rng, std::size_t n, double mean, double sd) {
    std::vector<double> v(n);
    for (auto& x : v) x = mean + sd * rng.normal();
    return v;
}

}  // namespace

TEST_CASE("paired softmax") {
    const auto [a, b] = softmax_pair(1.0, 0.0);
    CHECK(a == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-15));
    CHECK(b == doctest::Approx(1.0 / (std::exp(1.0) + 1.0)).epsilon(1e-15));
    CHECK(softmax_pair(0.3, 0.3) == std::pair{0.5, 0.5});
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.normal() * 3, y = rng.normal() * 3;
        const auto p = softmax_pair(x, y), q = softmax_pair(y, x);
        CHECK(std::abs(p.first + p.second - 1.0) < 1e-12);
        CHECK(p.first == q.second);
        CHECK(p.second == q.first);
    }
}

TEST_CASE("accuracy percentages with two-decimal rounding") {
    CHECK(accuracy_percent(82, 130) == 63.08);
    CHECK(accuracy_percent(11, 130) == 8.46);
    CHECK(accuracy_percent(0, 130) == 0.00);
    CHECK(accuracy_percent(1, 8) == 12.5);
    CHECK(accuracy_percent(1, 3) == 33.33);
    CHECK(accuracy_percent(2, 3) == 66.67);
    CHECK_THROWS_AS(accuracy_percent(0, 0), Error);
}

TEST_CASE("semantic accuracy tallies a 13-prompt suite") {
    const PromptSuite s = suite_of(13, 10);
    std::map<std::string, bool> labels;
    label(labels, s, "Action", 0);
    label(labels, s, "Color", 11);
    label(labels, s, "Counting", 82);
    const auto acc = semantic_accuracy(labels, s, "m");
    REQUIRE(acc.size() == 3);
    CHECK(acc[0].percent == 0.00);
    CHECK(acc[1].percent == 8.46);
    CHECK(acc[2].percent == 63.08);
    CHECK(acc[2].total == 130);
    CHECK(acc[2].per_prompt[0] == 100.0);
    CHECK(acc[2].per_prompt[8] == 20.0);

    labels.erase(image_id("m", "Color", 4, 7));
    try {
        semantic_accuracy(labels, s, "m");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
        CHECK(std::string(e.what()).find("m/Color/04/07") != std::string::npos);
    }
}

TEST_CASE("welch test against the textbook oracle") {
    Rng rng(0);
    const auto xs = normals(rng, 30, 0.0, 1.0), ys = normals(rng, 30, 0.4, 1.7);
    const WelchResult w = welch_ttest(xs, ys);
    const WelchOracle o = welch_oracle(xs, ys);
    CHECK(std::abs(w.t - static_cast<double>(o.t)) < 1e-9);
    CHECK(std::abs(w.df - static_cast<double>(o.df)) < 1e-9);
    CHECK(std::abs(w.p - static_cast<double>(o.p)) < 1e-9);
    CHECK(w.parity == (o.p > 0.05));

    const WelchResult r = welch_ttest(ys, xs);
    CHECK(r.t == -w.t);
    CHECK(r.p == doctest::Approx(w.p).epsilon(1e-14));

    const std::vector<double> a = {1, 2, 3};
    const WelchResult same = welch_ttest(a, a);
    CHECK(same.t == 0.0);
    CHECK(same.p == 1.0);
    CHECK(same.parity);
}

TEST_CASE("welch test on a hand-worked example") {
    // means 2 and 5, variances 1 and 4, n = 3: t = -3 / sqrt(5/3), df = (5/3)^2 / ((1/9 + 16/9) / 2).
    const std::vector<double> xs = {1, 2, 3}, ys = {3, 5, 7};
    const WelchResult w = welch_ttest(xs, ys);
    CHECK(w.t == doctest::Approx(-3.0 / std::sqrt(5.0 / 3.0)).epsilon(1e-14));
    CHECK(w.df == doctest::Approx((25.0 / 9.0) / (17.0 / 18.0)).epsilon(1e-14));
    CHECK(std::abs(w.p - static_cast<double>(welch_oracle(xs, ys).p)) < 1e-12);
}

TEST_CASE("welch test preconditions") {
    const std::vector<double> flat0 = {0, 0, 0, 0}, flat1 = {1, 1, 1, 1}, one = {1}, ok = {1, 2};
    for (const auto& [x, y] : {std::pair{flat0, flat1}, std::pair{one, ok}, std::pair{ok, std::vector<double>{1, NAN}}}) {
        try {
            welch_ttest(x, y);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Statistics);
        }
    }
}

TEST_CASE("incomplete beta agrees with Boost") {
    Rng rng(7);
    for (int i = 0; i < 300; ++i) {
        const double a = 0.1 + rng.uniform() * 40, b = 0.1 + rng.uniform() * 40, x = rng.uniform();
        CAPTURE(a);
        CAPTURE(b);
        CAPTURE(x);
        CHECK(std::abs(incomplete_beta(a, b, x) - incomplete_beta_oracle(a, b, x)) < 1e-12);
    }
    CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
}

TEST_CASE("prompt suite validation") {
    CHECK_NOTHROW(PromptSuite::synthetic(0).validate());
    CHECK(PromptSuite::synthetic(0).image_count() == 450);
    PromptSuite s = suite_of(2, 3);
    std::swap(s.categories[0], s.categories[1]);
    CHECK_THROWS_AS(s.validate(), Error);
    CHECK_THROWS_AS(PromptSuite::from_json(Json{{"categories", {{"Action", {"x"}}}}}), Error);
    const PromptSuite t = suite_of(2, 3);
    CHECK(PromptSuite::from_json(t.to_json()).to_json() == t.to_json());
}

TEST_CASE("oracle labels read the probed attribute") {
    Rng rng(1);
    const synth::Attributes attrs{3, 2, 1, 0};
    const Tensor img = synth::render(attrs, rng);
    CHECK(oracle_label("Counting", "three blue cats", img));
    CHECK_FALSE(oracle_label("Counting", "two blue cats", img));
    CHECK(oracle_label("Color", "three " + synth::color_words()[2] + " cats", img));
}

TEST_CASE("a baseline compared with itself scores one half everywhere") {
    const EncoderBundle enc = EncoderBundle::generate(0, llm_profile("7b-toy"), Vocabulary(synth::lexicon()));
    const DenoiserCheckpoint ckpt{Denoiser::initialize(DenoiserConfig{}, 0), NoiseSchedule(10), 0, Json::object()};
    const PromptSuite s = suite_of(2, 2);
    TempDir dir;
    {
        std::ofstream q(dir / "q.txt");
        for (int i = 0; i < 24; ++i) q << (i % 5) * 0.1 + (i < 12 ? 0.0 : 0.01) << "\n";
    }
    EvalOptions opts;
    opts.threads = 2;
    opts.quality_scores = {{"brisque", dir / "q.txt"}};
    const Json report = run_eval(ckpt, nullptr, enc, s, opts);
    CHECK(report["clip_score"]["baseline"].get<double>() == 0.5);
    CHECK(report["clip_score"]["adapter"].get<double>() == 0.5);
    CHECK(report["accuracy"]["baseline"] == report["accuracy"]["adapter"]);
    CHECK(report["quality"]["brisque"]["parity"].get<bool>());
    CHECK(report["metadata"]["image_count_per_model"] == 12);

    // Same options give the same report.
    CHECK(run_eval(ckpt, nullptr, enc, s, opts) == report);

    std::ofstream(dir / "short.txt") << "1\n2\n";
    opts.quality_scores = {{"brisque", dir / "short.txt"}};
    CHECK_THROWS_AS(run_eval(ckpt, nullptr, enc, s, opts), Error);
}
