#include "sur/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sur/error.hpp"
#include "sur/parallel.hpp"
#include "sur/rng.hpp"
#include "sur/synth.hpp"

namespace sur {

// ---- prompt suite -------------------------------------------------------------

const std::vector<std::string>& PromptSuite::category_names() {
    static const std::vector<std::string> names = {"Action", "Color", "Counting"};
    return names;
}

void PromptSuite::validate() const {
    const auto& names = category_names();
    if (categories.size() != names.size()) fail(ErrorKind::Data, "prompt suite must hold Action, Color and Counting");
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (categories[i].first != names[i]) {
            fail(ErrorKind::Data, "prompt suite category '" + categories[i].first + "' is not expected here");
        }
        if (categories[i].second.empty()) fail(ErrorKind::Data, "prompt suite category " + names[i] + " is empty");
        for (const auto& p : categories[i].second) {
            if (p.empty()) fail(ErrorKind::Data, "prompt suite category " + names[i] + " has an empty prompt");
        }
    }
    if (images_per_prompt == 0) fail(ErrorKind::Data, "images_per_prompt must be positive");
}

Json PromptSuite::to_json() const {
    Json cats = Json::object();
    for (const auto& [name, prompts] : categories) cats[name] = prompts;
    return {{"images_per_prompt", images_per_prompt}, {"categories", cats}};
}

PromptSuite PromptSuite::from_json(const Json& j) {
    if (!j.is_object() || !j.contains("categories")) fail(ErrorKind::Data, "prompt suite needs a categories object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "categories" && it.key() != "images_per_prompt") {
            fail(ErrorKind::Data, "unknown prompt suite key '" + it.key() + "'");
        }
    }
    PromptSuite s;
    try {
        s.images_per_prompt = j.value("images_per_prompt", kDefaultImagesPerPrompt);
        const Json& cats = j.at("categories");
        if (cats.size() != category_names().size()) {
            fail(ErrorKind::Data, "prompt suite must hold exactly Action, Color and Counting");
        }
        for (const auto& name : category_names()) {
            if (!cats.contains(name)) fail(ErrorKind::Data, "prompt suite is missing category " + name);
            s.categories.emplace_back(name, cats.at(name).get<std::vector<std::string>>());
        }
    } catch (const Json::exception& e) {
        fail(ErrorKind::Data, std::string("malformed prompt suite: ") + e.what());
    }
    s.validate();
    return s;
}

PromptSuite PromptSuite::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

PromptSuite PromptSuite::synthetic(std::uint64_t seed, std::size_t per_category) {
    PromptSuite s;
    s.categories = synth::suite_prompts(seed, per_category);
    s.validate();
    return s;
}

std::size_t PromptSuite::image_count() const {
    std::size_t n = 0;
    for (const auto& [name, prompts] : categories) n += prompts.size() * images_per_prompt;
    return n;
}

// ---- scores -------------------------------------------------------------------

std::pair<double, double> softmax_pair(double a, double b) {
    const double m = std::max(a, b);
    const double ea = std::exp(a - m), eb = std::exp(b - m);
    const double s = ea + eb;
    return {ea / s, eb / s};
}

std::pair<double, double> paired_clip_score(const SimilarityScorer& scorer, const std::string& prompt,
                                            const Tensor& image_a, const Tensor& image_b) {
    return softmax_pair(scorer.score(prompt, image_a), scorer.score(prompt, image_b));
}

double accuracy_percent(std::size_t correct, std::size_t total) {
    if (total == 0) fail(ErrorKind::EmptyInput, "accuracy over zero images");
    if (correct > total) fail(ErrorKind::Data, "more correct images than images");
    const std::uint64_t hundredths = (static_cast<std::uint64_t>(correct) * 20000 + total) / (2 * total);
    return static_cast<double>(hundredths) / 100.0;
}

std::string image_id(const std::string& model, const std::string& category, std::size_t prompt, std::size_t image) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "/%02zu/%02zu", prompt, image);
    return model + "/" + category + buf;
}

std::vector<CategoryAccuracy> semantic_accuracy(const std::map<std::string, bool>& labels, const PromptSuite& suite,
                                                const std::string& model) {
    std::vector<CategoryAccuracy> out;
    for (const auto& [category, prompts] : suite.categories) {
        CategoryAccuracy acc{category, 0, 0, 0.0, {}};
        for (std::size_t p = 0; p < prompts.size(); ++p) {
            std::size_t correct = 0;
            for (std::size_t k = 0; k < suite.images_per_prompt; ++k) {
                const std::string id = image_id(model, category, p, k);
                auto it = labels.find(id);
                if (it == labels.end()) fail(ErrorKind::Data, "no label for image " + id);
                correct += it->second ? 1 : 0;
            }
            acc.per_prompt.push_back(accuracy_percent(correct, suite.images_per_prompt));
            acc.correct += correct;
            acc.total += suite.images_per_prompt;
        }
        acc.percent = accuracy_percent(acc.correct, acc.total);
        out.push_back(std::move(acc));
    }
    return out;
}

std::map<std::string, bool> read_labels(const std::filesystem::path& path) {
    try {
        return read_json(path).get<std::map<std::string, bool>>();
    } catch (const Json::exception& e) {
        fail(ErrorKind::Data, path.string() + ": labels must map image ids to booleans (" + e.what() + ")");
    }
}

bool oracle_label(const std::string& category, const std::string& prompt, const Tensor& image) {
    const synth::ParsedPrompt want = synth::parse_prompt(prompt);
    const synth::ImageReading got = synth::read_image(image);
    if (category == "Counting") return want.count && got.components == static_cast<std::size_t>(*want.count);
    if (category == "Color") return want.color && got.color == want.color;
    if (category == "Action") return want.action && got.action == want.action;
    fail(ErrorKind::Data, "no oracle for category '" + category + "'");
}

// ---- Welch test ---------------------------------------------------------------

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) return h;
    }
    fail(ErrorKind::Numeric, "incomplete beta continued fraction did not converge");
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(std::span<const double> v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(v.size() - 1);
    return m;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) fail(ErrorKind::Statistics, "incomplete beta needs positive shape parameters");
    if (!(x >= 0.0 && x <= 1.0)) fail(ErrorKind::Statistics, "incomplete beta argument outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

WelchResult welch_ttest(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() < 2 || ys.size() < 2) fail(ErrorKind::Statistics, "Welch test needs at least two values per sample");
    for (auto v : {xs, ys})
        for (double x : v)
            if (!std::isfinite(x)) fail(ErrorKind::Statistics, "Welch test input is not finite");
    const Moments mx = moments(xs), my = moments(ys);
    if (mx.var == 0.0 || my.var == 0.0) fail(ErrorKind::Statistics, "Welch test sample has zero variance");
    const double nx = static_cast<double>(xs.size()), ny = static_cast<double>(ys.size());
    const double sx = mx.var / nx, sy = my.var / ny;
    const double se2 = sx + sy;
    WelchResult r;
    r.t = (mx.mean - my.mean) / std::sqrt(se2);
    r.df = se2 * se2 / (sx * sx / (nx - 1.0) + sy * sy / (ny - 1.0));
    r.p = incomplete_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
    r.parity = r.p > 0.05;
    return r;
}

std::vector<double> read_scores(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(line, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || line.find_first_not_of(" \t\r", used) != std::string::npos) {
            fail(ErrorKind::Data, path.string() + ":" + std::to_string(line_no) + ": not a number");
        }
        out.push_back(v);
    }
    return out;
}

// ---- end-to-end ---------------------------------------------------------------

std::uint64_t sample_seed(std::uint64_t seed, std::size_t category, std::size_t prompt, std::size_t image) {
    return mix_seed(mix_seed(mix_seed(seed, category), prompt), image);
}

Tensor prompt_condition(const EncoderBundle& encoders, const AdapterState* adapter, const std::string& prompt) {
    const Tensor enc = encoders.encode_text(prompt);
    return condition_pool(adapter ? adapter->condition_tokens(enc) : enc);
}

Json run_eval(const DenoiserCheckpoint& baseline, const AdapterState* adapter, const EncoderBundle& encoders,
              const PromptSuite& suite, const EvalOptions& options) {
    suite.validate();
    struct Job {
        std::size_t category, prompt, image;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < suite.categories.size(); ++c)
        for (std::size_t p = 0; p < suite.categories[c].second.size(); ++p)
            for (std::size_t k = 0; k < suite.images_per_prompt; ++k) jobs.push_back({c, p, k});
    const std::size_t n = jobs.size();

    // Conditions per prompt, for both models.
    std::vector<std::vector<std::pair<Tensor, Tensor>>> conds(suite.categories.size());
    for (std::size_t c = 0; c < suite.categories.size(); ++c)
        for (const auto& prompt : suite.categories[c].second)
            conds[c].emplace_back(prompt_condition(encoders, nullptr, prompt), prompt_condition(encoders, adapter, prompt));

    std::vector<Tensor> base_images(n), adapter_images(n);
    parallel_for(n, options.threads, [&](std::size_t i) {
        const Job& j = jobs[i];
        const std::uint64_t s = sample_seed(options.seed, j.category, j.prompt, j.image);
        const auto& [cb, ca] = conds[j.category][j.prompt];
        base_images[i] = ddpm_sample(baseline.denoiser, baseline.schedule, cb, s);
        adapter_images[i] = ddpm_sample(baseline.denoiser, baseline.schedule, ca, s);
    });

    const SimilarityScorer scorer(encoders);
    double clip_base = 0.0, clip_adapter = 0.0;
    std::map<std::string, bool> labels;
    const bool oracle = !options.labels.has_value();
    if (!oracle) labels = read_labels(*options.labels);
    for (std::size_t i = 0; i < n; ++i) {
        const Job& j = jobs[i];
        const auto& [category, prompts] = suite.categories[j.category];
        const std::string& prompt = prompts[j.prompt];
        const auto [pb, pa] = paired_clip_score(scorer, prompt, base_images[i], adapter_images[i]);
        clip_base += pb;
        clip_adapter += pa;
        if (oracle) {
            labels[image_id("baseline", category, j.prompt, j.image)] = oracle_label(category, prompt, base_images[i]);
            labels[image_id("adapter", category, j.prompt, j.image)] = oracle_label(category, prompt, adapter_images[i]);
        }
    }

    Json accuracy = Json::object();
    for (const char* model : {"baseline", "adapter"}) {
        Json per = Json::object();
        for (const auto& a : semantic_accuracy(labels, suite, model)) {
            per[a.category] = {{"percent", a.percent}, {"correct", a.correct}, {"total", a.total}, {"per_prompt", a.per_prompt}};
        }
        accuracy[model] = per;
    }

    Json quality = Json::object();
    for (const auto& [metric, path] : options.quality_scores) {
        const std::vector<double> scores = read_scores(path);
        if (scores.size() != 2 * n) {
            fail(ErrorKind::Data, "quality scores for " + metric + ": expected " + std::to_string(2 * n) +
                                      " values (baseline images, then adapter images), got " +
                                      std::to_string(scores.size()));
        }
        const std::span<const double> all(scores);
        const auto xs = all.first(n), ys = all.subspan(n);
        const WelchResult w = welch_ttest(xs, ys);
        double mb = 0.0, ma = 0.0;
        for (std::size_t i = 0; i < n; ++i) mb += xs[i], ma += ys[i];
        quality[metric] = {{"t", w.t},
                           {"df", w.df},
                           {"p", w.p},
                           {"parity", w.parity},
                           {"baseline_mean", mb / static_cast<double>(n)},
                           {"adapter_mean", ma / static_cast<double>(n)}};
    }

    Json provenance = options.provenance;
    provenance["seed"] = options.seed;
    provenance["adapter_present"] = adapter != nullptr;

    Json prompts = Json::object();
    for (const auto& [category, list] : suite.categories) prompts[category] = list.size();

    return {{"format_version", 1},
            {"metadata",
             {{"clip_score_average", "mean over all generated images"},
              {"clip_score_variant", SimilarityScorer::kVariant},
              {"images_per_prompt", suite.images_per_prompt},
              {"prompts_per_category", prompts},
              {"image_count_per_model", n},
              {"label_source", oracle ? "renderer-attribute oracle" : "label file"},
              {"ttest", "Welch, two-sided, parity when p > 0.05"}}},
            {"provenance", provenance},
            {"accuracy", accuracy},
            {"clip_score", {{"baseline", clip_base / static_cast<double>(n)}, {"adapter", clip_adapter / static_cast<double>(n)}}},
            {"quality", quality}};
}

}  // namespace sur
