#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sur/adapter.hpp"
#include "sur/diffusion.hpp"
#include "sur/encoders.hpp"
#include "sur/json_io.hpp"
#include "sur/surd.hpp"

namespace sur {

struct PromptSuite {
    static constexpr std::size_t kDefaultImagesPerPrompt = 10;

    // Always Action, Color, Counting in that order.
    std::vector<std::pair<std::string, std::vector<std::string>>> categories;
    std::size_t images_per_prompt = kDefaultImagesPerPrompt;

    static const std::vector<std::string>& category_names();
    void validate() const;
    Json to_json() const;
    static PromptSuite from_json(const Json& j);
    static PromptSuite load(const std::filesystem::path& path);
    static PromptSuite synthetic(std::uint64_t seed, std::size_t per_category = 15);

    std::size_t image_count() const;
};

// Softmax over two logits.
std::pair<double, double> softmax_pair(double a, double b);

std::pair<double, double> paired_clip_score(const SimilarityScorer& scorer, const std::string& prompt,
                                            const Tensor& image_a, const Tensor& image_b);

// Percentage with two decimals, rounded half up on exact integer arithmetic.
double accuracy_percent(std::size_t correct, std::size_t total);

// "{model}/{category}/{prompt:02}/{image:02}"
std::string image_id(const std::string& model, const std::string& category, std::size_t prompt, std::size_t image);

struct CategoryAccuracy {
    std::string category;
    std::size_t correct = 0;
    std::size_t total = 0;
    double percent = 0.0;
    std::vector<double> per_prompt;
};

// One label per generated image of `model`; a missing label is a data error naming the image.
std::vector<CategoryAccuracy> semantic_accuracy(const std::map<std::string, bool>& labels, const PromptSuite& suite,
                                                const std::string& model);

// Label file: JSON object {image id: bool}.
std::map<std::string, bool> read_labels(const std::filesystem::path& path);

// Renderer-attribute check of one image against its prompt's probed attribute.
bool oracle_label(const std::string& category, const std::string& prompt, const Tensor& image);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    bool parity = true;
};

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Two-sided Welch test; parity := p > 0.05.
WelchResult welch_ttest(std::span<const double> xs, std::span<const double> ys);

// One real per line.
std::vector<double> read_scores(const std::filesystem::path& path);

struct EvalOptions {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::optional<std::filesystem::path> labels;
    std::vector<std::pair<std::string, std::filesystem::path>> quality_scores;  // metric -> file
    Json provenance = Json::object();
};

// Baseline conditioning is the pooled frozen encoding; the adapter side passes the
// encoding through the adapter first. Without an adapter the baseline is compared
// with itself.
Json run_eval(const DenoiserCheckpoint& baseline, const AdapterState* adapter, const EncoderBundle& encoders,
              const PromptSuite& suite, const EvalOptions& options);

// Seed of the k-th image for a prompt; shared by both models.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t category, std::size_t prompt, std::size_t image);

// Pooled condition vector for a prompt, through the adapter when given.
Tensor prompt_condition(const EncoderBundle& encoders, const AdapterState* adapter, const std::string& prompt);

}  // namespace sur
