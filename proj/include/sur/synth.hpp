#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sur/rng.hpp"
#include "sur/tensor.hpp"

// Attribute grammar and procedural renderer behind the synthetic corpus.
//
// Image layout (8x8, background -1): up to six 2x2 blob slots in rows 0-4
// separated by one-pixel gutters, and an action glyph in row 7 whose lit
// length is 2 * (action + 1).
namespace sur::synth {

inline constexpr std::size_t kImageSize = 8;
inline constexpr double kBackground = -1.0;
inline constexpr double kThreshold = -0.5;

const std::vector<std::string>& count_words();   // "one".."four" -> 1..4 blobs
const std::vector<std::string>& color_words();   // red, green, blue
const std::vector<double>& color_levels();       // pixel intensity per color
const std::vector<std::string>& action_words();  // standing, running, jumping, sleeping
const std::vector<std::string>& object_words();  // singular nouns
const std::vector<std::string>& quality_keywords();

struct Attributes {
    int count = 1;  // 1..4
    int color = 0;
    int action = 0;
    int object = 0;
};

Attributes random_attributes(Rng& rng);

std::string simple_prompt(const Attributes& attrs, Rng& rng);
std::string complex_prompt(const std::string& simple, Rng& rng);

// Recovers the attributes named in a prompt; fields absent from the text are nullopt.
struct ParsedPrompt {
    std::optional<int> count;
    std::optional<int> color;
    std::optional<int> action;
};
ParsedPrompt parse_prompt(std::string_view prompt);

Tensor render(const Attributes& attrs, Rng& rng);

// Renderer-attribute oracle applied to any image.
struct ImageReading {
    std::size_t components = 0;
    std::optional<int> color;
    std::optional<int> action;
};
ImageReading read_image(const Tensor& image);

// Evaluation prompts per category (Action, Color, Counting), drawn from the grammar.
std::vector<std::pair<std::string, std::vector<std::string>>> suite_prompts(std::uint64_t seed,
                                                                          std::size_t per_category);

// Every word the grammar can emit, sorted.
std::vector<std::string> lexicon();

}  // namespace sur::synth
