#include "sur/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "sur/text.hpp"

namespace sur::synth {

namespace {

constexpr std::size_t kGlyphRow = 7;
constexpr std::array<std::pair<std::size_t, std::size_t>, 6> kSlots = {{
    {0, 0}, {0, 3}, {0, 6}, {3, 0}, {3, 3}, {3, 6},
}};

const std::vector<std::string>& prefixes() {
    static const std::vector<std::string> v = {"", "a photo of ", "a picture of ", "an image of "};
    return v;
}

const std::vector<std::string>& scenes() {
    static const std::vector<std::string> v = {
        "", "in a sunny park", "on a wooden table", "near the old bridge",
        "under a cloudy sky", "by the quiet lake", "in a small room",
    };
    return v;
}

template <typename T>
std::optional<int> index_of(const std::vector<T>& list, const std::string& word) {
    auto it = std::find(list.begin(), list.end(), word);
    if (it == list.end()) return std::nullopt;
    return static_cast<int>(it - list.begin());
}

std::string plural(const std::string& noun) { return noun + "s"; }

}  // namespace

const std::vector<std::string>& count_words() {
    static const std::vector<std::string> v = {"one", "two", "three", "four"};
    return v;
}

const std::vector<std::string>& color_words() {
    static const std::vector<std::string> v = {"red", "green", "blue"};
    return v;
}

const std::vector<double>& color_levels() {
    static const std::vector<double> v = {1.0, 0.5, 0.0};
    return v;
}

const std::vector<std::string>& action_words() {
    static const std::vector<std::string> v = {"standing", "running", "jumping", "sleeping"};
    return v;
}

const std::vector<std::string>& object_words() {
    static const std::vector<std::string> v = {"blob", "balloon", "cat", "dog", "pie", "apple", "bird", "car"};
    return v;
}

const std::vector<std::string>& quality_keywords() {
    static const std::vector<std::string> v = {
        "8k uhd",          "ultra detailed",   "photorealistic",  "highly detailed", "sharp focus",
        "cinematic lighting", "raw photo",     "film grain",      "dslr",            "high resolution",
        "intricate details",  "award winning", "vivid colors",    "soft lighting",   "trending on artstation",
        "extremely detailed wallpaper",
    };
    return v;
}

Attributes random_attributes(Rng& rng) {
    Attributes a;
    a.count = static_cast<int>(rng.uniform_index(count_words().size())) + 1;
    a.color = static_cast<int>(rng.uniform_index(color_words().size()));
    a.action = static_cast<int>(rng.uniform_index(action_words().size()));
    a.object = static_cast<int>(rng.uniform_index(object_words().size()));
    return a;
}

std::string simple_prompt(const Attributes& attrs, Rng& rng) {
    const auto& noun = object_words()[static_cast<std::size_t>(attrs.object)];
    std::string text = prefixes()[rng.uniform_index(prefixes().size())];
    text += count_words()[static_cast<std::size_t>(attrs.count - 1)] + " ";
    text += color_words()[static_cast<std::size_t>(attrs.color)] + " ";
    text += (attrs.count == 1 ? noun : plural(noun)) + " ";
    text += action_words()[static_cast<std::size_t>(attrs.action)];
    const auto& scene = scenes()[rng.uniform_index(scenes().size())];
    if (!scene.empty()) text += " " + scene;
    return text;
}

std::string complex_prompt(const std::string& simple, Rng& rng) {
    std::vector<std::string> pool = quality_keywords();
    const std::size_t k = 4 + rng.uniform_index(8);
    std::string text = "masterpiece, best quality, " + simple;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
        text += ", " + pool[i];
    }
    return text;
}

ParsedPrompt parse_prompt(std::string_view prompt) {
    ParsedPrompt out;
    for (const auto& w : split_words(prompt)) {
        if (!out.count) {
            if (auto c = index_of(count_words(), w)) out.count = *c + 1;
        }
        if (!out.color) out.color = index_of(color_words(), w);
        if (!out.action) out.action = index_of(action_words(), w);
    }
    return out;
}

Tensor render(const Attributes& attrs, Rng& rng) {
    std::vector<double> px(kImageSize * kImageSize, kBackground);
    std::array<std::size_t, kSlots.size()> order{0, 1, 2, 3, 4, 5};
    for (std::size_t i = 0; i < static_cast<std::size_t>(attrs.count); ++i) {
        const std::size_t j = i + rng.uniform_index(order.size() - i);
        std::swap(order[i], order[j]);
        const auto [r, c] = kSlots[order[i]];
        const double level = color_levels()[static_cast<std::size_t>(attrs.color)];
        for (std::size_t dr = 0; dr < 2; ++dr)
            for (std::size_t dc = 0; dc < 2; ++dc) px[(r + dr) * kImageSize + c + dc] = level;
    }
    const std::size_t glyph = 2 * (static_cast<std::size_t>(attrs.action) + 1);
    for (std::size_t c = 0; c < glyph; ++c) px[kGlyphRow * kImageSize + c] = 1.0;
    return Tensor(Shape{kImageSize, kImageSize}, std::move(px));
}

ImageReading read_image(const Tensor& image) {
    ImageReading out;
    const std::size_t n = kImageSize;
    if (image.shape() != Shape{n, n}) return out;
    const auto lit = [&](std::size_t r, std::size_t c) { return image[r * n + c] > kThreshold; };

    // 8-connected components above threshold in the blob area (rows above the glyph).
    std::vector<bool> seen(n * n, false);
    double level_sum = 0.0;
    std::size_t level_count = 0;
    for (std::size_t r = 0; r < kGlyphRow; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (!lit(r, c) || seen[r * n + c]) continue;
            ++out.components;
            std::vector<std::pair<std::size_t, std::size_t>> stack = {{r, c}};
            seen[r * n + c] = true;
            while (!stack.empty()) {
                const auto [cr, cc] = stack.back();
                stack.pop_back();
                level_sum += image[cr * n + cc];
                ++level_count;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const auto nr = static_cast<std::ptrdiff_t>(cr) + dr;
                        const auto nc = static_cast<std::ptrdiff_t>(cc) + dc;
                        if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(kGlyphRow) ||
                            nc >= static_cast<std::ptrdiff_t>(n))
                            continue;
                        const auto ur = static_cast<std::size_t>(nr), uc = static_cast<std::size_t>(nc);
                        if (lit(ur, uc) && !seen[ur * n + uc]) {
                            seen[ur * n + uc] = true;
                            stack.emplace_back(ur, uc);
                        }
                    }
            }
        }
    }
    if (level_count > 0) {
        const double mean = level_sum / static_cast<double>(level_count);
        int best = 0;
        for (std::size_t i = 1; i < color_levels().size(); ++i) {
            if (std::abs(mean - color_levels()[i]) < std::abs(mean - color_levels()[static_cast<std::size_t>(best)])) {
                best = static_cast<int>(i);
            }
        }
        out.color = best;
    }
    std::size_t glyph = 0;
    for (std::size_t c = 0; c < n; ++c) glyph += lit(kGlyphRow, c) ? 1 : 0;
    if (glyph > 0) {
        const long nearest = std::lround(static_cast<double>(glyph) / 2.0) - 1;
        out.action = static_cast<int>(std::clamp<long>(nearest, 0, static_cast<long>(action_words().size()) - 1));
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<std::string>>> suite_prompts(std::uint64_t seed,
                                                                          std::size_t per_category) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    const std::vector<std::string> categories = {"Action", "Color", "Counting"};
    for (std::size_t c = 0; c < categories.size(); ++c) {
        Rng rng(mix_seed(seed, 1000 + c));
        std::vector<std::string> prompts;
        for (std::size_t i = 0; i < per_category; ++i) {
            Attributes a = random_attributes(rng);
            // Cycle the probed attribute so every value appears in its category.
            if (c == 0) a.action = static_cast<int>(i % action_words().size());
            if (c == 1) a.color = static_cast<int>(i % color_words().size());
            if (c == 2) a.count = static_cast<int>(i % count_words().size()) + 1;
            prompts.push_back(simple_prompt(a, rng));
        }
        out.emplace_back(categories[c], std::move(prompts));
    }
    return out;
}

std::vector<std::string> lexicon() {
    std::set<std::string> words;
    const auto add = [&](const std::string& text) {
        for (auto& w : split_words(text)) words.insert(w);
    };
    for (const auto& list : {prefixes(), scenes(), count_words(), color_words(), action_words(), quality_keywords()})
        for (const auto& s : list) add(s);
    for (const auto& o : object_words()) {
        add(o);
        add(plural(o));
    }
    add("masterpiece, best quality");
    return {words.begin(), words.end()};
}

}  // namespace sur::synth
