#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sur {

// Lowercases and splits on whitespace and ASCII punctuation. Bytes >= 0x80 are
// kept as word characters so UTF-8 words survive intact.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
public:
    static constexpr int kUnk = 0;
    static constexpr int kPad = 1;
    static constexpr std::size_t kDefaultMaxWords = 512;

    // `words` excludes the reserved tokens; duplicates are a vocabulary error.
    explicit Vocabulary(const std::vector<std::string>& words);

    // Most frequent words first (ties broken lexicographically), capped at max_words.
    static Vocabulary from_corpus(const std::vector<std::string>& texts, std::size_t max_words = kDefaultMaxWords);

    int id(std::string_view word) const;
    std::optional<int> find(std::string_view word) const;
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }
    // All tokens in id order, reserved ones first.
    const std::vector<std::string>& tokens() const { return tokens_; }
    // Stored words without the reserved tokens.
    std::vector<std::string> words() const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
    std::vector<int> ids;    // exactly max_len entries, padded with <pad>
    std::size_t length = 0;  // number of leading non-pad tokens, >= 1
};

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

// 150-word English stopword list used by the corpus frequency report.
const std::vector<std::string>& stopwords();
bool is_stopword(std::string_view word);

}  // namespace sur
