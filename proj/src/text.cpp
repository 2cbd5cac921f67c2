#include "sur/text.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "sur/error.hpp"

namespace sur {

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
    tokens_ = {"<unk>", "<pad>"};
    index_ = {{"<unk>", kUnk}, {"<pad>", kPad}};
    for (const auto& w : words) {
        if (w.empty()) fail(ErrorKind::Vocabulary, "empty token");
        if (index_.count(w)) fail(ErrorKind::Vocabulary, "duplicate token '" + w + "'");
        index_.emplace(w, static_cast<int>(tokens_.size()));
        tokens_.push_back(w);
    }
}

Vocabulary Vocabulary::from_corpus(const std::vector<std::string>& texts, std::size_t max_words) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts)
        for (auto& w : split_words(t)) ++counts[w];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > max_words) ranked.resize(max_words);
    std::vector<std::string> words;
    for (auto& [w, c] : ranked) {
        if (w == "<unk>" || w == "<pad>") continue;
        words.push_back(w);
    }
    return Vocabulary(words);
}

int Vocabulary::id(std::string_view word) const { return find(word).value_or(kUnk); }

std::optional<int> Vocabulary::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        fail(ErrorKind::Vocabulary, "token id " + std::to_string(id) + " outside vocabulary of size " +
                                        std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::words() const { return {tokens_.begin() + 2, tokens_.end()}; }

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
    if (max_len == 0) fail(ErrorKind::Parameter, "tokenize needs max_len >= 1");
    TokenSequence seq;
    seq.ids.assign(max_len, Vocabulary::kPad);
    const auto words = split_words(text);
    if (words.empty()) {
        seq.ids[0] = Vocabulary::kUnk;
        seq.length = 1;
        return seq;
    }
    seq.length = std::min(words.size(), max_len);
    for (std::size_t i = 0; i < seq.length; ++i) seq.ids[i] = vocab.id(words[i]);
    return seq;
}

const std::vector<std::string>& stopwords() {
    static const std::vector<std::string> list = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
        "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
        "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
        "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
        "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
        "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
        "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off",
        "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over",
        "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
        "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
        "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
        "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
        "would", "you", "your", "yours", "yourself", "yourselves", "also", "may", "might", "must",
        "shall", "upon", "via", "within", "without", "s", "t", "d", "ll", "m",
        "re", "ve", "y", "o", "yet", "ever", "every", "much", "many", "onto",
    };
    return list;
}

bool is_stopword(std::string_view word) {
    static const std::unordered_set<std::string> set(stopwords().begin(), stopwords().end());
    return set.count(std::string(word)) > 0;
}

}  // namespace sur
