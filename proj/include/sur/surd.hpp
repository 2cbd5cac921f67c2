#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sur/encoders.hpp"
#include "sur/json_io.hpp"
#include "sur/tensor.hpp"

namespace sur {

struct TripletRecord {
    std::string id;
    std::string simple_prompt;
    std::string complex_prompt;
    std::string image_path;  // relative to the dataset root unless absolute
    std::optional<std::string> knowledge_path;
    std::optional<bool> retained;

    OrderedJson to_json() const;
    static TripletRecord from_json(const Json& j);
};

// A dataset directory: manifest.jsonl plus the files its records reference.
struct Dataset {
    std::filesystem::path root;
    std::vector<TripletRecord> records;

    static Dataset load(const std::filesystem::path& root);
    void save() const;

    std::filesystem::path resolve(const std::string& relative) const;
    Tensor load_image(const TripletRecord& rec) const;
    // SHA-256 of the manifest bytes as saved.
    std::string manifest_hash() const;
};

std::vector<TripletRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<TripletRecord>& records);

// Writes `n` triplets under out_dir (images/, manifest.jsonl) plus a default
// evaluation suite (suite.json).
Dataset synth_corpus(std::uint64_t seed, std::size_t n, const std::filesystem::path& out_dir);

// Cosine similarity between the prompt's pooled text encoding and the image embedding.
class SimilarityScorer {
public:
    explicit SimilarityScorer(const EncoderBundle& encoders) : encoders_(&encoders) {}

    double score(const std::string& prompt, const Tensor& image) const;
    static constexpr const char* kVariant = "raw_cosine";

private:
    const EncoderBundle* encoders_;
};

struct CleanSummary {
    std::size_t input = 0;
    std::size_t retained = 0;
    std::size_t dropped = 0;
    std::vector<std::pair<std::string, std::string>> errors;  // (record id, reason)

    Json to_json() const;
};

struct CleanResult {
    std::vector<TripletRecord> records;  // copies with `retained` set
    CleanSummary summary;
};

// Any deterministic prompt-image score; must be safe to call concurrently.
using ScoreFn = std::function<double(const std::string& prompt, const Tensor& image)>;

// retained := score(simple, image) >= score(complex, image). Unreadable images and
// ids listed in drop_ids are dropped with a recorded reason.
CleanResult clean_gate(const Dataset& data, const ScoreFn& score, const std::set<std::string>& drop_ids = {},
                       std::size_t threads = 1);
CleanResult clean_gate(const Dataset& data, const SimilarityScorer& scorer, const std::set<std::string>& drop_ids = {},
                       std::size_t threads = 1);

struct KnowledgeCache {
    std::string llm_profile;
    std::size_t layer = 0;
    std::size_t d_llm = 0;
    std::map<std::string, std::string> entries;  // record id -> file name in the cache dir

    static KnowledgeCache load(const std::filesystem::path& dir);
    Tensor vector(const std::filesystem::path& dir, const std::string& id) const;
};

// Caches pooled knowledge vectors for every record not marked retained == false.
// Record knowledge_path fields in `data` are pointed at the new files.
KnowledgeCache build_knowledge_cache(Dataset& data, const EncoderBundle& encoders, std::size_t layer,
                                     const std::filesystem::path& out_dir);

std::filesystem::path default_knowledge_dir(const std::filesystem::path& data_root, std::size_t layer);

struct CorpusStats {
    static constexpr std::size_t kLengthClamp = 300;

    std::size_t record_count = 0;
    std::map<std::size_t, std::size_t> simple_lengths;
    std::map<std::size_t, std::size_t> complex_lengths;
    std::vector<std::pair<std::string, std::size_t>> token_frequency;  // by count desc, then token

    Json to_json() const;
};

CorpusStats corpus_stats(const std::vector<TripletRecord>& records);

std::set<std::string> read_id_list(const std::filesystem::path& path);

}  // namespace sur
