#include "sur/surd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sur/error.hpp"
#include "sur/hash.hpp"
#include "sur/parallel.hpp"
#include "sur/synth.hpp"
#include "sur/tns_io.hpp"

namespace sur {

// ---- records & manifests ------------------------------------------------------

OrderedJson TripletRecord::to_json() const {
    OrderedJson j;
    j["id"] = id;
    j["simple_prompt"] = simple_prompt;
    j["complex_prompt"] = complex_prompt;
    j["image_path"] = image_path;
    j["knowledge_path"] = knowledge_path ? OrderedJson(*knowledge_path) : OrderedJson(nullptr);
    j["retained"] = retained ? OrderedJson(*retained) : OrderedJson(nullptr);
    return j;
}

TripletRecord TripletRecord::from_json(const Json& j) {
    static const std::set<std::string> known = {"id",           "simple_prompt",  "complex_prompt",
                                                "image_path",   "knowledge_path", "retained"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) fail(ErrorKind::Format, "unknown manifest field '" + it.key() + "'");
    }
    TripletRecord r;
    r.id = j.at("id").get<std::string>();
    r.simple_prompt = j.at("simple_prompt").get<std::string>();
    r.complex_prompt = j.at("complex_prompt").get<std::string>();
    r.image_path = j.at("image_path").get<std::string>();
    if (j.contains("knowledge_path") && !j["knowledge_path"].is_null()) {
        r.knowledge_path = j["knowledge_path"].get<std::string>();
    }
    if (j.contains("retained") && !j["retained"].is_null()) r.retained = j["retained"].get<bool>();
    return r;
}

std::vector<TripletRecord> read_manifest(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::vector<TripletRecord> records;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(TripletRecord::from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            fail(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(records.back().id).second) {
            fail(ErrorKind::Data, path.string() + ": duplicate record id '" + records.back().id + "'");
        }
    }
    return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<TripletRecord>& records) {
    std::string text;
    for (const auto& r : records) text += r.to_json().dump() + "\n";
    write_text(path, text);
}

Dataset Dataset::load(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) fail(ErrorKind::Io, "dataset directory " + root.string() + " not found");
    return Dataset{root, read_manifest(root / "manifest.jsonl")};
}

void Dataset::save() const { write_manifest(root / "manifest.jsonl", records); }

std::filesystem::path Dataset::resolve(const std::string& relative) const {
    const std::filesystem::path p(relative);
    return p.is_absolute() ? p : root / p;
}

Tensor Dataset::load_image(const TripletRecord& rec) const { return tns::read(resolve(rec.image_path)); }

std::string Dataset::manifest_hash() const { return sha256_file(root / "manifest.jsonl"); }

// ---- synthetic corpus ---------------------------------------------------------

Dataset synth_corpus(std::uint64_t seed, std::size_t n, const std::filesystem::path& out_dir) {
    if (n == 0) fail(ErrorKind::Parameter, "synthetic corpus size must be at least 1");
    ensure_directory(out_dir / "images");
    Dataset data{out_dir, {}};
    data.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, i));
        const synth::Attributes attrs = synth::random_attributes(rng);
        TripletRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "surd-%06zu", i);
        rec.id = id;
        rec.simple_prompt = synth::simple_prompt(attrs, rng);
        rec.complex_prompt = synth::complex_prompt(rec.simple_prompt, rng);
        rec.image_path = "images/" + rec.id + ".tns";
        tns::write(out_dir / rec.image_path, synth::render(attrs, rng));
        data.records.push_back(std::move(rec));
    }
    data.save();

    Json categories = Json::object();
    for (auto& [name, prompts] : synth::suite_prompts(seed, 15)) categories[name] = prompts;
    write_json(out_dir / "suite.json", Json{{"images_per_prompt", 10}, {"categories", categories}});
    return data;
}

// ---- cleaning -----------------------------------------------------------------

double SimilarityScorer::score(const std::string& prompt, const Tensor& image) const {
    const TokenSequence seq = encoders_->tokenize(prompt);
    const Tensor text = pool_knowledge_vector(encoders_->text.encode(seq), seq.length);
    const Tensor img = encoders_->image.embed(image);
    double dot = 0.0, nt = 0.0, ni = 0.0;
    for (std::size_t i = 0; i < text.numel(); ++i) {
        dot += text[i] * img[i];
        nt += text[i] * text[i];
        ni += img[i] * img[i];
    }
    if (nt == 0.0 || ni == 0.0) return 0.0;
    return dot / (std::sqrt(nt) * std::sqrt(ni));
}

Json CleanSummary::to_json() const {
    Json errs = Json::array();
    for (const auto& [id, reason] : errors) errs.push_back({{"id", id}, {"reason", reason}});
    return {{"input", input},
            {"retained", retained},
            {"dropped", dropped},
            {"errors", errs},
            {"score_variant", SimilarityScorer::kVariant}};
}

CleanResult clean_gate(const Dataset& data, const SimilarityScorer& scorer, const std::set<std::string>& drop_ids,
                       std::size_t threads) {
    return clean_gate(
        data, [&scorer](const std::string& prompt, const Tensor& image) { return scorer.score(prompt, image); },
        drop_ids, threads);
}

CleanResult clean_gate(const Dataset& data, const ScoreFn& score, const std::set<std::string>& drop_ids,
                       std::size_t threads) {
    CleanResult result;
    result.records = data.records;
    std::vector<std::string> reasons(data.records.size());
    parallel_for(data.records.size(), threads, [&](std::size_t i) {
        auto& rec = result.records[i];
        if (drop_ids.count(rec.id)) {
            rec.retained = false;
            reasons[i] = "excluded by drop list";
            return;
        }
        try {
            const Tensor image = data.load_image(rec);
            rec.retained = score(rec.simple_prompt, image) >= score(rec.complex_prompt, image);
        } catch (const Error& e) {
            rec.retained = false;
            reasons[i] = e.what();
        }
    });
    result.summary.input = result.records.size();
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        if (*result.records[i].retained) {
            ++result.summary.retained;
        } else {
            ++result.summary.dropped;
        }
        if (!reasons[i].empty()) result.summary.errors.emplace_back(result.records[i].id, reasons[i]);
    }
    return result;
}

// ---- knowledge cache ----------------------------------------------------------

std::filesystem::path default_knowledge_dir(const std::filesystem::path& data_root, std::size_t layer) {
    return data_root / "knowledge" / ("layer" + std::to_string(layer));
}

KnowledgeCache KnowledgeCache::load(const std::filesystem::path& dir) {
    const Json m = read_json(dir / "manifest.json");
    try {
        KnowledgeCache c;
        c.llm_profile = m.at("llm_profile").get<std::string>();
        c.layer = m.at("layer").get<std::size_t>();
        c.d_llm = m.at("d_llm").get<std::size_t>();
        c.entries = m.at("entries").get<std::map<std::string, std::string>>();
        return c;
    } catch (const Json::exception& e) {
        fail(ErrorKind::Format, (dir / "manifest.json").string() + ": " + e.what());
    }
}

Tensor KnowledgeCache::vector(const std::filesystem::path& dir, const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end()) {
        fail(ErrorKind::Data, "record '" + id + "' has no cached knowledge vector for layer " + std::to_string(layer));
    }
    Tensor v = tns::read(dir / it->second);
    if (v.shape() != Shape{d_llm}) {
        fail(ErrorKind::Data, "record '" + id + "' knowledge vector has shape " + shape_string(v.shape()));
    }
    return v;
}

KnowledgeCache build_knowledge_cache(Dataset& data, const EncoderBundle& encoders, std::size_t layer,
                                     const std::filesystem::path& out_dir) {
    if (layer < 1 || layer > encoders.llm.n_layers()) {
        fail(ErrorKind::Range, "llm layer " + std::to_string(layer) + " outside 1.." +
                                   std::to_string(encoders.llm.n_layers()) + " for profile " + encoders.profile.name);
    }
    ensure_directory(out_dir);
    KnowledgeCache cache{encoders.profile.name, layer, encoders.llm.d_llm(), {}};
    const auto root = std::filesystem::weakly_canonical(data.root);
    const auto dir = std::filesystem::weakly_canonical(out_dir);
    for (auto& rec : data.records) {
        if (rec.retained.has_value() && !*rec.retained) continue;
        const std::string file = rec.id + ".tns";
        tns::write(out_dir / file, encoders.knowledge_vector(rec.simple_prompt, layer));
        cache.entries[rec.id] = file;
        const auto rel = (dir / file).lexically_relative(root);
        const bool inside = !rel.empty() && *rel.begin() != "..";
        rec.knowledge_path = inside ? rel.generic_string() : (dir / file).string();
    }
    write_json(out_dir / "manifest.json", Json{{"format_version", 1},
                                               {"llm_profile", cache.llm_profile},
                                               {"layer", layer},
                                               {"d_llm", cache.d_llm},
                                               {"encoder_seed", encoders.seed},
                                               {"entries", cache.entries}});
    return cache;
}

// ---- statistics ---------------------------------------------------------------

Json CorpusStats::to_json() const {
    const auto hist = [](const std::map<std::size_t, std::size_t>& h) {
        Json out = Json::object();
        for (const auto& [len, count] : h) out[std::to_string(len)] = count;
        return out;
    };
    Json freq = Json::array();
    for (const auto& [token, count] : token_frequency) freq.push_back({token, count});
    return {{"record_count", record_count},
            {"length_clamp", kLengthClamp},
            {"simple_length_histogram", hist(simple_lengths)},
            {"complex_length_histogram", hist(complex_lengths)},
            {"token_frequency", freq}};
}

CorpusStats corpus_stats(const std::vector<TripletRecord>& records) {
    CorpusStats stats;
    stats.record_count = records.size();
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        const auto simple = split_words(r.simple_prompt);
        const auto complex = split_words(r.complex_prompt);
        ++stats.simple_lengths[std::min(simple.size(), CorpusStats::kLengthClamp)];
        ++stats.complex_lengths[std::min(complex.size(), CorpusStats::kLengthClamp)];
        for (const auto* words : {&simple, &complex})
            for (const auto& w : *words)
                if (!is_stopword(w)) ++counts[w];
    }
    stats.token_frequency.assign(counts.begin(), counts.end());
    std::stable_sort(stats.token_frequency.begin(), stats.token_frequency.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return stats;
}

std::set<std::string> read_id_list(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::set<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        ids.insert(line.substr(b, e - b + 1));
    }
    return ids;
}

}  // namespace sur
