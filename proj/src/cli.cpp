#include "sur/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sur/config.hpp"
#include "sur/encoders.hpp"
#include "sur/error.hpp"
#include "sur/eval.hpp"
#include "sur/hash.hpp"
#include "sur/surd.hpp"
#include "sur/svg.hpp"
#include "sur/synth.hpp"
#include "sur/tns_io.hpp"
#include "sur/trainer.hpp"

namespace sur {

namespace fs = std::filesystem;

namespace {

struct Io {
    std::ostream& out;
    std::ostream& err;
};

struct Command {
    const char* name;
    const char* summary;
    std::function<int(const std::vector<std::string>&, Io)> run;
};

// Parses args with a CLI11 app. Returns an exit code when parsing ends the command.
std::optional<int> parse(CLI::App& app, const std::vector<std::string>& args, Io io) {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        io.out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        io.err << app.get_name() << ": " << e.what() << "\n";
        return kExitInvalid;
    }
    return std::nullopt;
}

void add_threads(CLI::App& app, std::size_t& threads) {
    app.add_option("--threads", threads, "Worker threads for parallel stages")->check(CLI::PositiveNumber);
}

std::string manifest_sha(const fs::path& dir) { return sha256_file(dir / "manifest.json"); }

AppConfig load_config(const std::optional<std::string>& path) {
    AppConfig cfg = path ? AppConfig::load(*path) : AppConfig{};
    cfg.override_seed(std::getenv("SUR_SEED"));
    return cfg;
}

std::vector<std::string> corpus_texts(const Dataset& data) {
    std::vector<std::string> texts;
    for (const auto& r : data.records) {
        texts.push_back(r.simple_prompt);
        texts.push_back(r.complex_prompt);
    }
    return texts;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---- subcommands --------------------------------------------------------------

int cmd_init_encoders(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Generate the frozen text encoder, LLM stand-in and image embedder", "sur init-encoders"};
    std::string out;
    std::optional<std::string> config, data, profile;
    std::optional<std::uint64_t> seed;
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--config", config, "Config JSON (encoders section and seed)");
    app.add_option("--seed", seed, "Seed (overrides config and SUR_SEED)");
    app.add_option("--profile", profile, "LLM profile: 7b-toy, 13b-toy or 33b-toy");
    app.add_option("--data", data, "Build the vocabulary from this dataset instead of the grammar lexicon");
    if (auto code = parse(app, args, io)) return *code;

    AppConfig cfg = load_config(config);
    if (seed) cfg.seed = *seed;
    if (profile) cfg.profile_name = *profile;
    cfg.validate();
    Vocabulary vocab = data ? Vocabulary::from_corpus(corpus_texts(Dataset::load(*data)))
                            : Vocabulary(synth::lexicon());
    const EncoderBundle bundle = EncoderBundle::generate(cfg.seed, llm_profile(cfg.profile_name), std::move(vocab),
                                                         cfg.encoder_dims);
    bundle.save(out);
    io.out << "encoders: profile " << bundle.profile.name << ", vocabulary " << bundle.vocab.size() << " tokens -> "
           << out << "\n";
    return kExitOk;
}

int cmd_init_denoiser(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Pretrain the baseline denoiser on a dataset, conditioned on complex prompts", "sur init-denoiser"};
    std::string data_dir, encoders_dir, out;
    std::optional<std::string> config;
    std::optional<std::size_t> steps;
    app.add_option("--data", data_dir, "Dataset directory")->required();
    app.add_option("--encoders", encoders_dir, "Encoder directory")->required();
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--config", config, "Config JSON (diffusion and pretrain sections)");
    app.add_option("--steps", steps, "Pretraining steps (overrides config)")->check(CLI::PositiveNumber);
    if (auto code = parse(app, args, io)) return *code;

    AppConfig cfg = load_config(config);
    if (steps) cfg.pretrain.steps = *steps;
    const Dataset data = Dataset::load(data_dir);
    const EncoderBundle encoders = EncoderBundle::load(encoders_dir);
    std::vector<PretrainExample> examples;
    for (const auto& r : data.records) {
        if (r.retained.has_value() && !*r.retained) continue;
        examples.push_back({data.load_image(r), condition_pool(encoders.encode_text(r.complex_prompt))});
    }
    DenoiserConfig dc = cfg.denoiser_config();
    dc.d_cond = encoders.dims.d_en;
    dc.image_size = encoders.dims.image_size;
    Denoiser den = Denoiser::initialize(dc, cfg.seed);
    const NoiseSchedule sched = cfg.schedule();
    const std::vector<double> trace = pretrain_denoiser(den, sched, examples, cfg.pretrain);
    const Json info = {{"pretrain_steps", cfg.pretrain.steps},
                       {"pretrain_batch_size", cfg.pretrain.batch_size},
                       {"pretrain_learning_rate", cfg.pretrain.learning_rate},
                       {"conditioning", "pooled encoding of the complex prompt"},
                       {"final_loss", trace.back()},
                       {"dataset_manifest_sha256", sha256_file(fs::path(data_dir) / "manifest.jsonl")},
                       {"encoders_manifest_sha256", manifest_sha(encoders_dir)}};
    DenoiserCheckpoint{den, sched, cfg.seed, info}.save(out);
    io.out << "denoiser: " << cfg.pretrain.steps << " steps, final loss " << trace.back() << " -> " << out << "\n";
    return kExitOk;
}

int cmd_synth(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Write a synthetic triplet corpus", "sur synth"};
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::string out;
    app.add_option("--seed", seed, "Seed")->required();
    app.add_option("--n", n, "Number of records")->required();
    app.add_option("--out", out, "Output directory")->required();
    if (auto code = parse(app, args, io)) return *code;
    const Dataset data = synth_corpus(seed, n, out);
    io.out << "synth: " << data.records.size() << " records -> " << out << "\n";
    return kExitOk;
}

int cmd_clean(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Apply the similarity cleaning gate to a dataset in place", "sur clean"};
    std::string data_dir, encoders_dir;
    std::optional<std::string> drop_ids;
    std::size_t threads = 1;
    app.add_option("--data", data_dir, "Dataset directory")->required();
    app.add_option("--encoders", encoders_dir, "Encoder directory")->required();
    app.add_option("--drop-ids", drop_ids, "File of record ids to exclude (one per line)");
    add_threads(app, threads);
    if (auto code = parse(app, args, io)) return *code;

    Dataset data = Dataset::load(data_dir);
    const EncoderBundle encoders = EncoderBundle::load(encoders_dir);
    const SimilarityScorer scorer(encoders);
    const std::set<std::string> drops = drop_ids ? read_id_list(*drop_ids) : std::set<std::string>{};
    CleanResult result = clean_gate(data, scorer, drops, threads);
    data.records = std::move(result.records);
    data.save();
    write_json(fs::path(data_dir) / "clean_summary.json", result.summary.to_json());
    io.out << "clean: " << result.summary.input << " in, " << result.summary.retained << " retained, "
           << result.summary.dropped << " dropped\n";
    return kExitOk;
}

int cmd_embed(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Cache pooled LLM knowledge vectors for the retained records", "sur embed"};
    std::string data_dir, encoders_dir;
    std::size_t layer = 0;
    std::optional<std::string> out;
    app.add_option("--data", data_dir, "Dataset directory")->required();
    app.add_option("--encoders", encoders_dir, "Encoder directory")->required();
    app.add_option("--layer", layer, "LLM layer (1-based)")->required();
    app.add_option("--out", out, "Cache directory (default DATA/knowledge/layerK)");
    if (auto code = parse(app, args, io)) return *code;

    Dataset data = Dataset::load(data_dir);
    const EncoderBundle encoders = EncoderBundle::load(encoders_dir);
    const fs::path dir = out ? fs::path(*out) : default_knowledge_dir(data_dir, layer);
    const KnowledgeCache cache = build_knowledge_cache(data, encoders, layer, dir);
    data.save();
    io.out << "embed: " << cache.entries.size() << " vectors (" << cache.llm_profile << " layer " << layer << ") -> "
           << dir.string() << "\n";
    return kExitOk;
}

int cmd_stats(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Prompt length histograms and token frequencies", "sur stats"};
    std::string data_dir, out;
    app.add_option("--data", data_dir, "Dataset directory")->required();
    app.add_option("--out", out, "Output JSON file")->required();
    if (auto code = parse(app, args, io)) return *code;
    const CorpusStats stats = corpus_stats(Dataset::load(data_dir).records);
    write_json(out, stats.to_json());
    io.out << "stats: " << stats.record_count << " records -> " << out << "\n";
    return kExitOk;
}

struct TrainInputs {
    std::string config, data, encoders, denoiser, out;
};

void add_train_inputs(CLI::App& app, TrainInputs& in) {
    app.add_option("--config", in.config, "Config JSON")->required();
    app.add_option("--data", in.data, "Dataset directory")->required();
    app.add_option("--encoders", in.encoders, "Encoder directory")->required();
    app.add_option("--denoiser", in.denoiser, "Denoiser checkpoint directory")->required();
    app.add_option("--out", in.out, "Output directory")->required();
}

int cmd_train(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Fine-tune the adapter with everything else frozen", "sur train"};
    TrainInputs in;
    std::optional<std::string> knowledge;
    add_train_inputs(app, in);
    app.add_option("--knowledge", knowledge, "Knowledge cache directory (default DATA/knowledge/layerK)");
    if (auto code = parse(app, args, io)) return *code;

    const AppConfig cfg = load_config(in.config);
    const Dataset data = Dataset::load(in.data);
    const EncoderBundle encoders = EncoderBundle::load(in.encoders);
    const DenoiserCheckpoint denoiser = DenoiserCheckpoint::load(in.denoiser);
    const std::size_t layer = resolve_layer(cfg.train.llm_layer, encoders.profile);
    const fs::path kdir = knowledge ? fs::path(*knowledge) : default_knowledge_dir(in.data, layer);
    const TrainResult result = run_training(cfg.train, data, encoders, denoiser, kdir, in.out);
    const TrainRecord& last = result.log.back();
    io.out << "train: " << last.step << " steps, final l_total " << last.l_total << " -> " << in.out << "\n";
    return kExitOk;
}

int cmd_sample(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Generate images for a prompt", "sur sample"};
    std::string denoiser_dir, encoders_dir, prompt, out;
    std::optional<std::string> adapter_dir;
    std::uint64_t seed = 0;
    std::size_t n = 1;
    app.add_option("--denoiser", denoiser_dir, "Denoiser checkpoint directory")->required();
    app.add_option("--encoders", encoders_dir, "Encoder directory")->required();
    app.add_option("--adapter", adapter_dir, "Adapter checkpoint directory (omit for the baseline)");
    app.add_option("--prompt", prompt, "Prompt text")->required();
    app.add_option("--seed", seed, "Seed");
    app.add_option("--n", n, "Number of images")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory")->required();
    if (auto code = parse(app, args, io)) return *code;

    const DenoiserCheckpoint ckpt = DenoiserCheckpoint::load(denoiser_dir);
    const EncoderBundle encoders = EncoderBundle::load(encoders_dir);
    std::optional<AdapterState> adapter;
    if (adapter_dir) adapter = AdapterState::load(*adapter_dir);
    const Tensor cond = prompt_condition(encoders, adapter ? &*adapter : nullptr, prompt);
    ensure_directory(out);
    Json files = Json::array();
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t s = mix_seed(seed, k);
        char name[32];
        std::snprintf(name, sizeof name, "sample-%03zu.tns", k);
        tns::write(fs::path(out) / name, ddpm_sample(ckpt.denoiser, ckpt.schedule, cond, s));
        files.push_back({{"file", name}, {"seed", s}, {"sha256", sha256_file(fs::path(out) / name)}});
    }
    write_json(fs::path(out) / "samples.json",
               Json{{"prompt", prompt},
                    {"seed", seed},
                    {"denoiser_manifest_sha256", manifest_sha(denoiser_dir)},
                    {"adapter_manifest_sha256", adapter_dir ? Json(manifest_sha(*adapter_dir)) : Json(nullptr)},
                    {"images", files}});
    io.out << "sample: " << n << " images -> " << out << "\n";
    return kExitOk;
}

int cmd_eval(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Compare the baseline with an adapter on a prompt suite", "sur eval"};
    std::string baseline_dir, adapter_arg, encoders_dir, suite_path, out;
    std::vector<std::string> quality;
    std::optional<std::string> labels;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    app.add_option("--baseline", baseline_dir, "Denoiser checkpoint directory")->required();
    app.add_option("--adapter", adapter_arg, "Adapter checkpoint directory, or 'none'")->required();
    app.add_option("--encoders", encoders_dir, "Encoder directory")->required();
    app.add_option("--suite", suite_path, "Prompt suite JSON")->required();
    app.add_option("--quality-scores", quality, "METRIC=FILE, one score per line (baseline images, then adapter)");
    app.add_option("--labels", labels, "Label JSON {image id: bool} (default: renderer-attribute oracle)");
    app.add_option("--seed", seed, "Sampling seed");
    app.add_option("--out", out, "Report JSON path; an SVG summary is written beside it")->required();
    add_threads(app, threads);
    if (auto code = parse(app, args, io)) return *code;

    EvalOptions opt;
    opt.seed = seed;
    opt.threads = threads;
    if (labels) opt.labels = fs::path(*labels);
    for (const auto& q : quality) {
        const auto eq = q.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == q.size()) {
            fail(ErrorKind::Config, "--quality-scores expects METRIC=FILE, got '" + q + "'");
        }
        opt.quality_scores.emplace_back(q.substr(0, eq), q.substr(eq + 1));
    }
    const DenoiserCheckpoint baseline = DenoiserCheckpoint::load(baseline_dir);
    const EncoderBundle encoders = EncoderBundle::load(encoders_dir);
    const PromptSuite suite = PromptSuite::load(suite_path);
    std::optional<AdapterState> adapter;
    if (adapter_arg != "none") adapter = AdapterState::load(adapter_arg);
    opt.provenance = {{"baseline_manifest_sha256", manifest_sha(baseline_dir)},
                      {"adapter_manifest_sha256", adapter ? Json(manifest_sha(adapter_arg)) : Json(nullptr)},
                      {"encoders_manifest_sha256", manifest_sha(encoders_dir)},
                      {"suite_sha256", sha256_file(suite_path)}};
    const Json report = run_eval(baseline, adapter ? &*adapter : nullptr, encoders, suite, opt);
    const fs::path out_path(out);
    if (out_path.has_parent_path()) ensure_directory(out_path.parent_path());
    write_json(out_path, report);
    fs::path svg_path = out_path;
    svg_path.replace_extension(".svg");
    write_text(svg_path, report_svg(report));
    io.out << "eval: clip baseline " << report["clip_score"]["baseline"].get<double>() << ", adapter "
           << report["clip_score"]["adapter"].get<double>() << " -> " << out << "\n";
    return kExitOk;
}

int cmd_report(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Render a training log (.jsonl) or an evaluation report (.json) as SVG", "sur report"};
    std::string in, out;
    app.add_option("--in", in, "train_log.jsonl or report.json")->required();
    app.add_option("--out", out, "SVG path")->required();
    if (auto code = parse(app, args, io)) return *code;
    const bool is_log = fs::path(in).extension() == ".jsonl";
    write_text(out, is_log ? loss_curve_svg(read_train_log(in)) : report_svg(read_json(in)));
    io.out << "report: " << out << "\n";
    return kExitOk;
}

struct AblationRun {
    std::string name;
    std::string kind;
    bool enable_llm;
    bool enable_cp;
    std::size_t layer;
};

std::pair<bool, bool> parse_flags(const std::string& spec) {
    std::map<std::string, bool> flags = {{"llm", true}, {"cp", true}};
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        const std::string key = item.substr(0, eq);
        const std::string value = eq == std::string::npos ? "" : item.substr(eq + 1);
        if (!flags.count(key) || (value != "on" && value != "off")) {
            fail(ErrorKind::Config, "--flags expects llm=on|off,cp=on|off, got '" + spec + "'");
        }
        flags[key] = value == "on";
    }
    return {flags["llm"], flags["cp"]};
}

std::string flag_name(bool llm, bool cp) {
    return std::string("llm=") + (llm ? "on" : "off") + ",cp=" + (cp ? "on" : "off");
}

int cmd_ablate(const std::vector<std::string>& args, Io io) {
    CLI::App app{"Run the loss-term ablation and the LLM layer sweep", "sur ablate"};
    TrainInputs in;
    std::optional<std::string> flags;
    std::optional<std::size_t> steps;
    std::vector<std::size_t> layers;
    add_train_inputs(app, in);
    app.add_option("--flags", flags, "Run a single configuration, e.g. llm=off,cp=off");
    app.add_option("--steps", steps, "Training steps per run (overrides config)")->check(CLI::PositiveNumber);
    app.add_option("--layers", layers, "Layers for the sweep (default: 1, middle, last)")->delimiter(',');
    if (auto code = parse(app, args, io)) return *code;

    AppConfig cfg = load_config(in.config);
    if (steps) cfg.train.steps = *steps;
    cfg.validate();
    const Dataset data = Dataset::load(in.data);
    const EncoderBundle encoders = EncoderBundle::load(in.encoders);
    const DenoiserCheckpoint denoiser = DenoiserCheckpoint::load(in.denoiser);
    const std::size_t n_layers = encoders.profile.n_layers;
    const std::size_t base_layer = resolve_layer(cfg.train.llm_layer, encoders.profile);

    std::vector<AblationRun> runs;
    if (flags) {
        const auto [llm, cp] = parse_flags(*flags);
        runs.push_back({flag_name(llm, cp), "flags", llm, cp, base_layer});
    } else {
        for (const auto& [llm, cp] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
            runs.push_back({flag_name(llm, cp), "flags", llm, cp, base_layer});
        }
        if (layers.empty()) layers = {1, std::max<std::size_t>(1, n_layers / 2), n_layers};
        for (std::size_t layer : layers) {
            if (layer == 0) fail(ErrorKind::Config, "--layers entries must be at least 1");
            resolve_layer(layer, encoders.profile);
            runs.push_back({"layer=" + std::to_string(layer), "layer", true, true, layer});
        }
    }

    const fs::path out(in.out);
    ensure_directory(out);
    std::map<std::size_t, fs::path> caches;
    Json results = Json::array();
    for (const auto& run : runs) {
        if (!caches.count(run.layer)) {
            Dataset copy = data;
            const fs::path dir = out / "knowledge" / ("layer" + std::to_string(run.layer));
            build_knowledge_cache(copy, encoders, run.layer, dir);
            caches[run.layer] = dir;
        }
        TrainConfig tc = cfg.train;
        tc.llm_layer = run.layer;
        tc.loss.enable_llm = run.enable_llm;
        tc.loss.enable_cp = run.enable_cp;
        const fs::path run_dir = out / "runs" / (run.kind == "flags" ? "llm-" + std::string(run.enable_llm ? "on" : "off") +
                                                                           "_cp-" + (run.enable_cp ? "on" : "off")
                                                                     : "layer-" + std::to_string(run.layer));
        const TrainResult result = run_training(tc, data, encoders, denoiser, caches[run.layer], run_dir);
        std::vector<double> totals;
        for (const auto& r : result.log) totals.push_back(r.l_total);
        const std::size_t window = std::min<std::size_t>(100, totals.size());
        const std::vector<double> head(totals.begin(), totals.begin() + static_cast<std::ptrdiff_t>(window));
        const std::vector<double> tail(totals.end() - static_cast<std::ptrdiff_t>(window), totals.end());
        bool total_equals_simple = true;
        for (const auto& r : result.log) total_equals_simple = total_equals_simple && r.l_total == r.l_simple;
        results.push_back({{"name", run.name},
                           {"kind", run.kind},
                           {"enable_llm", run.enable_llm},
                           {"enable_cp", run.enable_cp},
                           {"llm_layer", run.layer},
                           {"directory", fs::relative(run_dir, out).generic_string()},
                           {"steps", tc.steps},
                           {"final", result.log.back().to_json()},
                           {"median_l_total_first", median(head)},
                           {"median_l_total_last", median(tail)},
                           {"l_total_equals_l_simple", total_equals_simple},
                           {"train_log_sha256", sha256_file(run_dir / "train_log.jsonl")}});
        io.out << "ablate: " << run.name << " done (final l_total " << result.log.back().l_total << ")\n";
    }
    Json base = cfg.to_json();
    write_json(out / "ablation.json", Json{{"llm_profile", encoders.profile.name},
                                           {"llm_layers", n_layers},
                                           {"config", base},
                                           {"runs", results}});
    return kExitOk;
}

const std::vector<Command>& commands() {
    static const std::vector<Command> list = {
        {"init-encoders", "generate frozen encoders", cmd_init_encoders},
        {"init-denoiser", "pretrain the baseline denoiser", cmd_init_denoiser},
        {"synth", "write a synthetic corpus", cmd_synth},
        {"clean", "apply the cleaning gate", cmd_clean},
        {"embed", "cache LLM knowledge vectors", cmd_embed},
        {"stats", "corpus statistics", cmd_stats},
        {"train", "fine-tune the adapter", cmd_train},
        {"sample", "generate images", cmd_sample},
        {"eval", "evaluate baseline vs adapter", cmd_eval},
        {"report", "render SVG summaries", cmd_report},
        {"ablate", "loss-term ablation and layer sweep", cmd_ablate},
    };
    return list;
}

}  // namespace

std::string usage() {
    std::ostringstream s;
    s << "usage: sur <command> [options]\n\ncommands:\n";
    for (const auto& c : commands()) {
        s << "  " << c.name << std::string(16 - std::string(c.name).size(), ' ') << c.summary << "\n";
    }
    s << "\nRun 'sur <command> --help' for the options of a command.\n"
         "SUR_SEED overrides the seed of a loaded config.\n";
    return s.str();
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.empty()) {
        err << usage();
        return kExitUsage;
    }
    if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        out << usage();
        return kExitOk;
    }
    const auto& list = commands();
    auto it = std::find_if(list.begin(), list.end(), [&](const Command& c) { return args[0] == c.name; });
    if (it == list.end()) {
        err << "sur: unknown command '" << args[0] << "'\n\n" << usage();
        return kExitUsage;
    }
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    try {
        return it->run(rest, Io{out, err});
    } catch (const Error& e) {
        err << "sur " << it->name << ": " << e.what() << "\n";
        const bool invalid = e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Parameter;
        return invalid ? kExitInvalid : kExitRuntime;
    } catch (const std::exception& e) {
        err << "sur " << it->name << ": " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace sur
