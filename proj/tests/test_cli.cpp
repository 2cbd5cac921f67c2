#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "support.hpp"
#include "sur/json_io.hpp"
#include "sur/trainer.hpp"

using namespace sur;
using namespace sur::test;

namespace {

struct Shared {
    TempDir dir;
    Fixture fx;
    fs::path config;
};

// One small fixture for the whole file.
Shared& shared() {
    static Shared s;
    static const bool ready = [] {
        s.fx = build_fixture(s.dir.path(), 16, 100, 10);
        s.config = s.dir / "config.json";
        write_json(s.config, Json{{"schema_version", 1}, {"train", {{"steps", 6}, {"batch_size", 4}}}});
        return true;
    }();
    (void)ready;
    return s;
}

std::vector<std::string> train_args(const fs::path& config, const fs::path& out) {
    const Fixture& f = shared().fx;
    return {"train",      "--config",   config.string(),     "--data", f.data.string(), "--encoders",
            f.encoders.string(), "--denoiser", f.denoiser.string(), "--out",  out.string()};
}

struct EnvGuard {
    explicit EnvGuard(const char* value) { setenv("SUR_SEED", value, 1); }
    ~EnvGuard() { unsetenv("SUR_SEED"); }
};

}  // namespace

TEST_CASE("exit codes for help, unknown commands and invalid input") {
    std::string out, err;
    CHECK(run_cli({"--help"}, &out) == 0);
    CHECK(out.find("ablate") != std::string::npos);
    CHECK(run_cli({"train", "--help"}, &out) == 0);
    CHECK(out.find("--denoiser") != std::string::npos);
    CHECK(run_cli({}, nullptr, &err) == 2);
    CHECK(run_cli({"frobnicate"}, nullptr, &err) == 2);
    CHECK(err.find("frobnicate") != std::string::npos);
    CHECK(run_cli({"train", "--data", "x"}, nullptr, &err) == 3);
    CHECK(err.find("--config") != std::string::npos);
    CHECK(run_cli({"synth", "--seed", "0", "--n", "0", "--out", "/nonexistent/x"}, nullptr, &err) == 3);
    CHECK(run_cli({"stats", "--data", "/nonexistent/data", "--out", "/tmp/never.json"}, nullptr, &err) == 1);
}

TEST_CASE("config files reject unknown keys and bad versions") {
    TempDir dir;
    write_json(dir / "typo.json", Json{{"schema_version", 1}, {"train", {{"stepz", 5}}}});
    std::string err;
    CHECK(run_cli(train_args(dir / "typo.json", dir / "out"), nullptr, &err) == 3);
    CHECK(err.find("train.stepz") != std::string::npos);
    write_json(dir / "v2.json", Json{{"schema_version", 2}});
    CHECK(run_cli(train_args(dir / "v2.json", dir / "out"), nullptr, &err) == 3);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run_cli(train_args(dir / "broken.json", dir / "out"), nullptr, &err) == 3);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("SUR_SEED overrides the config seed") {
    TempDir dir;
    {
        EnvGuard env("5");
        REQUIRE(run_cli(train_args(shared().config, dir / "a")) == 0);
    }
    CHECK(read_json(dir / "a" / "config.json")["seed"] == 5);
    REQUIRE(run_cli(train_args(shared().config, dir / "b")) == 0);
    CHECK(read_json(dir / "b" / "config.json")["seed"] == 0);
    CHECK(hash_tree(dir / "a" / "adapter") != hash_tree(dir / "b" / "adapter"));
    EnvGuard bad("five");
    std::string err;
    CHECK(run_cli(train_args(shared().config, dir / "c"), nullptr, &err) == 3);
    CHECK(err.find("SUR_SEED") != std::string::npos);
}

TEST_CASE("ablate with both extra terms off logs l_total equal to l_simple") {
    TempDir dir;
    auto args = train_args(shared().config, dir / "abl");
    args[0] = "ablate";
    args.insert(args.end(), {"--flags", "llm=off,cp=off"});
    std::string err;
    REQUIRE(run_cli(args, nullptr, &err) == 0);
    const Json summary = read_json(dir / "abl" / "ablation.json");
    REQUIRE(summary["runs"].size() == 1);
    CHECK(summary["runs"][0]["l_total_equals_l_simple"].get<bool>());
    const auto log = read_train_log(dir / "abl" / "runs" / "llm-off_cp-off" / "train_log.jsonl");
    REQUIRE(log.size() == 6);
    for (const auto& r : log) CHECK(r.l_total == r.l_simple);

    args.back() = "llm=maybe";
    CHECK(run_cli(args, nullptr, &err) == 3);
}

TEST_CASE("commands write only under their outputs") {
    TempDir dir;
    const Fixture& f = shared().fx;
    const auto before = hash_tree(shared().dir.path());
    REQUIRE(run_cli(train_args(shared().config, dir / "run")) == 0);
    REQUIRE(run_cli({"sample", "--denoiser", f.denoiser.string(), "--encoders", f.encoders.string(), "--adapter",
                     (dir / "run" / "adapter").string(), "--prompt", "two red cats", "--n", "2", "--out",
                     (dir / "samples").string()}) == 0);
    CHECK(fs::exists(dir / "samples" / "sample-001.tns"));
    CHECK(fs::exists(dir / "samples" / "samples.json"));
    {
        Json suite = read_json(f.data / "suite.json");
        suite["images_per_prompt"] = 1;
        for (auto& [name, prompts] : suite["categories"].items()) prompts = Json::array({prompts[0]});
        write_json(dir / "suite.json", suite);
    }
    REQUIRE(run_cli({"eval", "--baseline", f.denoiser.string(), "--adapter", (dir / "run" / "adapter").string(),
                     "--encoders", f.encoders.string(), "--suite", (dir / "suite.json").string(), "--out",
                     (dir / "eval" / "report.json").string()}) == 0);
    CHECK(fs::exists(dir / "eval" / "report.svg"));
    REQUIRE(run_cli({"report", "--in", (dir / "run" / "train_log.jsonl").string(), "--out",
                     (dir / "loss.svg").string()}) == 0);
    REQUIRE(run_cli({"stats", "--data", f.data.string(), "--out", (dir / "stats.json").string()}) == 0);
    CHECK(read_json(dir / "stats.json")["record_count"] == 16);
    CHECK(hash_tree(shared().dir.path()) == before);
}

TEST_CASE("clean honours a drop list") {
    TempDir dir;
    const Fixture& f = shared().fx;
    REQUIRE(run_cli({"synth", "--seed", "4", "--n", "5", "--out", (dir / "d").string()}) == 0);
    std::ofstream(dir / "drop.txt") << "# bad\nsurd-000002\n";
    REQUIRE(run_cli({"clean", "--data", (dir / "d").string(), "--encoders", f.encoders.string(), "--drop-ids",
                     (dir / "drop.txt").string()}) == 0);
    const Json summary = read_json(dir / "d" / "clean_summary.json");
    CHECK(summary["input"] == 5);
    CHECK(summary["errors"][0]["id"] == "surd-000002");
    CHECK(summary["errors"][0]["reason"] == "excluded by drop list");
}
