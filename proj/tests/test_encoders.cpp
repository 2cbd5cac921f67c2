#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "support.hpp"
#include "sur/encoders.hpp"
#include "sur/error.hpp"
#include "sur/hash.hpp"
#include "sur/synth.hpp"
#include "sur/text.hpp"

using namespace sur;
using namespace sur::test;

namespace {

EncoderBundle small_bundle(std::uint64_t seed = 0, const std::string& profile = "7b-toy") {
    return EncoderBundle::generate(seed, llm_profile(profile), Vocabulary(synth::lexicon()));
}

}  // namespace

TEST_CASE("split_words lowercases and splits on punctuation") {
    CHECK(split_words("Four freshly-baked PIES.") == std::vector<std::string>{"four", "freshly", "baked", "pies"});
    CHECK(split_words("  ,, ").empty());
}

TEST_CASE("vocabulary reserves unk and pad") {
    const Vocabulary v({"red", "cat"});
    CHECK(v.size() == 4);
    CHECK(v.id("red") == 2);
    CHECK(v.id("zebra") == Vocabulary::kUnk);
    CHECK_THROWS_AS(Vocabulary({"red", "red"}), Error);
    CHECK_THROWS_AS(v.token(99), Error);
}

TEST_CASE("vocabulary from corpus orders by frequency then spelling") {
    const Vocabulary v = Vocabulary::from_corpus({"b a a", "c b a"}, 2);
    CHECK(v.words() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("tokenize pads, truncates and maps empty text to unk") {
    const Vocabulary v({"one", "red", "cat"});
    const TokenSequence s = tokenize("one red cat", v, 5);
    CHECK(s.length == 3);
    CHECK(s.ids == std::vector<int>{2, 3, 4, Vocabulary::kPad, Vocabulary::kPad});
    const TokenSequence t = tokenize("one red cat one red cat", v, 4);
    CHECK(t.length == 4);
    const TokenSequence e = tokenize("", v, 3);
    CHECK(e.length == 1);
    CHECK(e.ids[0] == Vocabulary::kUnk);
    CHECK_THROWS_AS(tokenize("x", v, 0), Error);
}

TEST_CASE("stopword list holds 150 distinct words") {
    const auto& words = stopwords();
    CHECK(words.size() == 150);
    CHECK(std::set<std::string>(words.begin(), words.end()).size() == 150);
    CHECK(is_stopword("the"));
    CHECK_FALSE(is_stopword("balloon"));
}

TEST_CASE("profiles and their errors") {
    CHECK(llm_profile("13b-toy").n_layers == 10);
    CHECK(llm_profile("33b-toy").d_llm == 104);
    try {
        llm_profile("70b");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}

TEST_CASE("text encoder is deterministic and leaves pad rows at their embeddings") {
    const EncoderBundle a = small_bundle(3), b = small_bundle(3);
    const TokenSequence seq = a.tokenize("two blue dogs running");
    const Tensor ea = a.text.encode(seq), eb = b.text.encode(seq);
    CHECK(ea.shape() == Shape{16, 48});
    for (std::size_t i = 0; i < ea.numel(); ++i) REQUIRE(ea[i] == eb[i]);
    // Pad position: token embedding of <pad> plus position embedding.
    const std::size_t row = seq.length;
    for (std::size_t c = 0; c < 48; ++c) {
        CHECK(ea.at(row, c) == a.text.token_embedding().at(Vocabulary::kPad, c) + a.text.position_embedding().at(row, c));
    }
    CHECK_THROWS_AS(a.text.encode(std::vector<int>(3, 0)), Error);
}

TEST_CASE("knowledge vector equals the mean of the true-length hidden rows") {
    const EncoderBundle b = small_bundle(1);
    const std::string prompt = "three green birds jumping today";
    const TokenSequence seq = b.tokenize(prompt);
    REQUIRE(seq.length == 5);
    const Tensor states = b.llm.hidden_states(seq.ids, 4);
    const Tensor k = b.knowledge_vector(prompt, 4);
    for (std::size_t c = 0; c < b.llm.d_llm(); ++c) {
        long double acc = 0;
        for (std::size_t r = 0; r < seq.length; ++r) acc += states.at(r, c);
        CHECK(std::abs(k[c] - static_cast<double>(acc / seq.length)) < 1e-12);
    }
    // A single-token prompt caches exactly that row.
    const TokenSequence one = b.tokenize("cat");
    const Tensor s1 = b.llm.hidden_states(one.ids, 2);
    const Tensor k1 = b.knowledge_vector("cat", 2);
    for (std::size_t c = 0; c < b.llm.d_llm(); ++c) CHECK(k1[c] == s1.at(0, c));
}

TEST_CASE("hidden state layer range") {
    const EncoderBundle b = small_bundle();
    const TokenSequence seq = b.tokenize("one cat");
    CHECK_THROWS_AS(b.llm.hidden_states(seq.ids, 0), Error);
    CHECK_THROWS_AS(b.llm.hidden_states(seq.ids, b.llm.n_layers() + 1), Error);
    CHECK_NOTHROW(b.llm.hidden_states(seq.ids, b.llm.n_layers()));
}

TEST_CASE("layers produce distinct hidden states") {
    const EncoderBundle b = small_bundle();
    const Tensor k1 = b.knowledge_vector("two red cats", 1);
    const Tensor k2 = b.knowledge_vector("two red cats", 2);
    bool differ = false;
    for (std::size_t i = 0; i < k1.numel(); ++i) differ = differ || k1[i] != k2[i];
    CHECK(differ);
}

TEST_CASE("image embedder checks shape") {
    const EncoderBundle b = small_bundle();
    CHECK(b.image.embed(Tensor::zeros({8, 8})).shape() == Shape{48});
    CHECK_THROWS_AS(b.image.embed(Tensor::zeros({4, 4})), Error);
}

TEST_CASE("bundle save and load reproduce every output") {
    TempDir dir;
    const EncoderBundle b = small_bundle(9, "13b-toy");
    b.save(dir / "enc");
    const EncoderBundle c = EncoderBundle::load(dir / "enc");
    CHECK(c.profile.name == "13b-toy");
    CHECK(c.vocab.tokens() == b.vocab.tokens());
    const Tensor x = b.encode_text("a photo of four blue pies"), y = c.encode_text("a photo of four blue pies");
    for (std::size_t i = 0; i < x.numel(); ++i) REQUIRE(x[i] == y[i]);
    const Tensor kx = b.knowledge_vector("one cat", 7), ky = c.knowledge_vector("one cat", 7);
    for (std::size_t i = 0; i < kx.numel(); ++i) REQUIRE(kx[i] == ky[i]);

    // Saving again gives identical bytes.
    c.save(dir / "enc2");
    CHECK(hash_tree(dir / "enc") == hash_tree(dir / "enc2"));
}

TEST_CASE("tampered encoder weights fail hash verification") {
    TempDir dir;
    small_bundle().save(dir / "enc");
    const auto names = encoder_weight_names(dir / "enc");
    REQUIRE(!names.empty());
    const fs::path victim = dir / "enc" / (names.front() + ".tns");
    std::string bytes;
    {
        std::ifstream in(victim, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    bytes.back() ^= 0x5a;
    std::ofstream(victim, std::ios::binary) << bytes;
    try {
        EncoderBundle::load(dir / "enc");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
        CHECK(std::string(e.what()).find("hash") != std::string::npos);
    }
}
