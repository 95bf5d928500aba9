#include <doctest.h>

#include <set>

#include "maskgen/corruption.hpp"
#include "maskgen/error.hpp"
#include "oracles.hpp"

using namespace maskgen;

using Strings = std::vector<std::string>;

namespace {

const char* kFox = "The quick brown fox jumps over the lazy dog";

MaskedSequence mask_tail(const TokenSequence& seq, std::size_t k) {
    auto m = mask_random(seq, 0.0, 0);
    for (std::size_t i = seq.size() - k; i < seq.size(); ++i) m.slots[i].masked = true;
    return m;
}

TokenSequence words(std::size_t n) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += "t" + std::to_string(i) + " ";
    return tokenize(text);
}

std::set<std::size_t> mask_set(const MaskedSequence& m) {
    const auto p = m.masked_positions();
    return {p.begin(), p.end()};
}

}  // namespace

TEST_CASE("mask count equals round-half-up of ratio * n for every n <= 512") {
    for (std::uint64_t den : {10ULL, 100ULL}) {
        for (std::uint64_t num = 0; num <= den; ++num) {
            const double ratio = static_cast<double>(num) / static_cast<double>(den);
            for (std::size_t n = 0; n <= kMaxTokens; ++n)
                REQUIRE_MESSAGE(mask_count_for(ratio, n) == oracle::mask_count(num, den, n),
                                "ratio " << ratio << " n " << n);
        }
    }
}

TEST_CASE("mask_random masks exactly the mask count") {
    for (std::size_t n : {1u, 2u, 3u, 7u, 10u, 50u, 333u, 512u})
        for (int k = 0; k <= 10; ++k) {
            const auto seq = words(n);
            const auto m = mask_random(seq, k / 10.0, 17 + n);
            CHECK(m.size() == n);
            CHECK(m.masked_count() == oracle::mask_count(static_cast<std::uint64_t>(k), 10, n));
            CHECK(m.original() == TokenSequence{seq.tokens, seq.doc_id});
        }
}

TEST_CASE("ratio boundaries") {
    const auto seq = tokenize(kFox);
    CHECK(mask_random(seq, 0.0, 3).masked_count() == 0);
    CHECK(mask_random(seq, 1.0, 3).masked_count() == 9);
    CHECK_THROWS_AS(mask_random(seq, 1.5, 3), ValidationError);
    CHECK_THROWS_AS(mask_random(seq, -0.1, 3), ValidationError);
}

TEST_CASE("fox prompt with the last five slots masked") {
    const auto m = mask_tail(tokenize(kFox), 5);
    CHECK(m.prompt() == Strings{"the", "quick", "brown", "fox", "[MASK]", "[MASK]", "[MASK]", "[MASK]", "[MASK]"});
    CHECK(extract_context(m).surfaces() == Strings{"the", "quick", "brown", "fox"});
    const auto vis = m.visible();
    for (std::size_t i = 4; i < 9; ++i) CHECK_FALSE(vis[i].has_value());
    CHECK(*vis[0] == "the");
}

TEST_CASE("seed determinism and seed sensitivity") {
    const auto seq = words(50);
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(mask_random(seq, 0.5, s) == mask_random(seq, 0.5, s));
    int differing = 0;
    for (std::uint64_t s = 0; s < 100; ++s)
        differing += mask_set(mask_random(seq, 0.5, 2 * s)) != mask_set(mask_random(seq, 0.5, 2 * s + 1)) ? 1 : 0;
    CHECK(differing >= 99);
}

TEST_CASE("masked positions are spread uniformly") {
    // each of 10 slots should be masked about half the time at ratio 0.5
    const auto seq = words(10);
    std::vector<int> hits(10, 0);
    for (std::uint64_t s = 0; s < 4000; ++s)
        for (std::size_t p : mask_random(seq, 0.5, s).masked_positions()) ++hits[p];
    for (int h : hits) CHECK(std::abs(h - 2000) < 200);
}

TEST_CASE("class strategies") {
    const auto punct = mask_keep_class(tokenize("hello, world."), MaskingStrategy::keep(MaskingStrategy::Kind::keep_punctuation));
    CHECK(punct.prompt() == Strings{"[MASK]", ",", "[MASK]", "."});

    const auto fox = tokenize(kFox);
    const auto sw = mask_keep_class(fox, MaskingStrategy::keep(MaskingStrategy::Kind::keep_stopwords));
    CHECK(extract_context(sw).surfaces() == Strings{"the", "the"});
    CHECK(mask_set(sw) == std::set<std::size_t>{1, 2, 3, 4, 5, 7, 8});

    const auto both = mask_keep_class(tokenize("The cat, on a mat."),
                                      MaskingStrategy::keep(MaskingStrategy::Kind::keep_stopwords_punctuation));
    CHECK(extract_context(both).surfaces() == Strings{"the", ",", "on", "a", "."});

    EntityLexicon lex;
    lex.add("septic shock", "DISEASE");
    const auto ner = mask_keep_class(tokenize("severe septic shock today", &lex),
                                     MaskingStrategy::keep(MaskingStrategy::Kind::keep_entities));
    CHECK(extract_context(ner).surfaces() == Strings{"septic", "shock"});

    CHECK_THROWS_AS(mask_keep_class(fox, MaskingStrategy::random(0.5)), ContractError);
}

TEST_CASE("class strategies ignore the seed and are idempotent") {
    const auto seq = tokenize("The patient, a man of 60, was given the drug.");
    for (auto kind : {MaskingStrategy::Kind::keep_stopwords, MaskingStrategy::Kind::keep_punctuation,
                      MaskingStrategy::Kind::keep_stopwords_punctuation}) {
        const auto s = MaskingStrategy::keep(kind);
        const auto once = corrupt(seq, s, 1);
        CHECK(corrupt(seq, s, 999).slots == once.slots);
        // re-masking the kept context with the same rule keeps everything
        TokenSequence kept{extract_context(once).tokens, seq.doc_id};
        CHECK(mask_keep_class(kept, s).masked_count() == 0);
    }
}

TEST_CASE("context extraction boundaries") {
    const auto seq = tokenize(kFox);
    CHECK(extract_context(mask_random(seq, 1.0, 0)).tokens.empty());
    CHECK(extract_context(mask_random(seq, 0.0, 0)).tokens == seq.tokens);
    // the context is a subsequence in original order
    const auto m = mask_random(seq, 0.4, 11);
    const auto ctx = extract_context(m).surfaces();
    std::size_t j = 0;
    for (const auto& s : seq.surfaces())
        if (j < ctx.size() && ctx[j] == s) ++j;
    CHECK(j == ctx.size());
    CHECK(ctx.size() == seq.size() - m.masked_count());
}

TEST_CASE("strategy strings round trip") {
    for (const char* s : {"random:0.5", "random:0.1", "random:1", "stopwords", "punctuation", "stopwords_punctuation", "ner"})
        CHECK(MaskingStrategy::parse(MaskingStrategy::parse(s).to_string()) == MaskingStrategy::parse(s));
    CHECK(MaskingStrategy::parse("random:0.3").ratio == 0.3);
    CHECK(MaskingStrategy::parse("ner").name() == "ner");
    CHECK(MaskingStrategy::parse("random:0.3").name() == "random");
    CHECK_THROWS_AS(MaskingStrategy::parse("random:"), ValidationError);
    CHECK_THROWS_AS(MaskingStrategy::parse("random:x"), ValidationError);
    CHECK_THROWS_AS(MaskingStrategy::parse("random:2"), ValidationError);
    CHECK_THROWS_AS(MaskingStrategy::parse("span"), ValidationError);
}
