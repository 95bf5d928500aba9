#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "maskgen/corpus.hpp"
#include "maskgen/error.hpp"
#include "test_env.hpp"

using namespace maskgen;

namespace {

Corpus numbered(std::size_t n) {
    Corpus c{"n", {}};
    for (std::size_t i = 0; i < n; ++i) c.documents.push_back({"d" + std::to_string(i), "text " + std::to_string(i), {}, {}});
    return c;
}

}  // namespace

TEST_CASE("jsonl keeps file order and optional fields") {
    const auto c = parse_corpus_jsonl(
        "{\"id\":\"a\",\"text\":\"hi\"}\n{\"id\":\"b\",\"text\":\"yo\",\"labels\":[\"z\",\"x\",\"z\"],\"author\":\"p\"}\n", "t");
    REQUIRE(c.size() == 2);
    CHECK(c.documents[0].id == "a");
    CHECK(c.documents[1].id == "b");
    CHECK_FALSE(c.documents[0].labels.has_value());
    CHECK(*c.documents[1].labels == std::vector<std::string>{"x", "z"});
    CHECK(*c.documents[1].author_id == "p");
}

TEST_CASE("blank lines are skipped") {
    CHECK(parse_corpus_jsonl("\n{\"id\":\"a\",\"text\":\"hi\"}\n\n", "t").size() == 1);
}

TEST_CASE("parse errors name the offending line") {
    try {
        parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"hi\"}\n{\"id\":\"b\"}\n", "t");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    try {
        parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"hi\"}\n\nnot json\n", "t");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"x\",\"labels\":\"oops\"}", "t"), ParseError);
}

TEST_CASE("document invariants") {
    CHECK_THROWS_AS(parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}", "t"), ValidationError);
    CHECK_THROWS_AS(parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"  \\n\\t\"}", "t"), ValidationError);
    CHECK_THROWS_AS(parse_corpus_jsonl("{\"id\":\"\",\"text\":\"x\"}", "t"), ValidationError);
}

TEST_CASE("bundled toy corpora load completely") {
    for (const char* f : {"medical.jsonl", "movies.jsonl", "authors.jsonl"}) {
        std::size_t lines = 0;
        for (char ch : testenv::slurp(testenv::toy(f))) lines += ch == '\n';
        const auto c = load_corpus(testenv::toy(f));
        CHECK(c.size() == lines);
        CHECK(c.size() == 200);
    }
    CHECK(load_corpus(testenv::toy("medical.jsonl")).name == "medical");
}

TEST_CASE("serialize then parse is the identity") {
    for (const char* f : {"medical.jsonl", "movies.jsonl", "authors.jsonl"}) {
        const auto c = load_corpus(testenv::toy(f));
        CHECK(parse_corpus_jsonl(serialize_corpus_jsonl(c), c.name) == c);
    }
    testenv::TempDir dir("corpus");
    const auto c = load_corpus(testenv::toy("movies.jsonl"));
    save_corpus(c, dir / "m.jsonl");
    auto back = load_corpus(dir / "m.jsonl");
    back.name = c.name;
    CHECK(back == c);
}

TEST_CASE("plain_dir: one document per .txt, ordered by name") {
    testenv::TempDir dir("plain");
    testenv::spit(dir / "b.txt", "second");
    testenv::spit(dir / "a.txt", "first");
    testenv::spit(dir / "ignored.md", "nope");
    const auto c = load_corpus(dir.path(), CorpusFormat::plain_dir);
    REQUIRE(c.size() == 2);
    CHECK(c.documents[0].id == "a");
    CHECK(c.documents[1].text == "second");
    CHECK(parse_corpus_format("plain_dir") == CorpusFormat::plain_dir);
    CHECK_THROWS_AS(parse_corpus_format("xml"), ValidationError);
}

TEST_CASE("split sizes and boundaries") {
    auto [train, test] = split_corpus(numbered(10), {0.8, 7});
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);
    auto [a, b] = split_corpus(numbered(2), {0.5, 1});
    CHECK(a.size() == 1);
    CHECK(b.size() == 1);
    CHECK_THROWS_AS(split_corpus(numbered(1), {0.5, 1}), ValidationError);
    CHECK_THROWS_AS(split_corpus(numbered(3), {0.1, 1}), ValidationError);
    CHECK_THROWS_AS(split_corpus(numbered(3), {1.0, 1}), ValidationError);
}

TEST_CASE("split is a deterministic, order-preserving partition") {
    const auto c = load_corpus(testenv::toy("medical.jsonl"));
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
        const auto [train, test] = split_corpus(c, {0.8, seed});
        const auto again = split_corpus(c, {0.8, seed});
        CHECK(again.first == train);
        CHECK(again.second == test);
        CHECK(train.size() == 160);

        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < c.size(); ++i) pos[c.documents[i].id] = i;
        std::set<std::string> seen;
        for (const auto* side : {&train, &test}) {
            for (std::size_t i = 0; i < side->size(); ++i) {
                CHECK(seen.insert(side->documents[i].id).second);
                if (i) CHECK(pos[side->documents[i - 1].id] < pos[side->documents[i].id]);
            }
        }
        CHECK(seen.size() == c.size());
    }
    CHECK_FALSE(split_corpus(c, {0.8, 1}).first == split_corpus(c, {0.8, 2}).first);
}

TEST_CASE("top_k_labels orders by document frequency, then name") {
    Corpus c{"l", {}};
    auto add = [&](std::vector<std::string> labels) {
        c.documents.push_back({"d" + std::to_string(c.size()), "t", std::move(labels), {}});
    };
    for (int i = 0; i < 5; ++i) add({"x"});
    for (int i = 0; i < 3; ++i) add({"y"});
    add({"z"});
    CHECK(top_k_labels(c, 2) == std::vector<std::string>{"x", "y"});
    CHECK_THROWS_AS(top_k_labels(c, 4), ValidationError);

    Corpus tie{"t", {{"a", "t", std::vector<std::string>{"y"}, {}}, {"b", "t", std::vector<std::string>{"x"}, {}}}};
    CHECK(top_k_labels(tie, 1) == std::vector<std::string>{"x"});
}

TEST_CASE("top_k_labels on the movie corpus matches a direct count") {
    const auto c = load_corpus(testenv::toy("movies.jsonl"));
    std::map<std::string, int> freq;
    for (const auto& d : c.documents)
        for (const auto& l : *d.labels) ++freq[l];
    std::vector<std::pair<int, std::string>> ranked;
    for (const auto& [l, n] : freq) ranked.emplace_back(-n, l);
    std::sort(ranked.begin(), ranked.end());
    const auto top = top_k_labels(c, 6);
    REQUIRE(top.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(top[i] == ranked[i].second);
    // every prefix request is a prefix of the longer answer
    for (std::size_t k = 1; k <= freq.size(); ++k) {
        const auto shorter = top_k_labels(c, k);
        const auto full = top_k_labels(c, freq.size());
        CHECK(std::equal(shorter.begin(), shorter.end(), full.begin()));
    }
}

TEST_CASE("summary counts") {
    const auto s = summarize(load_corpus(testenv::toy("authors.jsonl")));
    CHECK(s.documents == 200);
    CHECK(s.with_author == 200);
    CHECK(s.distinct_authors == 20);
    CHECK(s.labelled == 0);
}
