#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "maskgen/downstream.hpp"
#include "maskgen/error.hpp"
#include "test_env.hpp"

using namespace maskgen;

using Strings = std::vector<std::string>;

namespace {

EntityLexicon medical_lexicon() { return EntityLexicon::load_tsv(testenv::toy("medical_lexicon.tsv")); }

std::vector<TaggedSequence> medical_tagged(std::size_t n) {
    const auto lex = medical_lexicon();
    auto all = reference_tag(load_corpus(testenv::toy("medical.jsonl")), lex);
    all.resize(n);
    return all;
}

// Trigram cosine over a plain byte string (ASCII inputs only).
double trigram_cosine(const std::string& a, const std::string& b) {
    std::map<std::string, double> pa, pb;
    for (std::size_t i = 0; i + 3 <= a.size(); ++i) pa[a.substr(i, 3)] += 1;
    for (std::size_t i = 0; i + 3 <= b.size(); ++i) pb[b.substr(i, 3)] += 1;
    double dot = 0, na = 0, nb = 0;
    for (const auto& [g, x] : pa) {
        na += x * x;
        if (pb.count(g)) dot += x * pb[g];
    }
    for (const auto& [g, y] : pb) nb += y * y;
    return na && nb ? dot / std::sqrt(na * nb) : 0.0;
}

}  // namespace

TEST_CASE("F1 from pooled counts") {
    CHECK(F1Counts{2, 1, 1}.f1() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(F1Counts{2, 1, 1}.precision() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(F1Counts{3, 3, 1}.f1() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(F1Counts{3, 3, 1}.recall() == 0.75);
    CHECK(F1Counts{0, 0, 4}.f1() == 0.0);
    CHECK(F1Counts{5, 0, 0}.f1() == 1.0);
    F1Counts sum;
    sum += {1, 2, 3};
    sum += {1, 0, 0};
    CHECK(sum.tp == 2);
    CHECK(sum.fn == 3);
}

TEST_CASE("reference tagging") {
    EntityLexicon lex;
    lex.add("septic shock", "DISEASE");
    const auto t = reference_tag(Strings{"severe", "septic", "shock"}, lex);
    CHECK(t.tags == Strings{"O", "B-DISEASE", "I-DISEASE"});
    CHECK(reference_tag(Strings{"nothing", "here"}, lex).tags == Strings{"O", "O"});
    lex.add("shock", "SYMPTOM");
    lex.add("severe septic", "OTHER");
    // both two-token spans are candidates; the earlier start wins
    CHECK(reference_tag(Strings{"severe", "septic", "shock"}, lex).tags == Strings{"B-OTHER", "I-OTHER", "B-SYMPTOM"});
    CHECK_THROWS_AS(reference_tag(load_corpus(testenv::toy("medical.jsonl")), EntityLexicon{}), ValidationError);
}

TEST_CASE("BIO validation and spans") {
    CHECK_NOTHROW(TaggedSequence{{"a", "b", "c"}, {"B-X", "I-X", "O"}}.validate());
    CHECK_THROWS_AS(TaggedSequence({{"a", "b"}, {"O", "I-X"}}).validate(), ValidationError);
    CHECK_THROWS_AS(TaggedSequence({{"a", "b"}, {"B-Y", "I-X"}}).validate(), ValidationError);
    CHECK_THROWS_AS(TaggedSequence({{"a"}, {"O", "O"}}).validate(), ValidationError);
    CHECK_THROWS_AS(TaggedSequence({{"a"}, {"X"}}).validate(), ValidationError);
    CHECK(bio_spans({"B-X", "I-X", "O", "B-Y", "B-Y"}) ==
          std::vector<EntitySpan>{{0, 2, "X"}, {3, 4, "Y"}, {4, 5, "Y"}});
}

TEST_CASE("tagger memorises its training set") {
    const auto train = medical_tagged(20);
    const auto tagger = train_tagger(train);
    std::size_t right = 0, total = 0;
    for (const auto& s : train) {
        const auto pred = tagger.predict(s.tokens);
        for (std::size_t i = 0; i < pred.size(); ++i) right += pred[i] == s.tags[i];
        total += pred.size();
        TaggedSequence{s.tokens, pred}.validate();
    }
    CHECK(static_cast<double>(right) / static_cast<double>(total) >= 0.95);
    CHECK(eval_tagger(tagger, train) >= 0.9);
}

TEST_CASE("tagger fits a single sentence exactly") {
    const TaggedSequence s{{"the", "patient", "had", "septic", "shock", "today"},
                           {"O", "O", "O", "B-DISEASE", "I-DISEASE", "O"}};
    const std::vector<TaggedSequence> one{s};
    const auto tagger = train_tagger(one);
    CHECK(tagger.predict(s.tokens) == s.tags);
    CHECK(eval_tagger(tagger, one) == 1.0);
    CHECK_THROWS_AS(train_tagger(std::vector<TaggedSequence>{}), ValidationError);
}

TEST_CASE("tagger training is deterministic") {
    const auto train = medical_tagged(40);
    const auto a = train_tagger(train, {5, 3});
    const auto b = train_tagger(train, {5, 3});
    CHECK(a.tagset() == b.tagset());
    CHECK(a.weights() == b.weights());
}

TEST_CASE("entity-level counts") {
    const TaggedSequence gold{{"a", "b", "c", "d"}, {"B-X", "I-X", "O", "B-Y"}};
    const std::vector<TaggedSequence> test{gold};
    // a tagger that never saw entities predicts none: every gold span is a miss
    const auto blind = train_tagger(std::vector<TaggedSequence>{{{"a", "b"}, {"O", "O"}}});
    const auto c = tagger_counts(blind, test);
    CHECK(c.tp == 0);
    CHECK(c.fp == 0);
    CHECK(c.fn == 2);
    CHECK(eval_tagger(blind, test) == 0.0);
}

TEST_CASE("classifier on a separable set") {
    std::vector<LabeledDoc> docs;
    for (int i = 0; i < 12; ++i) {
        docs.push_back({"a" + std::to_string(i), {"alpha", "common", "w" + std::to_string(i)}, {"A"}});
        docs.push_back({"b" + std::to_string(i), {"beta", "common", "v" + std::to_string(i)}, {"B"}});
        docs.push_back({"c" + std::to_string(i), {"alpha", "beta", "u" + std::to_string(i)}, {"A", "B"}});
        docs.push_back({"n" + std::to_string(i), {"common", "x" + std::to_string(i)}, {}});
    }
    const Strings labels{"A", "B"};
    const auto clf = train_classifier(docs, labels);
    CHECK(eval_classifier(clf, docs) == 1.0);
    const auto again = train_classifier(docs, labels);
    for (const auto& d : docs) CHECK(again.scores(d.tokens) == clf.scores(d.tokens));
    CHECK_THROWS_AS(train_classifier(docs, Strings{"A", "never"}), ValidationError);

    // the complement of the truth scores 0
    std::vector<LabeledDoc> flipped;
    for (const auto& d : docs) {
        if (d.labels.size() == 1) flipped.push_back({d.doc_id, d.tokens, {d.labels[0] == "A" ? "B" : "A"}});
    }
    CHECK(eval_classifier(clf, flipped) == 0.0);
}

TEST_CASE("labeled_docs keeps only the chosen labels") {
    const Corpus c{"m", {{"1", "x y", Strings{"drama", "noir"}, {}}, {"2", "z", std::nullopt, {}}}};
    const auto docs = labeled_docs(c, {"noir"});
    CHECK(docs[0].labels == Strings{"noir"});
    CHECK(docs[0].tokens == Strings{"x", "y"});
    CHECK(docs[1].labels.empty());
}

TEST_CASE("classifier counts pool every decision") {
    std::vector<LabeledDoc> train{{"1", {"red"}, {"R"}}, {"2", {"green"}, {"G"}}, {"3", {"red", "green"}, {"R", "G"}}};
    const auto clf = train_classifier(train, {"R", "G"});
    // hand-pooled: doc one predicted R only, gold R and G -> tp 1, fn 1
    const std::vector<LabeledDoc> test{{"t", {"red"}, {"R", "G"}}};
    const auto c = classifier_counts(clf, test);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.fp == 0);
}

TEST_CASE("stylometric similarity") {
    const std::string text = "The quick brown fox jumps over the lazy dog again.";
    const auto same = verify_pair(text, text, 0.9);
    CHECK(same.score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(same.predicted_same);
    const auto disjoint = verify_pair("aaaaaaaaaaaaaaaaaaaaaaaa", "bbbbbbbbbbbbbbbbbbbbbbbbbbbb", 0.1);
    CHECK(disjoint.score == 0.0);
    CHECK_FALSE(disjoint.predicted_same);
    const std::string other = "A lazy dog sleeps while the quick fox runs away.";
    const double s = stylometric_similarity(text, other);
    CHECK(s == doctest::Approx(trigram_cosine(text, other)).epsilon(1e-12));
    CHECK(verify_pair(text, other, s).predicted_same);
    CHECK_FALSE(verify_pair(text, other, std::nextafter(s, 2.0)).predicted_same);
    CHECK_THROWS_AS(verify_pair("too short", text, 0.5), ValidationError);
    // twenty code points, more bytes
    CHECK_NOTHROW(verify_pair("éééééééééééééééééééé", text, 0.5));
}

TEST_CASE("stylometric similarity agrees with a byte-trigram oracle") {
    const auto c = load_corpus(testenv::toy("authors.jsonl"));
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
        const auto& a = c.documents[rng() % c.size()].text;
        const auto& b = c.documents[rng() % c.size()].text;
        bool ascii = true;
        for (unsigned char ch : a + b) ascii = ascii && ch < 128;
        if (!ascii) continue;
        CHECK(stylometric_similarity(a, b) == doctest::Approx(trigram_cosine(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("threshold calibration") {
    const std::vector<LabeledScore> clean{{0.3, false}, {0.6, true}};
    CHECK(calibrate_threshold(clean) == 0.6);
    // 0.3 and 0.7 both classify two of three correctly: the lower one wins
    const std::vector<LabeledScore> tie{{0.3, true}, {0.5, false}, {0.7, true}};
    CHECK(calibrate_threshold(tie) == 0.3);
    const std::vector<LabeledScore> none_same{{0.4, false}, {0.8, false}};
    CHECK(calibrate_threshold(none_same) > 0.8);
    CHECK_THROWS_AS(calibrate_threshold(std::vector<LabeledScore>{}), ValidationError);
}

TEST_CASE("consistency rate") {
    const std::string a1 = "I shall walk to the river at dawn, as always, and wait.";
    const std::string a2 = "I shall walk to the river at dusk, as always, and wait there.";
    const std::string noise = "zqxv jkwp 9981 ##@@ ¤¤¤¤ qqqq zzzz kkkk";
    const double t = 0.5;
    std::vector<AuthorPair> pairs;
    for (int i = 0; i < 4; ++i) pairs.push_back(verify_pair(a1, a2, t));
    for (const auto& p : pairs) REQUIRE(p.predicted_same);
    const Strings originals(4, a2);
    CHECK(consistency_rate(pairs, originals, t) == 1.0);
    CHECK(consistency_rate(pairs, Strings(4, noise), t) == 0.0);
    CHECK(consistency_rate(pairs, Strings{a2, a2, noise, noise}, t) == 0.5);

    // monotone in preserved and flipped pairs
    auto more = pairs;
    more.push_back(pairs[0]);
    CHECK(consistency_rate(more, Strings{a2, a2, noise, noise, a2}, t) >= 0.5);
    CHECK(consistency_rate(more, Strings{a2, a2, noise, noise, noise}, t) <= 0.5);

    CHECK_THROWS_AS(consistency_rate(std::vector<AuthorPair>{}, Strings{}, t), ValidationError);
    CHECK_THROWS_AS(consistency_rate(pairs, Strings{a2}, t), ValidationError);
    auto bad = pairs;
    bad[0].predicted_same = false;
    CHECK_THROWS_AS(consistency_rate(bad, originals, t), ContractError);
}

TEST_CASE("author pairs") {
    const auto c = load_corpus(testenv::toy("authors.jsonl"));
    const auto pairs = author_pairs(c, 3, 11);
    std::size_t same = 0, diff = 0;
    std::map<std::string, std::size_t> per_author;
    for (const auto& p : pairs) {
        const bool s = c.documents[p.a].author_id == c.documents[p.b].author_id;
        CHECK(s == p.same_author);
        CHECK(p.a != p.b);
        if (p.same_author) {
            ++same;
            ++per_author[*c.documents[p.a].author_id];
        } else {
            ++diff;
        }
    }
    CHECK(same == diff);
    CHECK(same == 60);
    for (const auto& [a, n] : per_author) CHECK(n <= 3);
    const auto again = author_pairs(c, 3, 11);
    REQUIRE(again.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(again[i].a == pairs[i].a);
        CHECK(again[i].b == pairs[i].b);
    }
}

TEST_CASE("harness result JSON") {
    DownstreamResult r{"ner", "bidir3", "random", 0.5, 0.75, 10, 5};
    const auto j = r.to_json();
    CHECK(j["task"] == "ner");
    CHECK(j["ratio"] == 0.5);
    CHECK(j["n_test"] == 5);
    r.ratio.reset();
    CHECK(r.to_json()["ratio"].is_null());
}
