#include <doctest.h>

#include <cmath>
#include <random>

#include "maskgen/error.hpp"
#include "maskgen/metrics.hpp"
#include "oracles.hpp"
#include "test_env.hpp"

using namespace maskgen;

namespace {

Surfaces split(const std::string& s) { return tokenize(s).surfaces(); }

std::vector<Surfaces> one(const Surfaces& s) { return {s}; }

// Oracle enumeration size above which a random pair is skipped.
constexpr double kEnumerationCap = 2e6;

EmbeddingTable toy_embeddings() {
    static const EmbeddingTable emb = train_embeddings(load_corpus(testenv::toy("medical.jsonl")), 64, 2, 1);
    return emb;
}

}  // namespace

TEST_CASE("bleu examples") {
    const auto ref = split("the cat sat on the mat");
    CHECK(bleu(one(ref), one(ref)) == doctest::Approx(1.0).epsilon(1e-12));
    // p1 = p2 = p3 = 1, p4 has an empty bucket scored 1/2, BP = exp(1 - 6/3)
    CHECK(bleu(one(split("the cat sat")), one(ref)) ==
          doctest::Approx(std::exp(-1.0) * std::pow(0.5, 0.25)).epsilon(1e-12));
    CHECK(bleu(one(split("dog ran far away now")), one(ref)) < 0.01);
    CHECK(bleu(one(Surfaces{}), one(ref)) == 0.0);
    const std::vector<Surfaces> two{ref, ref};
    CHECK_THROWS_AS(bleu(one(ref), two), ValidationError);
}

TEST_CASE("rouge1 examples") {
    CHECK(rouge1(Surfaces{"a"}, Surfaces{"a", "b"}) == 0.5);
    CHECK(rouge1(Surfaces{"a", "b"}, Surfaces{"a", "b"}) == 1.0);
    CHECK(rouge1(Surfaces{"a", "a", "a"}, Surfaces{"a", "b"}) == 0.5);
    CHECK_THROWS_AS(rouge1(Surfaces{"a"}, Surfaces{}), ValidationError);
}

TEST_CASE("meteor examples") {
    const auto six = split("a b c d e f");
    CHECK(meteor(six, six) == doctest::Approx(1.0 - 0.5 / 216.0).epsilon(1e-12));
    CHECK(meteor(split("d e f a b c"), six) == doctest::Approx(1.0 - 0.5 / 27.0).epsilon(1e-12));
    const auto a = meteor_align(split("d e f a b c"), six);
    CHECK(a.matches == 6);
    CHECK(a.chunks == 2);
    CHECK(a.exhaustive);
    CHECK(meteor(split("x y"), six) == 0.0);
    CHECK_THROWS_AS(meteor(Surfaces{}, six), ValidationError);
}

TEST_CASE("meteor picks the alignment with fewest chunks") {
    // "a" can align to either reference "a"; only the second keeps one chunk
    const auto al = meteor_align(Surfaces{"a", "b"}, Surfaces{"a", "x", "a", "b"});
    CHECK(al.matches == 2);
    CHECK(al.chunks == 1);
}

TEST_CASE("metrics agree with the brute-force oracles on random pairs") {
    std::mt19937_64 rng(2024);
    const auto emb = toy_embeddings();
    const Surfaces pool{"the", "patient", "was", "given", ",", "fever", "zzz-oov", "."};
    int compared = 0;
    for (int i = 0; i < 400; ++i) {
        const std::size_t vocab = 2 + rng() % 7;
        const auto c = oracle::random_words(rng, 1, 12, vocab);
        const auto r = oracle::random_words(rng, 1, 12, vocab);
        CHECK(bleu(one(c), one(r)) == doctest::Approx(oracle::bleu({c}, {r})).epsilon(1e-9));
        CHECK(rouge1(c, r) == doctest::Approx(oracle::rouge1(c, r)).epsilon(1e-12));
        if (oracle::alignment_count(c, r) <= kEnumerationCap) {
            const auto got = meteor_align(c, r);
            const auto want = oracle::best_alignment(c, r);
            CHECK(got.matches == want.matches);
            CHECK(got.chunks == want.chunks);
            CHECK(meteor(c, r) == doctest::Approx(oracle::meteor(c, r)).epsilon(1e-9));
            ++compared;
        }
        // semscore over real words so that vectors and idf are non-trivial
        Surfaces sc, sr;
        for (const auto& w : c) sc.push_back(pool[static_cast<std::size_t>(std::stoi(w.substr(1)))]);
        for (const auto& w : r) sr.push_back(pool[static_cast<std::size_t>(std::stoi(w.substr(1)))]);
        const double want = oracle::semscore(
            sc, sr, [&](const std::string& t) { return emb.vector(t); }, [&](const std::string& t) { return emb.idf(t); });
        CHECK(semscore(sc, sr, emb) == doctest::Approx(want).epsilon(1e-9));
    }
    CHECK(compared > 350);
}

TEST_CASE("corpus bleu pools counts across documents") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        std::vector<Surfaces> cs, rs;
        for (int d = 0; d < 4; ++d) {
            cs.push_back(oracle::random_words(rng, 0, 10, 5));
            rs.push_back(oracle::random_words(rng, 1, 10, 5));
        }
        CHECK(bleu(cs, rs) == doctest::Approx(oracle::bleu(cs, rs)).epsilon(1e-9));
    }
}

TEST_CASE("score ranges and maxima") {
    std::mt19937_64 rng(8);
    const auto emb = toy_embeddings();
    for (int i = 0; i < 200; ++i) {
        const auto c = oracle::random_words(rng, 1, 12, 6);
        const auto r = oracle::random_words(rng, 1, 12, 6);
        for (double v : {bleu(one(c), one(r)), rouge1(c, r), meteor(c, r)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        const double s = semscore(c, r, emb);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
        CHECK(semscore(r, r, emb) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rouge1(r, r) == 1.0);
        CHECK(meteor(r, r) == doctest::Approx(1.0 - 0.5 / std::pow(static_cast<double>(r.size()), 3)).epsilon(1e-12));
    }
}

TEST_CASE("adding a matched token never lowers rouge1") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 300; ++i) {
        auto c = oracle::random_words(rng, 0, 10, 6);
        const auto r = oracle::random_words(rng, 1, 10, 6);
        const double before = rouge1(c, r);
        c.insert(c.begin() + static_cast<long>(rng() % (c.size() + 1)), r[rng() % r.size()]);
        CHECK(rouge1(c, r) >= before);
    }
}

TEST_CASE("idf and embedding determinism") {
    const Corpus c{"e", {{"1", "x common", {}, {}}, {"2", "y common", {}, {}}, {"3", "z common y", {}, {}}}};
    const auto emb = train_embeddings(c, 16, 2, 4);
    CHECK(emb.idf("common") == 0.0);
    CHECK(emb.idf("y") == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
    CHECK(emb.idf("never-seen") == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(emb.vector("never-seen") == emb.unk());
    CHECK(train_embeddings(c, 16, 2, 4).to_json() == emb.to_json());
    CHECK_FALSE(train_embeddings(c, 16, 2, 5).to_json() == emb.to_json());
    CHECK(EmbeddingTable::from_json(emb.to_json()).to_json() == emb.to_json());
}

TEST_CASE("two-cluster corpus separates in embedding space") {
    Corpus c{"clusters", {}};
    std::mt19937_64 rng(6);
    for (int d = 0; d < 80; ++d) {
        const char prefix = d % 2 ? 'a' : 'b';
        std::string text;
        for (int t = 0; t < 12; ++t) text += std::string(1, prefix) + std::to_string(rng() % 5) + " ";
        c.documents.push_back({"d" + std::to_string(d), text, {}, {}});
    }
    const auto emb = train_embeddings(c, 64, 2, 0);
    double cross = 0, within = 0;
    int nc = 0, nw = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const auto ai = "a" + std::to_string(i), aj = "a" + std::to_string(j), bj = "b" + std::to_string(j);
            cross += std::abs(token_similarity(ai, bj, emb));
            ++nc;
            if (i != j) {
                within += token_similarity(ai, aj, emb);
                ++nw;
            }
        }
    CHECK(cross / nc < 0.3);
    CHECK(within / nw > cross / nc);
}

TEST_CASE("semscore with an out-of-vocabulary candidate is reproducible") {
    const auto emb = toy_embeddings();
    const Surfaces oov{"qqqq", "zzzz"};
    const auto ref = split("the patient was given fluids");
    const double s = semscore(oov, ref, emb);
    CHECK(s == semscore(oov, ref, emb));
    const double want = oracle::semscore(
        oov, ref, [&](const std::string& t) { return emb.vector(t); }, [&](const std::string& t) { return emb.idf(t); });
    CHECK(s == doctest::Approx(want).epsilon(1e-12));
    CHECK(token_similarity("a", "a", emb) == 1.0);
    CHECK(token_similarity("qqqq", "zzzz", emb) == doctest::Approx(1.0));  // both map to the UNK vector
}

TEST_CASE("evaluate aggregates") {
    const auto emb = toy_embeddings();
    const std::vector<std::string> ids{"a", "b"};
    const std::vector<Surfaces> cands{split("the cat sat"), split("a dog")};
    const std::vector<Surfaces> refs{split("the cat sat on the mat"), split("a dog barked")};
    const auto rep = evaluate(ids, cands, refs, emb);
    CHECK(rep.n_docs == 2);
    CHECK(rep.corpus.bleu == doctest::Approx(bleu(cands, refs)).epsilon(1e-12));
    CHECK(rep.corpus.rouge1 == doctest::Approx((0.5 + 2.0 / 3.0) / 2).epsilon(1e-12));
    CHECK(rep.corpus.meteor == doctest::Approx((meteor(cands[0], refs[0]) + meteor(cands[1], refs[1])) / 2).epsilon(1e-12));
    CHECK(rep.per_doc[1].first == "b");
    CHECK(rep.to_json()["n_docs"] == 2);
}
