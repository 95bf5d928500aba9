#include "maskgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "maskgen/error.hpp"
#include "maskgen/rng.hpp"

namespace maskgen {
namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts ngrams(const Surfaces& toks, std::size_t n) {
    NGramCounts out;
    if (toks.size() < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                       toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return out;
}

std::size_t clipped_matches(const Surfaces& cand, const Surfaces& ref, std::size_t n) {
    const auto c = ngrams(cand, n), r = ngrams(ref, n);
    std::size_t m = 0;
    for (const auto& [g, k] : c)
        if (auto it = r.find(g); it != r.end()) m += std::min(k, it->second);
    return m;
}

}  // namespace

double bleu(std::span<const Surfaces> candidates, std::span<const Surfaces> references, std::size_t max_n) {
    if (candidates.size() != references.size())
        throw ValidationError("bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                              std::to_string(references.size()) + " references");
    if (candidates.empty()) throw ValidationError("bleu: no candidates");
    if (max_n == 0) throw ValidationError("bleu: max_n must be >= 1");

    double cand_len = 0.0, ref_len = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_len += static_cast<double>(candidates[i].size());
        ref_len += static_cast<double>(references[i].size());
    }
    if (cand_len == 0.0) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        std::size_t matches = 0, total = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            matches += clipped_matches(candidates[i], references[i], n);
            if (candidates[i].size() >= n) total += candidates[i].size() - n + 1;
        }
        double p;
        if (matches == 0) {
            if (n == 1) return 0.0;
            p = 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(total, 1)));
        } else {
            p = static_cast<double>(matches) / static_cast<double>(total);
        }
        log_sum += std::log(p) / static_cast<double>(max_n);
    }
    const double bp = std::exp(std::min(0.0, 1.0 - ref_len / cand_len));
    return bp * std::exp(log_sum);
}

double sentence_bleu(const Surfaces& candidate, const Surfaces& reference, std::size_t max_n) {
    return bleu(std::span(&candidate, 1), std::span(&reference, 1), max_n);
}

double rouge1(const Surfaces& candidate, const Surfaces& reference) {
    if (reference.empty()) throw ValidationError("rouge1: empty reference");
    return static_cast<double>(clipped_matches(candidate, reference, 1)) / static_cast<double>(reference.size());
}

namespace {

class MeteorSearch {
public:
    MeteorSearch(const Surfaces& cand, const Surfaces& ref, std::size_t budget) : budget_(budget) {
        std::map<std::string, int> types;
        for (const auto& t : cand) types.emplace(t, 0);
        for (const auto& t : ref) types.emplace(t, 0);
        int next = 0;
        for (auto& [t, id] : types) id = next++;
        for (const auto& t : cand) cand_.push_back(types[t]);
        for (const auto& t : ref) ref_.push_back(types[t]);
        cand_left_.assign(types.size(), 0);
        ref_left_.assign(types.size(), 0);
        for (int t : cand_) ++cand_left_[t];
        for (int t : ref_) ++ref_left_[t];
        by_type_.resize(types.size());
        for (std::size_t j = 0; j < ref_.size(); ++j) by_type_[ref_[j]].push_back(j);
        used_.assign(ref_.size(), false);
        target_ = bound();
    }

    MeteorAlignment run() {
        if (target_ == 0) return {0, 0, true};
        dfs(0, -1, 0, 0);
        return {target_, best_chunks_, !exhausted_};
    }

private:
    std::size_t bound() const {
        std::size_t b = 0;
        for (std::size_t t = 0; t < cand_left_.size(); ++t) b += static_cast<std::size_t>(std::min(cand_left_[t], ref_left_[t]));
        return b;
    }

    // prev_ref: ref index matched by cand[i-1], or -1 when cand[i-1] is unmatched.
    void dfs(std::size_t i, long prev_ref, std::size_t matched, std::size_t chunks) {
        if (chunks >= best_chunks_) return;
        if (matched == target_) {
            best_chunks_ = chunks;
            return;
        }
        if (i == cand_.size()) return;
        if (++nodes_ > budget_ && best_chunks_ != kNone) {
            exhausted_ = true;
            return;
        }
        const int t = cand_[i];
        --cand_left_[t];
        std::vector<std::size_t> options;
        if (prev_ref >= 0 && static_cast<std::size_t>(prev_ref + 1) < ref_.size() &&
            !used_[static_cast<std::size_t>(prev_ref + 1)] && ref_[static_cast<std::size_t>(prev_ref + 1)] == t)
            options.push_back(static_cast<std::size_t>(prev_ref + 1));
        for (std::size_t j : by_type_[t])
            if (!used_[j] && (options.empty() || j != options.front())) options.push_back(j);
        for (std::size_t j : options) {
            const bool continues = prev_ref >= 0 && j == static_cast<std::size_t>(prev_ref + 1);
            used_[j] = true;
            --ref_left_[t];
            if (matched + 1 + bound() >= target_) dfs(i + 1, static_cast<long>(j), matched + 1, chunks + (continues ? 0 : 1));
            ++ref_left_[t];
            used_[j] = false;
        }
        if (matched + bound() >= target_) dfs(i + 1, -1, matched, chunks);
        ++cand_left_[t];
    }

    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    std::vector<int> cand_, ref_;
    std::vector<int> cand_left_, ref_left_;
    std::vector<std::vector<std::size_t>> by_type_;
    std::vector<bool> used_;
    std::size_t target_ = 0;
    std::size_t best_chunks_ = kNone;
    std::size_t nodes_ = 0;
    std::size_t budget_;
    bool exhausted_ = false;
};

}  // namespace

MeteorAlignment meteor_align(const Surfaces& candidate, const Surfaces& reference, std::size_t node_budget) {
    return MeteorSearch(candidate, reference, node_budget).run();
}

double meteor(const Surfaces& candidate, const Surfaces& reference) {
    if (candidate.empty() || reference.empty()) throw ValidationError("meteor: empty input");
    const auto a = meteor_align(candidate, reference);
    if (a.matches == 0) return 0.0;
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double f = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / m;
    return f * (1.0 - 0.5 * frag * frag * frag);
}

// ---------------------------------------------------------------- embeddings

EmbeddingTable::EmbeddingTable(std::size_t dim, std::size_t documents) : dim_(dim), documents_(documents) {}

const std::vector<double>& EmbeddingTable::vector(std::string_view token) const {
    if (auto it = vectors_.find(token); it != vectors_.end()) return it->second;
    return unk_;
}

double EmbeddingTable::idf(std::string_view token) const {
    std::size_t df = 0;
    if (auto it = df_.find(token); it != df_.end()) df = it->second;
    return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + static_cast<double>(df)));
}

void EmbeddingTable::set(std::string token, std::vector<double> vec, std::size_t df) {
    if (vec.size() != dim_) throw ContractError("embedding dimension mismatch");
    df_.insert_or_assign(token, df);
    vectors_.insert_or_assign(std::move(token), std::move(vec));
}

nlohmann::json EmbeddingTable::to_json() const {
    nlohmann::json j;
    j["format"] = "maskgen-embeddings";
    j["version"] = 1;
    j["dim"] = dim_;
    j["documents"] = documents_;
    j["unk"] = unk_;
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> sorted;
    for (const auto& [t, v] : vectors_) sorted[t] = {v, df_.at(t)};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [t, vd] : sorted) rows.push_back({{"token", t}, {"df", vd.second}, {"vector", vd.first}});
    j["tokens"] = std::move(rows);
    return j;
}

EmbeddingTable EmbeddingTable::from_json(const nlohmann::json& j) {
    try {
        EmbeddingTable e(j.at("dim").get<std::size_t>(), j.at("documents").get<std::size_t>());
        e.unk_ = j.at("unk").get<std::vector<double>>();
        for (const auto& row : j.at("tokens"))
            e.set(row.at("token").get<std::string>(), row.at("vector").get<std::vector<double>>(),
                  row.at("df").get<std::size_t>());
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed embedding file: ") + ex.what());
    }
}

EmbeddingTable train_embeddings(std::span<const TokenSequence> sequences, std::size_t dim, std::size_t window,
                                std::uint64_t seed) {
    if (sequences.empty()) throw ValidationError("cannot train embeddings on an empty corpus");
    if (dim == 0) throw ValidationError("embedding dimension must be positive");

    std::map<std::string, std::size_t> index;
    for (const auto& s : sequences)
        for (const auto& t : s.tokens) index.emplace(t.surface, 0);
    std::size_t next = 0;
    for (auto& [t, i] : index) i = next++;
    const std::size_t V = index.size();

    std::vector<std::size_t> df(V, 0);
    std::vector<std::map<std::size_t, double>> cooc(V);
    std::vector<std::size_t> ids;
    for (const auto& s : sequences) {
        ids.clear();
        for (const auto& t : s.tokens) ids.push_back(index.at(t.surface));
        std::set<std::size_t> seen(ids.begin(), ids.end());
        for (std::size_t id : seen) ++df[id];
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = (i >= window ? i - window : 0); j <= std::min(ids.size() - 1, i + window); ++j)
                if (j != i) cooc[ids[i]][ids[j]] += 1.0;
    }

    std::vector<double> row_sum(V, 0.0);
    double total = 0.0;
    for (std::size_t w = 0; w < V; ++w)
        for (const auto& [c, n] : cooc[w]) {
            row_sum[w] += n;
            total += n;
        }

    Rng rng(seed);
    const double unit = 1.0 / std::sqrt(static_cast<double>(dim));
    auto random_row = [&] {
        std::vector<double> r(dim);
        for (double& x : r) x = (rng.next() >> 63) ? unit : -unit;
        return r;
    };
    std::vector<std::vector<double>> projection(V);
    for (auto& r : projection) r = random_row();

    EmbeddingTable table(dim, sequences.size());
    table.set_unk(random_row());
    for (const auto& [token, w] : index) {
        std::vector<double> vec(dim, 0.0);
        for (const auto& [c, n] : cooc[w]) {
            const double pmi = std::log(n * total / (row_sum[w] * row_sum[c]));
            if (pmi <= 0.0) continue;
            for (std::size_t d = 0; d < dim; ++d) vec[d] += pmi * projection[c][d];
        }
        table.set(token, std::move(vec), df[w]);
    }
    return table;
}

EmbeddingTable train_embeddings(const Corpus& corpus, std::size_t dim, std::size_t window, std::uint64_t seed) {
    if (corpus.empty()) throw ValidationError("cannot train embeddings on an empty corpus");
    auto seqs = tokenize_corpus(corpus);
    return train_embeddings(seqs, dim, window, seed);
}

double token_similarity(std::string_view a, std::string_view b, const EmbeddingTable& emb) {
    if (a == b) return 1.0;
    const auto& x = emb.vector(a);
    const auto& y = emb.vector(b);
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nx) * std::sqrt(ny)), -1.0, 1.0);
}

double semscore(const Surfaces& candidate, const Surfaces& reference, const EmbeddingTable& emb) {
    if (candidate.empty() || reference.empty()) throw ValidationError("semscore: empty input");
    double weighted = 0.0, weights = 0.0, plain = 0.0;
    for (const auto& r : reference) {
        double best = -1.0;
        for (const auto& c : candidate) best = std::max(best, token_similarity(r, c, emb));
        const double w = emb.idf(r);
        weighted += w * best;
        weights += w;
        plain += best;
    }
    if (weights > 0.0) return weighted / weights;
    return plain / static_cast<double>(reference.size());
}

// ---------------------------------------------------------------- reports

nlohmann::ordered_json MetricReport::to_json() const {
    auto scores = [](const MetricScores& s) {
        return nlohmann::ordered_json{{"bleu", s.bleu}, {"rouge1", s.rouge1}, {"meteor", s.meteor}, {"semscore", s.semscore}};
    };
    nlohmann::ordered_json j;
    j["n_docs"] = n_docs;
    j["corpus"] = scores(corpus);
    nlohmann::ordered_json docs;
    for (const auto& [id, s] : per_doc) docs[id] = scores(s);
    j["per_doc"] = std::move(docs);
    return j;
}

MetricReport evaluate(std::span<const std::string> doc_ids, std::span<const Surfaces> candidates,
                      std::span<const Surfaces> references, const EmbeddingTable& emb) {
    if (doc_ids.size() != candidates.size() || candidates.size() != references.size())
        throw ValidationError("evaluate: ids, candidates and references differ in length");
    if (candidates.empty()) throw ValidationError("evaluate: nothing to score");
    MetricReport report;
    report.n_docs = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        MetricScores s;
        s.bleu = sentence_bleu(candidates[i], references[i]);
        s.rouge1 = rouge1(candidates[i], references[i]);
        s.meteor = candidates[i].empty() ? 0.0 : meteor(candidates[i], references[i]);
        s.semscore = candidates[i].empty() ? 0.0 : semscore(candidates[i], references[i], emb);
        report.corpus.rouge1 += s.rouge1;
        report.corpus.meteor += s.meteor;
        report.corpus.semscore += s.semscore;
        report.per_doc.emplace_back(doc_ids[i], s);
    }
    const double n = static_cast<double>(candidates.size());
    report.corpus.rouge1 /= n;
    report.corpus.meteor /= n;
    report.corpus.semscore /= n;
    report.corpus.bleu = bleu(candidates, references);
    return report;
}

}  // namespace maskgen
