#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maskgen/tokenizer.hpp"

namespace maskgen {

using Surfaces = std::vector<std::string>;

/// Corpus BLEU with pooled clipped n-gram counts (n = 1..max_n, uniform
/// weights) and brevity penalty exp(min(0, 1 - r/c)). A zero-match bucket
/// for n >= 2 is scored 1 / (2 * max(bucket size, 1)); a zero unigram
/// bucket makes the score 0.
double bleu(std::span<const Surfaces> candidates, std::span<const Surfaces> references, std::size_t max_n = 4);
double sentence_bleu(const Surfaces& candidate, const Surfaces& reference, std::size_t max_n = 4);

/// Clipped unigram matches / reference length.
double rouge1(const Surfaces& candidate, const Surfaces& reference);

struct MeteorAlignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
    bool exhaustive = true;  // false when the search budget ran out
};

/// Exact-match one-to-one alignment with the most matches, then the fewest
/// chunks. Branch and bound; exact unless `node_budget` is exhausted, in
/// which case the best alignment found so far is returned.
MeteorAlignment meteor_align(const Surfaces& candidate, const Surfaces& reference, std::size_t node_budget = 200000);

/// F = 10PR / (R + 9P), penalty = 0.5 (chunks/m)^3, score = F (1 - penalty).
double meteor(const Surfaces& candidate, const Surfaces& reference);

/// Static embeddings for the semantic similarity score: positive-PMI
/// co-occurrence rows compressed by a seeded +-1/sqrt(d) random projection.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::size_t dim, std::size_t documents);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t documents() const noexcept { return documents_; }
    std::size_t size() const noexcept { return vectors_.size(); }

    bool contains(std::string_view token) const { return vectors_.find(token) != vectors_.end(); }
    /// In-vocabulary vector, or the shared UNK vector.
    const std::vector<double>& vector(std::string_view token) const;
    /// ln((1 + N) / (1 + df)); unknown tokens have df = 0.
    double idf(std::string_view token) const;
    const std::vector<double>& unk() const noexcept { return unk_; }

    void set(std::string token, std::vector<double> vec, std::size_t df);
    void set_unk(std::vector<double> vec) { unk_ = std::move(vec); }

    nlohmann::json to_json() const;
    static EmbeddingTable from_json(const nlohmann::json& j);

private:
    std::size_t dim_ = 0;
    std::size_t documents_ = 0;
    std::unordered_map<std::string, std::vector<double>, StringHash, std::equal_to<>> vectors_;
    std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> df_;
    std::vector<double> unk_;
};

EmbeddingTable train_embeddings(std::span<const TokenSequence> sequences, std::size_t dim = 64, std::size_t window = 2,
                                std::uint64_t seed = 0);
EmbeddingTable train_embeddings(const Corpus& corpus, std::size_t dim = 64, std::size_t window = 2,
                                std::uint64_t seed = 0);

/// Cosine of the two token vectors; identical surfaces score 1 and a zero
/// vector scores 0 against anything else.
double token_similarity(std::string_view a, std::string_view b, const EmbeddingTable& emb);

/// Recall-form greedy match: each reference token takes its best cosine over
/// the candidate tokens; idf-weighted mean (plain mean if all idf are 0).
double semscore(const Surfaces& candidate, const Surfaces& reference, const EmbeddingTable& emb);

struct MetricScores {
    double bleu = 0.0;
    double rouge1 = 0.0;
    double meteor = 0.0;
    double semscore = 0.0;
};

struct MetricReport {
    std::vector<std::pair<std::string, MetricScores>> per_doc;  // input order
    MetricScores corpus;  // bleu pooled; the rest are per-document means
    std::size_t n_docs = 0;

    nlohmann::ordered_json to_json() const;
};

MetricReport evaluate(std::span<const std::string> doc_ids, std::span<const Surfaces> candidates,
                      std::span<const Surfaces> references, const EmbeddingTable& emb);

}  // namespace maskgen
