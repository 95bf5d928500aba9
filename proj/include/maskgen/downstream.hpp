#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "maskgen/corpus.hpp"
#include "maskgen/metrics.hpp"
#include "maskgen/tokenizer.hpp"

namespace maskgen {

// ---------------------------------------------------------------- F1

struct F1Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    F1Counts& operator+=(const F1Counts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
    double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
    /// 2PR / (P + R); 0 when tp == 0.
    double f1() const;
};

// ---------------------------------------------------------------- NER

/// Token surfaces with one BIO tag each ("O", "B-TYPE", "I-TYPE").
struct TaggedSequence {
    Surfaces tokens;
    std::vector<std::string> tags;

    /// Throws ValidationError on length mismatch or an I- tag that does not
    /// continue a B-/I- tag of the same type.
    void validate() const;
};

/// Entity spans decoded from BIO tags.
std::vector<EntitySpan> bio_spans(const std::vector<std::string>& tags);

TaggedSequence reference_tag(const Surfaces& tokens, const EntityLexicon& lexicon);
std::vector<TaggedSequence> reference_tag(const Corpus& corpus, const EntityLexicon& lexicon);

struct TaggerOptions {
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
};

/// Greedy left-to-right averaged perceptron over window features
/// (+-2 surfaces, suffix, token flags, previous tag). Decoding never emits an
/// I- tag that would break BIO.
class Tagger {
public:
    std::vector<std::string> predict(const Surfaces& tokens) const;

    const std::vector<std::string>& tagset() const noexcept { return tags_; }
    /// Averaged weights keyed by feature, one entry per tag.
    const std::unordered_map<std::string, std::vector<double>>& weights() const noexcept { return weights_; }

private:
    friend Tagger train_tagger(std::span<const TaggedSequence> train, const TaggerOptions& options);
    std::vector<std::string> tags_;
    std::unordered_map<std::string, std::vector<double>> weights_;
};

Tagger train_tagger(std::span<const TaggedSequence> train, const TaggerOptions& options = {});

/// Entity-level micro F1 (exact span and type) against the gold tags.
F1Counts tagger_counts(const Tagger& tagger, std::span<const TaggedSequence> test);
double eval_tagger(const Tagger& tagger, std::span<const TaggedSequence> test);

// ---------------------------------------------------------------- classification

struct LabeledDoc {
    std::string doc_id;
    Surfaces tokens;
    std::vector<std::string> labels;
};

/// Keeps only labels in `label_set`; documents without labels get an empty set.
std::vector<LabeledDoc> labeled_docs(const Corpus& corpus, const std::vector<std::string>& label_set);

struct ClassifierOptions {
    std::size_t epochs = 40;
    double learning_rate = 0.5;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
};

/// One-vs-rest logistic regression over L2-normalised tf-idf bag-of-words,
/// decision threshold 0.5.
class Classifier {
public:
    std::vector<std::string> predict(const Surfaces& tokens) const;
    /// Sigmoid score per label, in `labels()` order.
    std::vector<double> scores(const Surfaces& tokens) const;
    const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    friend Classifier train_classifier(std::span<const LabeledDoc> train, const std::vector<std::string>& labels,
                                       const ClassifierOptions& options);
    std::unordered_map<std::string, std::size_t> features(const Surfaces& tokens) const;
    std::vector<std::pair<std::size_t, double>> vectorize(const Surfaces& tokens) const;

    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> feature_index_;
    std::vector<double> idf_;
    std::vector<std::vector<double>> weights_;  // [label][feature]
    std::vector<double> bias_;
};

Classifier train_classifier(std::span<const LabeledDoc> train, const std::vector<std::string>& labels,
                            const ClassifierOptions& options = {});

/// Micro F1 pooled over every (document, label) decision.
F1Counts classifier_counts(const Classifier& clf, std::span<const LabeledDoc> test);
double eval_classifier(const Classifier& clf, std::span<const LabeledDoc> test);

// ---------------------------------------------------------------- authorship

struct AuthorPair {
    std::string text_a;
    std::string text_b;
    bool predicted_same = false;
    double score = 0.0;
};

/// Cosine of character-trigram frequency profiles (code points, case kept).
double stylometric_similarity(std::string_view a, std::string_view b);

/// Both texts need >= 20 code points. predicted_same = score >= threshold.
AuthorPair verify_pair(std::string_view a, std::string_view b, double threshold);

struct LabeledScore {
    double score = 0.0;
    bool same_author = false;
};

/// The threshold (one of the observed scores, or just above the largest)
/// that maximises accuracy; ties go to the lower threshold.
double calibrate_threshold(std::span<const LabeledScore> calibration);

/// Fraction of originally-same pairs still judged same after text_b is
/// replaced by `regenerated_b[i]`.
double consistency_rate(std::span<const AuthorPair> pairs, std::span<const std::string> regenerated_b,
                        double threshold);

struct DocPair {
    std::size_t a = 0;
    std::size_t b = 0;
    bool same_author = false;
};

/// Deterministic same/different author pairs over documents that carry an
/// author id: up to `per_author` same-author pairs per author and as many
/// cross-author pairs.
std::vector<DocPair> author_pairs(const Corpus& corpus, std::size_t per_author, std::uint64_t seed);

// ---------------------------------------------------------------- harness output

struct DownstreamResult {
    std::string task;
    std::string model_id;
    std::string strategy;
    std::optional<double> ratio;
    double score = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;

    nlohmann::ordered_json to_json() const;
};

}  // namespace maskgen
