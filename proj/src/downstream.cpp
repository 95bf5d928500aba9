#include "maskgen/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "maskgen/error.hpp"
#include "maskgen/rng.hpp"
#include "maskgen/utf8.hpp"

namespace maskgen {

double F1Counts::f1() const {
    if (tp == 0) return 0.0;
    const double p = precision(), r = recall();
    return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------- NER

namespace {

std::string entity_type_of(const std::string& tag) { return tag.size() > 2 ? tag.substr(2) : std::string(); }

bool allowed_after(const std::string& prev, const std::string& tag) {
    if (!tag.starts_with("I-")) return true;
    return (prev.starts_with("B-") || prev.starts_with("I-")) && entity_type_of(prev) == entity_type_of(tag);
}

}  // namespace

void TaggedSequence::validate() const {
    if (tokens.size() != tags.size()) throw ValidationError("tag count differs from token count");
    std::string prev = "O";
    for (const auto& t : tags) {
        if (t != "O" && !t.starts_with("B-") && !t.starts_with("I-")) throw ValidationError("bad BIO tag '" + t + "'");
        if (!allowed_after(prev, t)) throw ValidationError("tag " + t + " cannot follow " + prev);
        prev = t;
    }
}

std::vector<EntitySpan> bio_spans(const std::vector<std::string>& tags) {
    std::vector<EntitySpan> out;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i].starts_with("B-") || (tags[i].starts_with("I-") && (i == 0 || !allowed_after(tags[i - 1], tags[i])))) {
            EntitySpan s{i, i + 1, entity_type_of(tags[i])};
            while (s.end < tags.size() && tags[s.end].starts_with("I-") && entity_type_of(tags[s.end]) == s.type) ++s.end;
            out.push_back(std::move(s));
            i = out.back().end - 1;
        }
    }
    return out;
}

TaggedSequence reference_tag(const Surfaces& tokens, const EntityLexicon& lexicon) {
    TaggedSequence seq{tokens, std::vector<std::string>(tokens.size(), "O")};
    for (const auto& span : lexicon.match(tokens)) {
        seq.tags[span.begin] = "B-" + span.type;
        for (std::size_t i = span.begin + 1; i < span.end; ++i) seq.tags[i] = "I-" + span.type;
    }
    return seq;
}

std::vector<TaggedSequence> reference_tag(const Corpus& corpus, const EntityLexicon& lexicon) {
    if (lexicon.empty()) throw ValidationError("reference tagging needs a non-empty lexicon");
    std::vector<TaggedSequence> out;
    for (const auto& seq : tokenize_corpus(corpus)) out.push_back(reference_tag(seq.surfaces(), lexicon));
    return out;
}

namespace {

std::vector<std::string> tagger_features(const Surfaces& toks, std::size_t i, const std::string& prev) {
    auto at = [&](long k) -> std::string {
        const long j = static_cast<long>(i) + k;
        if (j < 0) return "<s>";
        if (j >= static_cast<long>(toks.size())) return "</s>";
        return toks[static_cast<std::size_t>(j)];
    };
    const std::string& w = toks[i];
    const Token t = make_token(w);
    std::vector<std::string> f;
    f.reserve(14);
    f.emplace_back("bias");
    f.push_back("w:" + w);
    f.push_back("w-1:" + at(-1));
    f.push_back("w+1:" + at(1));
    f.push_back("w-2:" + at(-2));
    f.push_back("w+2:" + at(2));
    f.push_back("s3:" + (w.size() > 3 ? w.substr(w.size() - 3) : w));
    f.push_back("p3:" + w.substr(0, 3));
    f.push_back(std::string("f:") + (t.is_punctuation ? "p" : t.is_stopword ? "s" : "w"));
    f.push_back("t-1:" + prev);
    f.push_back("t-1w:" + prev + "|" + w);
    f.push_back("w-1w:" + at(-1) + "|" + w);
    f.push_back("ww+1:" + w + "|" + at(1));
    return f;
}

std::size_t best_tag(const std::unordered_map<std::string, std::vector<double>>& weights,
                     const std::vector<std::string>& feats, const std::vector<std::string>& tags,
                     const std::string& prev) {
    std::vector<double> score(tags.size(), 0.0);
    for (const auto& f : feats)
        if (auto it = weights.find(f); it != weights.end())
            for (std::size_t t = 0; t < tags.size(); ++t) score[t] += it->second[t];
    std::size_t best = 0;  // "O" is always index 0 and always allowed
    for (std::size_t t = 1; t < tags.size(); ++t)
        if (allowed_after(prev, tags[t]) && score[t] > score[best]) best = t;
    return best;
}

}  // namespace

std::vector<std::string> Tagger::predict(const Surfaces& tokens) const {
    std::vector<std::string> out;
    std::string prev = "O";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto feats = tagger_features(tokens, i, i == 0 ? std::string("<s>") : prev);
        prev = tags_[best_tag(weights_, feats, tags_, prev)];
        out.push_back(prev);
    }
    return out;
}

Tagger train_tagger(std::span<const TaggedSequence> train, const TaggerOptions& options) {
    if (train.empty()) throw ValidationError("tagger needs a non-empty training set");
    std::set<std::string> tagset;
    for (const auto& s : train) {
        s.validate();
        tagset.insert(s.tags.begin(), s.tags.end());
    }
    tagset.erase("O");
    Tagger tagger;
    tagger.tags_.push_back("O");
    tagger.tags_.insert(tagger.tags_.end(), tagset.begin(), tagset.end());
    const auto& tags = tagger.tags_;
    std::unordered_map<std::string, std::size_t> tag_index;
    for (std::size_t i = 0; i < tags.size(); ++i) tag_index[tags[i]] = i;

    struct Cell {
        std::vector<double> w, total;
        std::vector<std::uint64_t> stamp;
    };
    std::unordered_map<std::string, Cell> cells;
    std::unordered_map<std::string, std::vector<double>> live;  // mirrors cells[].w for scoring
    std::uint64_t clock = 0;
    auto update = [&](const std::string& f, std::size_t t, double delta) {
        auto& c = cells[f];
        if (c.w.empty()) {
            c.w.assign(tags.size(), 0.0);
            c.total.assign(tags.size(), 0.0);
            c.stamp.assign(tags.size(), 0);
            live[f].assign(tags.size(), 0.0);
        }
        c.total[t] += static_cast<double>(clock - c.stamp[t]) * c.w[t];
        c.stamp[t] = clock;
        c.w[t] += delta;
        live[f][t] = c.w[t];
    };

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        Rng rng(options.seed + epoch);
        rng.shuffle(std::span(order));
        for (std::size_t idx : order) {
            const auto& seq = train[idx];
            std::string prev = "O";
            for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
                ++clock;
                auto feats = tagger_features(seq.tokens, i, i == 0 ? std::string("<s>") : prev);
                const std::size_t guess = best_tag(live, feats, tags, prev);
                const std::size_t gold = tag_index.at(seq.tags[i]);
                if (guess != gold)
                    for (const auto& f : feats) {
                        update(f, gold, 1.0);
                        update(f, guess, -1.0);
                    }
                prev = tags[guess];
            }
        }
    }
    const double n = static_cast<double>(std::max<std::uint64_t>(clock, 1));
    for (auto& [f, c] : cells) {
        std::vector<double> avg(tags.size());
        for (std::size_t t = 0; t < tags.size(); ++t)
            avg[t] = (c.total[t] + static_cast<double>(clock - c.stamp[t]) * c.w[t]) / n;
        tagger.weights_.emplace(f, std::move(avg));
    }
    return tagger;
}

F1Counts tagger_counts(const Tagger& tagger, std::span<const TaggedSequence> test) {
    F1Counts counts;
    for (const auto& seq : test) {
        const auto gold = bio_spans(seq.tags);
        const auto pred = bio_spans(tagger.predict(seq.tokens));
        std::size_t tp = 0;
        for (const auto& p : pred)
            if (std::find(gold.begin(), gold.end(), p) != gold.end()) ++tp;
        counts.tp += tp;
        counts.fp += pred.size() - tp;
        counts.fn += gold.size() - tp;
    }
    return counts;
}

double eval_tagger(const Tagger& tagger, std::span<const TaggedSequence> test) {
    if (test.empty()) throw ValidationError("tagger evaluation needs a non-empty test set");
    return tagger_counts(tagger, test).f1();
}

// ---------------------------------------------------------------- classification

std::vector<LabeledDoc> labeled_docs(const Corpus& corpus, const std::vector<std::string>& label_set) {
    std::vector<LabeledDoc> out;
    for (const auto& doc : corpus.documents) {
        LabeledDoc d{doc.id, tokenize(doc.text, nullptr, doc.id).surfaces(), {}};
        if (doc.labels)
            for (const auto& l : *doc.labels)
                if (std::find(label_set.begin(), label_set.end(), l) != label_set.end()) d.labels.push_back(l);
        out.push_back(std::move(d));
    }
    return out;
}

std::unordered_map<std::string, std::size_t> Classifier::features(const Surfaces& tokens) const {
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : tokens)
        if (!is_punctuation_token(t)) ++tf[t];
    return tf;
}

std::vector<std::pair<std::size_t, double>> Classifier::vectorize(const Surfaces& tokens) const {
    std::map<std::size_t, double> v;
    for (const auto& [t, n] : features(tokens))
        if (auto it = feature_index_.find(t); it != feature_index_.end())
            v[it->second] = static_cast<double>(n) * idf_[it->second];
    double norm = 0.0;
    for (const auto& [i, x] : v) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<std::pair<std::size_t, double>> out(v.begin(), v.end());
    if (norm > 0.0)
        for (auto& [i, x] : out) x /= norm;
    return out;
}

std::vector<double> Classifier::scores(const Surfaces& tokens) const {
    const auto x = vectorize(tokens);
    std::vector<double> out;
    for (std::size_t l = 0; l < labels_.size(); ++l) {
        double z = bias_[l];
        for (const auto& [i, v] : x) z += weights_[l][i] * v;
        out.push_back(1.0 / (1.0 + std::exp(-z)));
    }
    return out;
}

std::vector<std::string> Classifier::predict(const Surfaces& tokens) const {
    const auto s = scores(tokens);
    std::vector<std::string> out;
    for (std::size_t l = 0; l < labels_.size(); ++l)
        if (s[l] >= 0.5) out.push_back(labels_[l]);
    return out;
}

Classifier train_classifier(std::span<const LabeledDoc> train, const std::vector<std::string>& labels,
                            const ClassifierOptions& options) {
    if (train.empty()) throw ValidationError("classifier needs a non-empty training set");
    if (labels.empty()) throw ValidationError("classifier needs at least one label");
    for (const auto& l : labels) {
        const bool any = std::any_of(train.begin(), train.end(), [&](const LabeledDoc& d) {
            return std::find(d.labels.begin(), d.labels.end(), l) != d.labels.end();
        });
        if (!any) throw ValidationError("label '" + l + "' has no positive training example");
    }

    Classifier clf;
    clf.labels_ = labels;
    std::map<std::string, std::size_t> df;
    for (const auto& d : train)
        for (const auto& [t, n] : clf.features(d.tokens)) ++df[t];
    const double N = static_cast<double>(train.size());
    for (const auto& [t, n] : df) {
        clf.feature_index_.emplace(t, clf.idf_.size());
        clf.idf_.push_back(std::log((1.0 + N) / (1.0 + static_cast<double>(n))) + 1.0);
    }
    clf.weights_.assign(labels.size(), std::vector<double>(clf.idf_.size(), 0.0));
    clf.bias_.assign(labels.size(), 0.0);

    std::vector<std::vector<std::pair<std::size_t, double>>> xs;
    for (const auto& d : train) xs.push_back(clf.vectorize(d.tokens));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        Rng rng(options.seed + epoch);
        rng.shuffle(std::span(order));
        for (std::size_t idx : order) {
            const auto& x = xs[idx];
            for (std::size_t l = 0; l < labels.size(); ++l) {
                const auto& dl = train[idx].labels;
                const double y = std::find(dl.begin(), dl.end(), labels[l]) != dl.end() ? 1.0 : 0.0;
                double z = clf.bias_[l];
                for (const auto& [i, v] : x) z += clf.weights_[l][i] * v;
                const double g = 1.0 / (1.0 + std::exp(-z)) - y;
                for (const auto& [i, v] : x)
                    clf.weights_[l][i] -= options.learning_rate * (g * v + options.l2 * clf.weights_[l][i]);
                clf.bias_[l] -= options.learning_rate * g;
            }
        }
    }
    return clf;
}

F1Counts classifier_counts(const Classifier& clf, std::span<const LabeledDoc> test) {
    F1Counts c;
    for (const auto& d : test) {
        const auto pred = clf.predict(d.tokens);
        for (const auto& l : clf.labels()) {
            const bool p = std::find(pred.begin(), pred.end(), l) != pred.end();
            const bool g = std::find(d.labels.begin(), d.labels.end(), l) != d.labels.end();
            c.tp += p && g;
            c.fp += p && !g;
            c.fn += !p && g;
        }
    }
    return c;
}

double eval_classifier(const Classifier& clf, std::span<const LabeledDoc> test) {
    if (test.empty()) throw ValidationError("classifier evaluation needs a non-empty test set");
    return classifier_counts(clf, test).f1();
}

// ---------------------------------------------------------------- authorship

namespace {

std::map<std::u32string, double> trigram_profile(std::string_view text) {
    const auto cps = utf8::decode(text);
    std::map<std::u32string, double> p;
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) p[cps.substr(i, 3)] += 1.0;
    return p;
}

}  // namespace

double stylometric_similarity(std::string_view a, std::string_view b) {
    const auto pa = trigram_profile(a), pb = trigram_profile(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [g, x] : pa) {
        na += x * x;
        if (auto it = pb.find(g); it != pb.end()) dot += x * it->second;
    }
    for (const auto& [g, y] : pb) nb += y * y;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nb)));
}

AuthorPair verify_pair(std::string_view a, std::string_view b, double threshold) {
    if (utf8::code_points(a) < 20 || utf8::code_points(b) < 20)
        throw ValidationError("authorship verification needs texts of at least 20 characters");
    AuthorPair p{std::string(a), std::string(b), false, stylometric_similarity(a, b)};
    p.predicted_same = p.score >= threshold;
    return p;
}

double calibrate_threshold(std::span<const LabeledScore> calibration) {
    if (calibration.empty()) throw ValidationError("threshold calibration needs labelled pairs");
    std::vector<double> candidates;
    for (const auto& c : calibration) candidates.push_back(c.score);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    candidates.push_back(std::nextafter(candidates.back(), 2.0));
    double best_t = candidates.front();
    std::size_t best_correct = 0;
    for (double t : candidates) {
        std::size_t correct = 0;
        for (const auto& c : calibration) correct += ((c.score >= t) == c.same_author) ? 1 : 0;
        if (correct > best_correct) {
            best_correct = correct;
            best_t = t;
        }
    }
    return best_t;
}

double consistency_rate(std::span<const AuthorPair> pairs, std::span<const std::string> regenerated_b,
                        double threshold) {
    if (pairs.empty()) throw ValidationError("consistency rate needs at least one pair");
    if (pairs.size() != regenerated_b.size()) throw ValidationError("one regenerated text per pair is required");
    std::size_t kept = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!pairs[i].predicted_same) throw ContractError("consistency rate takes only pairs predicted as same author");
        kept += stylometric_similarity(pairs[i].text_a, regenerated_b[i]) >= threshold ? 1 : 0;
    }
    return static_cast<double>(kept) / static_cast<double>(pairs.size());
}

std::vector<DocPair> author_pairs(const Corpus& corpus, std::size_t per_author, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_author;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus.documents[i].author_id) by_author[*corpus.documents[i].author_id].push_back(i);
    Rng rng(seed);
    std::vector<DocPair> same;
    for (const auto& [author, docs] : by_author) {
        std::vector<DocPair> all;
        for (std::size_t x = 0; x < docs.size(); ++x)
            for (std::size_t y = x + 1; y < docs.size(); ++y) all.push_back({docs[x], docs[y], true});
        rng.shuffle(std::span(all));
        if (all.size() > per_author) all.resize(per_author);
        same.insert(same.end(), all.begin(), all.end());
    }
    std::vector<std::size_t> authored;
    for (const auto& [a, docs] : by_author) authored.insert(authored.end(), docs.begin(), docs.end());
    std::vector<DocPair> out = same;
    if (by_author.size() >= 2) {
        for (const auto& p : same) {
            std::size_t b;
            do {
                b = authored[rng.below(authored.size())];
            } while (corpus.documents[b].author_id == corpus.documents[p.a].author_id);
            out.push_back({p.a, b, false});
        }
    }
    return out;
}

nlohmann::ordered_json DownstreamResult::to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["model_id"] = model_id;
    j["strategy"] = strategy;
    j["ratio"] = ratio ? nlohmann::ordered_json(*ratio) : nlohmann::ordered_json(nullptr);
    j["score"] = score;
    j["n_train"] = n_train;
    j["n_test"] = n_test;
    return j;
}

}  // namespace maskgen
