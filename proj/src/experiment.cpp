#include "maskgen/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "maskgen/corpus.hpp"
#include "maskgen/error.hpp"
#include "maskgen/metrics.hpp"
#include "maskgen/ngram.hpp"
#include "maskgen/remote.hpp"
#include "maskgen/rng.hpp"
#include "maskgen/utf8.hpp"

namespace maskgen {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(DownstreamTask task) {
    switch (task) {
        case DownstreamTask::none: return "none";
        case DownstreamTask::ner: return "ner";
        case DownstreamTask::classification: return "classification";
        case DownstreamTask::authorship: return "authorship";
    }
    return "none";
}

DownstreamTask parse_downstream_task(std::string_view text) {
    if (text == "none") return DownstreamTask::none;
    if (text == "ner") return DownstreamTask::ner;
    if (text == "classification") return DownstreamTask::classification;
    if (text == "authorship") return DownstreamTask::authorship;
    throw ValidationError("unknown downstream task '" + std::string(text) + "'");
}

nlohmann::ordered_json PredictorSpec::to_json() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["regime"] = to_string(regime);
    if (kind == Kind::remote) {
        j["kind"] = "remote";
        j["endpoint"] = endpoint;
    } else {
        j["kind"] = "ngram";
        j["order"] = order;
        j["smoothing"] = smoothing;
        j["min_count"] = min_count;
        if (regime == Regime::clm) j["context_bonus"] = context_bonus;
    }
    return j;
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (experiment_id.empty()) throw ValidationError("experiment_id must not be empty");
    if (sample_cap < 1) throw ValidationError("sample_cap must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must be in (0, 1)");
    if (datasets.empty()) throw ValidationError("config lists no datasets");
    if (predictors.empty()) throw ValidationError("config lists no predictors");
    if (regimes.empty()) throw ValidationError("config lists no regimes");
    std::set<std::string> names;
    for (const auto& d : datasets) {
        if (d.name.empty()) throw ValidationError("dataset without a name");
        if (!names.insert(d.name).second) throw ValidationError("duplicate dataset '" + d.name + "'");
        if (d.downstream == DownstreamTask::ner && !d.lexicon)
            throw ValidationError("dataset '" + d.name + "' runs ner downstream without a lexicon");
    }
    std::set<std::string> ids;
    for (const auto& p : predictors) {
        if (p.id.empty()) throw ValidationError("predictor without an id");
        if (!ids.insert(p.id).second) throw ValidationError("duplicate predictor id '" + p.id + "'");
        if (p.kind == PredictorSpec::Kind::ngram && (p.order < 1 || !(p.smoothing > 0.0)))
            throw ValidationError("predictor '" + p.id + "' needs order >= 1 and smoothing > 0");
        if (p.kind == PredictorSpec::Kind::remote && p.endpoint.empty())
            throw ValidationError("remote predictor '" + p.id + "' has no endpoint");
    }
    for (const auto& s : strategies) {
        if (s == "random") continue;
        (void)MaskingStrategy::parse(s);
    }
    for (double r : ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("ratio " + format_number(r) + " outside [0, 1]");
    decode.validate();
    downstream.decode.validate();
}

std::vector<MaskingStrategy> ExperimentConfig::cell_strategies(Regime regime) const {
    std::vector<MaskingStrategy> out;
    for (const auto& s : strategies) {
        if (s != "random") {
            out.push_back(MaskingStrategy::parse(s));
            continue;
        }
        for (double r : ratios) {
            if (regime == Regime::clm && !clm_full_mask && r == 1.0) continue;
            out.push_back(MaskingStrategy::random(r));
        }
    }
    return out;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

DecodePolicy parse_decode(const json& d, DecodePolicy p) {
    const auto mode = get_or<std::string>(d, "mode", p.mode == DecodePolicy::Mode::greedy ? "greedy" : "sample");
    if (mode != "greedy" && mode != "sample") throw ValidationError("decode mode must be greedy or sample");
    p.mode = mode == "greedy" ? DecodePolicy::Mode::greedy : DecodePolicy::Mode::sample;
    p.temperature = get_or<double>(d, "temperature", p.temperature);
    p.top_k = get_or<std::size_t>(d, "top_k", p.top_k);
    p.length_cap_factor = get_or<double>(d, "length_cap_factor", p.length_cap_factor);
    p.no_repeat_trigram = get_or<bool>(d, "no_repeat_trigram", p.no_repeat_trigram);
    return p;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
    if (!j.contains("version")) throw ValidationError("experiment config has no version");
    if (j.at("version") != kExperimentConfigVersion)
        throw ValidationError("unsupported experiment config version " + j.at("version").dump());
    static const std::set<std::string> known{"version",    "experiment_id", "output_dir",    "cache_dir",  "base_seed",
                                             "sample_cap", "train_fraction", "datasets",     "predictors", "regimes",
                                             "strategies", "ratios",         "clm_full_mask", "decode",    "downstream",
                                             "threads"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");

    ExperimentConfig c;
    try {
        c.experiment_id = get_or<std::string>(j, "experiment_id", c.experiment_id);
        c.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "out"));
        if (j.contains("cache_dir")) c.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());
        c.base_seed = get_or<std::uint64_t>(j, "base_seed", 0);
        c.sample_cap = get_or<std::size_t>(j, "sample_cap", c.sample_cap);
        c.train_fraction = get_or<double>(j, "train_fraction", c.train_fraction);
        c.threads = get_or<std::size_t>(j, "threads", 0);
        c.clm_full_mask = get_or<bool>(j, "clm_full_mask", false);
        for (const auto& d : j.at("datasets")) {
            DatasetSpec ds;
            ds.name = d.at("name").get<std::string>();
            ds.path = resolve(base_dir, d.at("path").get<std::string>());
            if (d.contains("lexicon")) ds.lexicon = resolve(base_dir, d.at("lexicon").get<std::string>());
            ds.downstream = parse_downstream_task(get_or<std::string>(d, "downstream", "none"));
            c.datasets.push_back(std::move(ds));
        }
        for (const auto& p : j.at("predictors")) {
            PredictorSpec ps;
            ps.id = p.at("id").get<std::string>();
            ps.regime = parse_regime(p.at("regime").get<std::string>());
            const auto kind = get_or<std::string>(p, "kind", "ngram");
            if (kind == "remote") {
                ps.kind = PredictorSpec::Kind::remote;
                ps.endpoint = p.at("endpoint").get<std::string>();
            } else if (kind == "ngram") {
                ps.order = get_or<std::size_t>(p, "order", ps.order);
                ps.smoothing = get_or<double>(p, "smoothing", ps.smoothing);
                ps.min_count = get_or<std::size_t>(p, "min_count", ps.min_count);
                ps.context_bonus = get_or<double>(p, "context_bonus", ps.context_bonus);
            } else {
                throw ValidationError("unknown predictor kind '" + kind + "'");
            }
            c.predictors.push_back(std::move(ps));
        }
        if (j.contains("regimes")) {
            c.regimes.clear();
            for (const auto& r : j.at("regimes")) c.regimes.push_back(parse_regime(r.get<std::string>()));
        }
        if (j.contains("strategies")) c.strategies = j.at("strategies").get<std::vector<std::string>>();
        if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::vector<double>>();
        if (j.contains("decode")) c.decode = parse_decode(j.at("decode"), c.decode);
        if (j.contains("downstream")) {
            const auto& d = j.at("downstream");
            c.downstream.enabled = get_or<bool>(d, "enabled", true);
            c.downstream.top_k_labels = get_or<std::size_t>(d, "top_k_labels", c.downstream.top_k_labels);
            c.downstream.pairs_per_author = get_or<std::size_t>(d, "pairs_per_author", c.downstream.pairs_per_author);
            c.downstream.tagger.epochs = get_or<std::size_t>(d, "tagger_epochs", c.downstream.tagger.epochs);
            c.downstream.classifier.epochs = get_or<std::size_t>(d, "classifier_epochs", c.downstream.classifier.epochs);
            if (d.contains("decode")) c.downstream.decode = parse_decode(d.at("decode"), c.downstream.decode);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed experiment config: ") + e.what());
    }
    c.decode.seed = c.base_seed;
    c.downstream.decode.seed = c.base_seed;
    c.downstream.tagger.seed = c.base_seed;
    c.downstream.classifier.seed = c.base_seed;
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_experiment_config(j, path.parent_path());
}

// ---------------------------------------------------------------- generation

std::uint64_t cell_seed(std::uint64_t base_seed, std::string_view doc_id, Regime regime, std::string_view predictor_id,
                        const MaskingStrategy& strategy) {
    StableHasher h;
    h.add_u64(base_seed).add(doc_id).add(to_string(regime)).add(predictor_id).add(strategy.name());
    h.add(strategy.ratio ? format_number(*strategy.ratio) : std::string());
    return h.finish();
}

GenerationRecord generate_document(const TokenSequence& doc, Regime regime, MaskedPredictor* mlm, CausalPredictor* clm,
                                   const MaskingStrategy& strategy, std::uint64_t seed, DecodePolicy policy) {
    policy.seed = seed;
    const MaskedSequence masked = corrupt(doc, strategy, seed);
    if (regime == Regime::mlm) {
        if (!mlm) throw ContractError("mlm generation needs a masked predictor");
        return infill(masked, *mlm, policy);
    }
    if (!clm) throw ContractError("clm generation needs a causal predictor");
    auto record = generate_causal(extract_context(masked), doc.size(), *clm, policy);
    record.seed = seed;
    return record;
}

double ner_harness(std::span<const Surfaces> synthetic, std::span<const TaggedSequence> test,
                   const EntityLexicon& lexicon, const TaggerOptions& options) {
    std::vector<TaggedSequence> train;
    for (const auto& s : synthetic)
        if (!s.empty()) train.push_back(reference_tag(s, lexicon));
    if (train.empty()) throw ValidationError("no non-empty synthetic text to train the tagger on");
    return eval_tagger(train_tagger(train, options), test);
}

namespace {

/// Runs fn(i) for i in [0, n), on worker threads when `threads` > 1.
/// Exceptions are captured per index and the lowest-index one is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) guarded(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, n); ++t)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) guarded(i);
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_safe(std::string s) {
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '-';
    return s;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Predictors {
    std::unique_ptr<MaskedPredictor> mlm;
    std::unique_ptr<CausalPredictor> clm;
    bool thread_safe() const { return mlm ? mlm->thread_safe() : clm->thread_safe(); }
};

Predictors build_predictor(const PredictorSpec& spec, const Corpus& train, const EntityLexicon* lexicon) {
    Predictors p;
    if (spec.kind == PredictorSpec::Kind::remote) {
        if (spec.regime == Regime::mlm)
            p.mlm = remote_masked_predictor(spec.endpoint, spec.id);
        else
            p.clm = remote_causal_predictor(spec.endpoint, spec.id);
        return p;
    }
    NGramOptions o{spec.order, spec.smoothing, spec.min_count, spec.context_bonus};
    if (spec.regime == Regime::mlm)
        p.mlm = std::make_unique<BidirNGram>(BidirNGram::train(train, o, lexicon));
    else
        p.clm = std::make_unique<CausalNGram>(CausalNGram::train(train, o, lexicon));
    return p;
}

/// GenerationRecords of one grid cell, persisted as JSON lines.
class CellCache {
public:
    explicit CellCache(fs::path file) : file_(std::move(file)) {
        std::ifstream in(file_);
        if (!in) return;
        std::string line;
        try {
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto r = GenerationRecord::from_json(json::parse(line));
                records_.insert_or_assign(r.doc_id, std::move(r));
            }
        } catch (const std::exception&) {
            records_.clear();  // unreadable cache: regenerate everything
        }
    }

    const GenerationRecord* find(const std::string& doc_id) const {
        auto it = records_.find(doc_id);
        return it == records_.end() ? nullptr : &it->second;
    }

    void store(const std::vector<GenerationRecord>& records) {
        fs::create_directories(file_.parent_path());
        const fs::path tmp = file_.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write cache file " + tmp.string());
            for (const auto& r : records) out << r.to_json().dump() << '\n';
        }
        fs::rename(tmp, file_);
    }

private:
    fs::path file_;
    std::map<std::string, GenerationRecord> records_;
};

struct DatasetState {
    const DatasetSpec* spec = nullptr;
    std::string experiment_id;
    Corpus train, test;
    std::vector<TokenSequence> eval_docs;        // capped test split
    std::vector<TokenSequence> synth_docs;       // capped train split, for downstream training
    std::optional<EntityLexicon> lexicon;
    EmbeddingTable embeddings;
    std::uint64_t fingerprint = 0;
};

class Runner {
public:
    explicit Runner(const ExperimentConfig& config) : c_(config) {
        if (const char* env = std::getenv(kCacheDirEnv); env && *env)
            cache_root_ = env;
        else
            cache_root_ = c_.cache_dir ? *c_.cache_dir : c_.output_dir / "cache";
        threads_ = c_.threads ? c_.threads : std::max(1u, std::thread::hardware_concurrency());
    }

    RunSummary run() {
        for (const auto& ds : c_.datasets) run_dataset(ds);
        return std::move(summary_);
    }

private:
    const ExperimentConfig& c_;
    fs::path cache_root_;
    std::size_t threads_ = 1;
    RunSummary summary_;

    void row(const DatasetState& ds, std::string regime, std::string predictor, const MaskingStrategy* strategy,
             std::string metric, double value, std::size_t n_docs) {
        ResultRow r;
        r.experiment_id = ds.experiment_id;
        r.regime = std::move(regime);
        r.predictor_id = std::move(predictor);
        r.strategy = strategy ? strategy->name() : "original";
        r.ratio = strategy ? strategy->ratio : std::nullopt;
        r.metric_name = std::move(metric);
        r.value = value;
        r.n_docs = n_docs;
        r.seed = c_.base_seed;
        summary_.table.add(std::move(r));
    }

    void error_row(const DatasetState& ds, std::string regime, std::string predictor, const MaskingStrategy* strategy,
                   const std::string& message) {
        std::string where = ds.experiment_id + " " + regime + " " + predictor;
        if (strategy) where += " " + strategy->to_string();
        summary_.errors.push_back(where + ": " + message);
        ++summary_.error_rows;
        row(ds, std::move(regime), std::move(predictor), strategy, "error", std::nan(""), 0);
    }

    void run_dataset(const DatasetSpec& spec) {
        DatasetState ds;
        ds.spec = &spec;
        ds.experiment_id = c_.experiment_id + "-" + spec.name;
        Corpus corpus = load_corpus(spec.path);
        corpus.name = spec.name;
        StableHasher fp;
        fp.add(read_file(spec.path));
        if (spec.lexicon) {
            const auto text = read_file(*spec.lexicon);
            ds.lexicon = EntityLexicon::parse_tsv(text);
            fp.add(text);
        }
        fp.add_u64(c_.base_seed).add(format_number(c_.train_fraction));
        ds.fingerprint = fp.finish();
        std::tie(ds.train, ds.test) = split_corpus(corpus, SplitSpec{c_.train_fraction, c_.base_seed});
        if (ds.test.empty()) throw ValidationError("dataset '" + spec.name + "' has no test documents after the split");
        const EntityLexicon* lex = ds.lexicon ? &*ds.lexicon : nullptr;
        for (std::size_t i = 0; i < std::min(c_.sample_cap, ds.test.size()); ++i) {
            const auto& d = ds.test.documents[i];
            ds.eval_docs.push_back(tokenize(d.text, lex, d.id));
        }
        const bool synth = c_.downstream.enabled &&
                           (spec.downstream == DownstreamTask::ner || spec.downstream == DownstreamTask::classification);
        if (synth)
            for (std::size_t i = 0; i < std::min(c_.sample_cap, ds.train.size()); ++i) {
                const auto& d = ds.train.documents[i];
                ds.synth_docs.push_back(tokenize(d.text, lex, d.id));
            }
        ds.embeddings = train_embeddings(ds.train, 64, 2, c_.base_seed);

        if (c_.downstream.enabled && spec.downstream != DownstreamTask::none) {
            try {
                real_baseline(ds);
            } catch (const Error& e) {
                error_row(ds, "real", "none", nullptr, e.what());
            }
        }

        for (const auto& pspec : c_.predictors) {
            if (std::find(c_.regimes.begin(), c_.regimes.end(), pspec.regime) == c_.regimes.end()) continue;
            const auto strategies = cells_for(ds, pspec.regime);
            Predictors model;
            try {
                model = build_predictor(pspec, ds.train, lex);
            } catch (const Error& e) {
                for (const auto& s : strategies) error_row(ds, to_string(pspec.regime), pspec.id, &s, e.what());
                continue;
            }
            for (const auto& s : strategies) {
                try {
                    run_cell(ds, pspec, model, s);
                } catch (const Error& e) {
                    error_row(ds, to_string(pspec.regime), pspec.id, &s, e.what());
                }
            }
        }
    }

    std::vector<MaskingStrategy> cells_for(const DatasetState& ds, Regime regime) const {
        auto all = c_.cell_strategies(regime);
        // entity-keeping masks need a lexicon to know what an entity is
        if (!ds.lexicon)
            std::erase_if(all, [](const MaskingStrategy& s) { return s.kind == MaskingStrategy::Kind::keep_entities; });
        return all;
    }

    std::vector<GenerationRecord> generate(const DatasetState& ds, const PredictorSpec& pspec, Predictors& model,
                                           const MaskingStrategy& strategy, const std::vector<TokenSequence>& docs,
                                           const DecodePolicy& d, const std::string& tag) {
        StableHasher key;
        key.add_u64(ds.fingerprint).add(pspec.to_json().dump()).add(strategy.to_string());
        key.add(d.mode == DecodePolicy::Mode::greedy ? "greedy" : "sample")
            .add(format_number(d.temperature))
            .add_u64(d.top_k)
            .add(format_number(d.length_cap_factor))
            .add_u64(d.no_repeat_trigram);
        auto name = tag + "_" + to_string(pspec.regime) + "_" + pspec.id + "_" + strategy.to_string();
        CellCache cache(cache_root_ / file_safe(ds.experiment_id) / (file_safe(name) + "_" + hex64(key.finish()) + ".jsonl"));

        std::vector<GenerationRecord> out(docs.size());
        std::vector<std::size_t> todo;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (const auto* hit = cache.find(docs[i].doc_id)) {
                out[i] = *hit;
                ++summary_.cache_hits;
            } else {
                todo.push_back(i);
            }
        }
        if (todo.empty()) return out;
        parallel_for(todo.size(), model.thread_safe() ? threads_ : 1, [&](std::size_t k) {
            const auto& doc = docs[todo[k]];
            const auto seed = cell_seed(c_.base_seed, doc.doc_id, pspec.regime, pspec.id, strategy);
            out[todo[k]] = generate_document(doc, pspec.regime, model.mlm.get(), model.clm.get(), strategy, seed, d);
        });
        summary_.generated += todo.size();
        cache.store(out);
        return out;
    }

    void run_cell(DatasetState& ds, const PredictorSpec& pspec, Predictors& model, const MaskingStrategy& strategy) {
        const auto records = generate(ds, pspec, model, strategy, ds.eval_docs, c_.decode, "eval");
        const std::string regime = to_string(pspec.regime);

        std::vector<std::string> ids;
        std::vector<Surfaces> cands, refs;
        for (std::size_t i = 0; i < ds.eval_docs.size(); ++i) {
            ids.push_back(ds.eval_docs[i].doc_id);
            cands.push_back(records[i].output_surfaces());
            refs.push_back(ds.eval_docs[i].surfaces());
        }
        const auto report = evaluate(ids, cands, refs, ds.embeddings);
        row(ds, regime, pspec.id, &strategy, "bleu", report.corpus.bleu, report.n_docs);
        row(ds, regime, pspec.id, &strategy, "meteor", report.corpus.meteor, report.n_docs);
        row(ds, regime, pspec.id, &strategy, "rouge1", report.corpus.rouge1, report.n_docs);
        row(ds, regime, pspec.id, &strategy, "semscore", report.corpus.semscore, report.n_docs);

        if (!c_.downstream.enabled || ds.spec->downstream == DownstreamTask::none) return;
        std::vector<GenerationRecord> synth;
        if (!ds.synth_docs.empty())
            synth = generate(ds, pspec, model, strategy, ds.synth_docs, c_.downstream.decode, "synth");
        try {
            downstream_cell(ds, pspec.id, regime, &strategy, records, synth);
        } catch (const Error& e) {
            error_row(ds, regime, pspec.id + "/" + to_string(ds.spec->downstream), &strategy, e.what());
        }
    }

    // ---- downstream

    std::vector<TaggedSequence> tagged_test(const DatasetState& ds) const {
        std::vector<TaggedSequence> out;
        for (const auto& d : ds.eval_docs) out.push_back(reference_tag(d.surfaces(), *ds.lexicon));
        return out;
    }

    std::vector<LabeledDoc> labeled(const DatasetState& ds, const std::vector<TokenSequence>& docs,
                                    const std::vector<Surfaces>& texts, const Corpus& source,
                                    const std::vector<std::string>& labels) const {
        std::map<std::string, const Document*> by_id;
        for (const auto& d : source.documents) by_id.emplace(d.id, &d);
        std::vector<LabeledDoc> out;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            LabeledDoc l{docs[i].doc_id, texts[i], {}};
            const auto* src = by_id.at(docs[i].doc_id);
            if (src->labels)
                for (const auto& x : *src->labels)
                    if (std::find(labels.begin(), labels.end(), x) != labels.end()) l.labels.push_back(x);
            out.push_back(std::move(l));
        }
        (void)ds;
        return out;
    }

    struct AuthorSetup {
        double threshold = 0.0;
        std::vector<std::pair<std::size_t, std::size_t>> same_pairs;  // indices into eval_docs
    };

    static std::string normalized(const TokenSequence& seq) { return detokenize(seq); }

    AuthorSetup author_setup(const DatasetState& ds) const {
        AuthorSetup s;
        std::vector<LabeledScore> calib;
        std::vector<std::string> texts;
        for (const auto& d : ds.train.documents) texts.push_back(detokenize(tokenize(d.text, nullptr, d.id)));
        for (const auto& p : author_pairs(ds.train, c_.downstream.pairs_per_author, c_.base_seed))
            calib.push_back({stylometric_similarity(texts[p.a], texts[p.b]), p.same_author});
        s.threshold = calibrate_threshold(calib);

        Corpus capped{ds.test.name, {}};
        for (const auto& d : ds.eval_docs) {
            auto it = std::find_if(ds.test.documents.begin(), ds.test.documents.end(),
                                   [&](const Document& x) { return x.id == d.doc_id; });
            capped.documents.push_back(*it);
        }
        for (const auto& p : author_pairs(capped, c_.downstream.pairs_per_author, c_.base_seed + 1)) {
            if (!p.same_author) continue;
            const auto a = normalized(ds.eval_docs[p.a]), b = normalized(ds.eval_docs[p.b]);
            if (utf8::code_points(a) < 20 || utf8::code_points(b) < 20) continue;
            if (verify_pair(a, b, s.threshold).predicted_same) s.same_pairs.emplace_back(p.a, p.b);
        }
        return s;
    }

    void real_baseline(DatasetState& ds) {
        DownstreamResult res{to_string(ds.spec->downstream), "real", "original", std::nullopt, 0.0, 0,
                             ds.eval_docs.size()};
        std::string metric;
        switch (ds.spec->downstream) {
            case DownstreamTask::ner: {
                std::vector<Surfaces> real;
                for (const auto& d : ds.synth_docs) real.push_back(d.surfaces());
                res.score = ner_harness(real, tagged_test(ds), *ds.lexicon, c_.downstream.tagger);
                res.n_train = real.size();
                metric = "ner_f1";
                break;
            }
            case DownstreamTask::classification: {
                const auto labels = top_k_labels(ds.train, c_.downstream.top_k_labels);
                std::vector<Surfaces> real, test;
                for (const auto& d : ds.synth_docs) real.push_back(d.surfaces());
                for (const auto& d : ds.eval_docs) test.push_back(d.surfaces());
                const auto train = labeled(ds, ds.synth_docs, real, ds.train, labels);
                const auto clf = train_classifier(train, labels, c_.downstream.classifier);
                res.score = eval_classifier(clf, labeled(ds, ds.eval_docs, test, ds.test, labels));
                res.n_train = train.size();
                metric = "clf_micro_f1";
                break;
            }
            case DownstreamTask::authorship: {
                // verifier accuracy on untouched pairs: the reference point for consistency
                Corpus capped{ds.test.name, {}};
                for (const auto& d : ds.eval_docs)
                    for (const auto& x : ds.test.documents)
                        if (x.id == d.doc_id) capped.documents.push_back(x);
                const auto setup = author_setup(ds);
                std::size_t correct = 0, total = 0;
                for (const auto& p : author_pairs(capped, c_.downstream.pairs_per_author, c_.base_seed + 1)) {
                    const double s =
                        stylometric_similarity(normalized(ds.eval_docs[p.a]), normalized(ds.eval_docs[p.b]));
                    correct += (s >= setup.threshold) == p.same_author;
                    ++total;
                }
                if (total == 0) throw ValidationError("no author pairs in the test split");
                res.score = static_cast<double>(correct) / static_cast<double>(total);
                res.n_train = ds.train.size();
                res.n_test = total;
                metric = "av_accuracy";
                break;
            }
            case DownstreamTask::none: return;
        }
        row(ds, "real", "none", nullptr, metric, res.score, res.n_test);
        summary_.downstream.push_back(std::move(res));
    }

    void downstream_cell(DatasetState& ds, const std::string& predictor, const std::string& regime,
                         const MaskingStrategy* strategy, const std::vector<GenerationRecord>& eval_records,
                         const std::vector<GenerationRecord>& synth) {
        DownstreamResult res{to_string(ds.spec->downstream), regime + ":" + predictor, strategy->name(),
                             strategy->ratio, 0.0, synth.size(), ds.eval_docs.size()};
        std::string metric;
        std::vector<Surfaces> synth_texts;
        for (const auto& r : synth) synth_texts.push_back(r.output_surfaces());
        switch (ds.spec->downstream) {
            case DownstreamTask::ner:
                res.score = ner_harness(synth_texts, tagged_test(ds), *ds.lexicon, c_.downstream.tagger);
                metric = "ner_f1";
                break;
            case DownstreamTask::classification: {
                const auto labels = top_k_labels(ds.train, c_.downstream.top_k_labels);
                std::vector<Surfaces> test;
                for (const auto& d : ds.eval_docs) test.push_back(d.surfaces());
                const auto clf = train_classifier(labeled(ds, ds.synth_docs, synth_texts, ds.train, labels), labels,
                                                  c_.downstream.classifier);
                res.score = eval_classifier(clf, labeled(ds, ds.eval_docs, test, ds.test, labels));
                metric = "clf_micro_f1";
                break;
            }
            case DownstreamTask::authorship: {
                const auto setup = author_setup(ds);
                std::vector<AuthorPair> pairs;
                std::vector<std::string> regenerated;
                for (const auto& [a, b] : setup.same_pairs) {
                    pairs.push_back(
                        verify_pair(normalized(ds.eval_docs[a]), normalized(ds.eval_docs[b]), setup.threshold));
                    regenerated.push_back(detokenize(eval_records[b].output_tokens));
                }
                res.score = consistency_rate(pairs, regenerated, setup.threshold);
                res.n_train = ds.train.size();
                res.n_test = pairs.size();
                metric = "av_consistency";
                break;
            }
            case DownstreamTask::none: return;
        }
        row(ds, regime, predictor, strategy, metric, res.score, res.n_test);
        summary_.downstream.push_back(std::move(res));
    }
};

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config) {
    config.validate();
    return Runner(config).run();
}

}  // namespace maskgen
