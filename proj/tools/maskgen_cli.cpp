// maskgen command line: corpus ingestion, predictor training, corruption,
// generation, scoring, downstream harnesses and the experiment grid.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "maskgen/corpus.hpp"
#include "maskgen/decoder.hpp"
#include "maskgen/downstream.hpp"
#include "maskgen/error.hpp"
#include "maskgen/experiment.hpp"
#include "maskgen/metrics.hpp"
#include "maskgen/ngram.hpp"
#include "maskgen/remote.hpp"

namespace fs = std::filesystem;
using namespace maskgen;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << content)) throw Error("cannot write " + path);
}

std::optional<EntityLexicon> maybe_lexicon(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return EntityLexicon::load_tsv(path);
}

std::vector<GenerationRecord> read_records(const fs::path& path) {
    std::vector<GenerationRecord> out;
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(GenerationRecord::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(e.what(), n);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), n);
        }
    }
    return out;
}

struct Models {
    std::unique_ptr<MaskedPredictor> mlm;
    std::unique_ptr<CausalPredictor> clm;
};

Models load_models(const std::string& model_path, const std::string& endpoint, Regime regime) {
    Models m;
    if (!endpoint.empty()) {
        if (regime == Regime::mlm)
            m.mlm = remote_masked_predictor(endpoint);
        else
            m.clm = remote_causal_predictor(endpoint);
        return m;
    }
    if (model_path.empty()) throw ValidationError("either --model or --endpoint is required");
    const auto j = load_model_json(model_path);
    const auto kind = j.value("kind", std::string());
    if (kind == "bidir" && regime == Regime::mlm)
        m.mlm = std::make_unique<BidirNGram>(BidirNGram::from_json(j));
    else if (kind == "causal" && regime == Regime::clm)
        m.clm = std::make_unique<CausalNGram>(CausalNGram::from_json(j));
    else
        throw ValidationError("model kind '" + kind + "' does not serve regime " + to_string(regime));
    return m;
}

std::map<std::string, const Document*> index_docs(const Corpus& c) {
    std::map<std::string, const Document*> m;
    for (const auto& d : c.documents) m.emplace(d.id, &d);
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maskgen: masked and causal regeneration of text corpora"};
    app.require_subcommand(1);

    // ingest
    std::string in_path, in_format = "jsonl", out_path, corpus_name;
    auto* ingest = app.add_subcommand("ingest", "Load and validate a corpus; print a summary, optionally re-save as JSONL");
    ingest->add_option("input", in_path, "JSONL file or directory of .txt files")->required();
    ingest->add_option("--format", in_format, "jsonl or plain_dir");
    ingest->add_option("--name", corpus_name, "Corpus name");
    ingest->add_option("-o,--out", out_path, "Write the normalised corpus here");

    // train-predictor
    std::string corpus_path, lexicon_path, regime_name = "mlm";
    NGramOptions ngram;
    auto* train = app.add_subcommand("train-predictor", "Train an n-gram predictor and save it as JSON");
    train->add_option("corpus", corpus_path, "Training corpus (JSONL)")->required();
    train->add_option("--regime", regime_name, "mlm (bidirectional) or clm (causal)");
    train->add_option("--order", ngram.order, "Context tokens per side / history length");
    train->add_option("--smoothing", ngram.smoothing, "Add-lambda constant");
    train->add_option("--min-count", ngram.min_count, "Vocabulary frequency floor");
    train->add_option("--context-bonus", ngram.context_bonus, "Causal context-token boost");
    train->add_option("--lexicon", lexicon_path, "Entity lexicon TSV");
    train->add_option("-o,--out", out_path, "Model file")->required();

    // corrupt
    std::string strategy_text = "random:0.5";
    std::uint64_t seed = 0;
    auto* corrupt_cmd = app.add_subcommand("corrupt", "Mask documents and print prompts and CLM contexts as JSONL");
    corrupt_cmd->add_option("corpus", corpus_path, "Corpus (JSONL)")->required();
    corrupt_cmd->add_option("--strategy", strategy_text, "random:<r>, stopwords, punctuation, stopwords_punctuation, ner");
    corrupt_cmd->add_option("--seed", seed, "Base seed");
    corrupt_cmd->add_option("--lexicon", lexicon_path, "Entity lexicon TSV");
    corrupt_cmd->add_option("-o,--out", out_path, "Output file (default stdout)");

    // generate
    std::string model_path, endpoint, decode_mode = "greedy";
    std::size_t limit = 0;
    DecodePolicy policy;
    auto* gen = app.add_subcommand("generate", "Corrupt and regenerate documents; writes GenerationRecords as JSONL");
    gen->add_option("corpus", corpus_path, "Corpus (JSONL)")->required();
    gen->add_option("--regime", regime_name, "mlm or clm");
    gen->add_option("--model", model_path, "Model JSON from train-predictor");
    gen->add_option("--endpoint", endpoint, "Remote predictor: tcp://host:port or exec:<command>");
    gen->add_option("--strategy", strategy_text, "Masking strategy");
    gen->add_option("--seed", seed, "Base seed");
    gen->add_option("--lexicon", lexicon_path, "Entity lexicon TSV");
    gen->add_option("--limit", limit, "Generate at most this many documents (0 = all)");
    gen->add_option("--mode", decode_mode, "greedy or sample");
    gen->add_option("--temperature", policy.temperature, "Sampling temperature");
    gen->add_option("--top-k", policy.top_k, "Candidates per query");
    gen->add_option("--length-cap", policy.length_cap_factor, "CLM length cap factor");
    gen->add_flag("--no-repeat-trigram", policy.no_repeat_trigram, "CLM: forbid repeated trigrams");
    gen->add_option("-o,--out", out_path, "Output file (default stdout)");

    // evaluate
    std::string records_path, embed_path;
    auto* eval = app.add_subcommand("evaluate", "Score GenerationRecords against their source documents");
    eval->add_option("records", records_path, "GenerationRecords JSONL")->required();
    eval->add_option("--corpus", corpus_path, "Reference corpus (JSONL)")->required();
    eval->add_option("--embeddings-corpus", embed_path, "Corpus for SemScore embeddings (default: --corpus)");
    eval->add_option("--seed", seed, "Embedding projection seed");
    eval->add_option("-o,--out", out_path, "Output file (default stdout)");

    // downstream
    std::string task_name, test_path, source_path;
    std::size_t label_count = 5;
    auto* down = app.add_subcommand("downstream", "Train a stand-in model on generated texts and score it on real ones");
    down->add_option("task", task_name, "ner, classification or authorship")->required();
    down->add_option("--records", records_path, "GenerationRecords JSONL (synthetic texts)")->required();
    down->add_option("--source", source_path, "Corpus the records were generated from (labels, authors)");
    down->add_option("--test", test_path, "Real evaluation corpus (ner, classification)");
    down->add_option("--lexicon", lexicon_path, "Entity lexicon TSV (ner)");
    down->add_option("--top-k-labels", label_count, "Labels kept for classification");
    down->add_option("--seed", seed, "Training seed");

    // experiment run
    std::string config_path, override_out;
    std::size_t threads = 0;
    auto* exp = app.add_subcommand("experiment", "Experiment grid");
    exp->require_subcommand(1);
    auto* run = exp->add_subcommand("run", "Run the grid described by a config file and write the report");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", override_out, "Override output_dir");
    run->add_option("--threads", threads, "Worker threads (0 = config / hardware)");

    // report
    std::string csv_path;
    auto* report = app.add_subcommand("report", "Re-render plots from a results.csv");
    report->add_option("results", csv_path, "results.csv")->required();
    report->add_option("-o,--out", out_path, "Output directory (default: next to the CSV)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            Corpus c = load_corpus(in_path, parse_corpus_format(in_format));
            if (!corpus_name.empty()) c.name = corpus_name;
            const auto s = summarize(c);
            ojson j{{"name", c.name},          {"documents", s.documents},       {"labelled", s.labelled},
                    {"with_author", s.with_author}, {"distinct_labels", s.distinct_labels},
                    {"distinct_authors", s.distinct_authors}, {"bytes", s.bytes}};
            std::cout << j.dump(2) << '\n';
            if (!out_path.empty()) save_corpus(c, out_path);
        } else if (*train) {
            const Corpus c = load_corpus(corpus_path);
            const auto lex = maybe_lexicon(lexicon_path);
            const EntityLexicon* lp = lex ? &*lex : nullptr;
            if (parse_regime(regime_name) == Regime::mlm)
                save_model_json(BidirNGram::train(c, ngram, lp).to_json(), out_path);
            else
                save_model_json(CausalNGram::train(c, ngram, lp).to_json(), out_path);
        } else if (*corrupt_cmd) {
            const Corpus c = load_corpus(corpus_path);
            const auto lex = maybe_lexicon(lexicon_path);
            const auto strategy = MaskingStrategy::parse(strategy_text);
            std::string out;
            for (const auto& d : c.documents) {
                const auto seq = tokenize(d.text, lex ? &*lex : nullptr, d.id);
                const auto doc_seed = cell_seed(seed, d.id, Regime::mlm, "corrupt", strategy);
                const auto masked = corrupt(seq, strategy, doc_seed);
                ojson j{{"doc_id", d.id},
                        {"strategy", strategy.to_string()},
                        {"seed", doc_seed},
                        {"masked", masked.masked_count()},
                        {"prompt", masked.prompt()},
                        {"context", extract_context(masked).surfaces()}};
                out += j.dump() + "\n";
            }
            emit(out_path, out);
        } else if (*gen) {
            const Corpus c = load_corpus(corpus_path);
            const auto lex = maybe_lexicon(lexicon_path);
            const auto regime = parse_regime(regime_name);
            const auto strategy = MaskingStrategy::parse(strategy_text);
            if (decode_mode != "greedy" && decode_mode != "sample") throw ValidationError("--mode must be greedy or sample");
            policy.mode = decode_mode == "greedy" ? DecodePolicy::Mode::greedy : DecodePolicy::Mode::sample;
            policy.validate();
            auto models = load_models(model_path, endpoint, regime);
            const std::string pid = models.mlm ? models.mlm->id() : models.clm->id();
            std::string out;
            const std::size_t n = limit ? std::min(limit, c.size()) : c.size();
            for (std::size_t i = 0; i < n; ++i) {
                const auto& d = c.documents[i];
                const auto seq = tokenize(d.text, lex ? &*lex : nullptr, d.id);
                const auto doc_seed = cell_seed(seed, d.id, regime, pid, strategy);
                out += generate_document(seq, regime, models.mlm.get(), models.clm.get(), strategy, doc_seed, policy)
                           .to_json()
                           .dump() +
                       "\n";
            }
            emit(out_path, out);
        } else if (*eval) {
            const auto records = read_records(records_path);
            const Corpus c = load_corpus(corpus_path);
            const auto docs = index_docs(c);
            const auto emb = train_embeddings(embed_path.empty() ? c : load_corpus(embed_path), 64, 2, seed);
            std::vector<std::string> ids;
            std::vector<Surfaces> cands, refs;
            for (const auto& r : records) {
                auto it = docs.find(r.doc_id);
                if (it == docs.end()) throw ValidationError("record for unknown document '" + r.doc_id + "'");
                ids.push_back(r.doc_id);
                cands.push_back(r.output_surfaces());
                refs.push_back(tokenize(it->second->text, nullptr, r.doc_id).surfaces());
            }
            emit(out_path, evaluate(ids, cands, refs, emb).to_json().dump(2) + "\n");
        } else if (*down) {
            const auto task = parse_downstream_task(task_name);
            const auto records = read_records(records_path);
            std::vector<Surfaces> synth;
            for (const auto& r : records) synth.push_back(r.output_surfaces());
            DownstreamResult res{task_name, records.empty() ? "" : records.front().predictor_id,
                                 records.empty() ? "" : records.front().strategy.name(),
                                 records.empty() ? std::nullopt : records.front().strategy.ratio,
                                 0.0, records.size(), 0};
            if (task == DownstreamTask::ner) {
                if (test_path.empty() || lexicon_path.empty()) throw ValidationError("ner needs --test and --lexicon");
                const auto lex = EntityLexicon::load_tsv(lexicon_path);
                const auto test = reference_tag(load_corpus(test_path), lex);
                res.score = ner_harness(synth, test, lex, TaggerOptions{10, seed});
                res.n_test = test.size();
            } else if (task == DownstreamTask::classification) {
                if (test_path.empty() || source_path.empty())
                    throw ValidationError("classification needs --source and --test");
                const Corpus source = load_corpus(source_path);
                const auto labels = top_k_labels(source, label_count);
                const auto docs = index_docs(source);
                std::vector<LabeledDoc> train_docs;
                for (const auto& r : records) {
                    auto it = docs.find(r.doc_id);
                    if (it == docs.end()) throw ValidationError("record for unknown document '" + r.doc_id + "'");
                    LabeledDoc l{r.doc_id, r.output_surfaces(), {}};
                    if (it->second->labels)
                        for (const auto& x : *it->second->labels)
                            if (std::find(labels.begin(), labels.end(), x) != labels.end()) l.labels.push_back(x);
                    train_docs.push_back(std::move(l));
                }
                ClassifierOptions opts;
                opts.seed = seed;
                const auto clf = train_classifier(train_docs, labels, opts);
                const auto test = labeled_docs(load_corpus(test_path), labels);
                res.score = eval_classifier(clf, test);
                res.n_test = test.size();
            } else if (task == DownstreamTask::authorship) {
                if (source_path.empty()) throw ValidationError("authorship needs --source");
                const Corpus source = load_corpus(source_path);
                std::vector<std::string> texts;
                for (const auto& d : source.documents) texts.push_back(detokenize(tokenize(d.text, nullptr, d.id)));
                const auto pairs = author_pairs(source, 3, seed);
                std::vector<LabeledScore> calib;
                for (const auto& p : pairs) calib.push_back({stylometric_similarity(texts[p.a], texts[p.b]), p.same_author});
                const double threshold = calibrate_threshold(calib);
                std::map<std::string, std::string> regen;
                for (const auto& r : records) regen[r.doc_id] = detokenize(r.output_tokens);
                std::vector<AuthorPair> same;
                std::vector<std::string> regenerated;
                for (const auto& p : pairs) {
                    auto it = regen.find(source.documents[p.b].id);
                    if (!p.same_author || it == regen.end()) continue;
                    auto ap = verify_pair(texts[p.a], texts[p.b], threshold);
                    if (!ap.predicted_same) continue;
                    same.push_back(std::move(ap));
                    regenerated.push_back(it->second);
                }
                res.score = consistency_rate(same, regenerated, threshold);
                res.n_test = same.size();
            } else {
                throw ValidationError("task must be ner, classification or authorship");
            }
            std::cout << res.to_json().dump() << '\n';
        } else if (*run) {
            auto config = load_experiment_config(config_path);
            if (!override_out.empty()) config.output_dir = override_out;
            if (threads) config.threads = threads;
            const auto summary = run_experiment(config);
            const auto files = emit_report(summary.table, config.output_dir);
            std::string down_lines;
            for (const auto& d : summary.downstream) down_lines += d.to_json().dump() + "\n";
            emit((config.output_dir / "downstream.jsonl").string(), down_lines);
            for (const auto& e : summary.errors) std::cerr << "cell error: " << e << '\n';
            std::cerr << "rows " << summary.table.size() << ", generated " << summary.generated << ", cache hits "
                      << summary.cache_hits << ", error rows " << summary.error_rows << ", files " << files.size() + 1
                      << " in " << config.output_dir.string() << '\n';
        } else if (*report) {
            const auto table = ResultsTable::parse_csv(read_text(csv_path));
            const fs::path dir = out_path.empty() ? fs::path(csv_path).parent_path() : fs::path(out_path);
            const auto files = emit_report(table, dir.empty() ? fs::path(".") : dir);
            std::cerr << files.size() << " files written\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
