#include "maskgen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "maskgen/error.hpp"
#include "maskgen/rng.hpp"

namespace maskgen {
namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; });
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Document parse_document(const nlohmann::json& obj, std::size_t line) {
    if (!obj.is_object()) throw ParseError("expected a JSON object", line);
    auto id = obj.find("id");
    auto text = obj.find("text");
    if (id == obj.end() || !id->is_string()) throw ParseError("missing string field \"id\"", line);
    if (text == obj.end() || !text->is_string()) throw ParseError("missing string field \"text\"", line);

    Document doc;
    doc.id = id->get<std::string>();
    doc.text = text->get<std::string>();
    if (auto labels = obj.find("labels"); labels != obj.end() && !labels->is_null()) {
        if (!labels->is_array()) throw ParseError("\"labels\" must be an array of strings", line);
        std::set<std::string> uniq;
        for (const auto& l : *labels) {
            if (!l.is_string()) throw ParseError("\"labels\" must be an array of strings", line);
            uniq.insert(l.get<std::string>());
        }
        doc.labels.emplace(uniq.begin(), uniq.end());
    }
    if (auto author = obj.find("author"); author != obj.end() && !author->is_null()) {
        if (!author->is_string()) throw ParseError("\"author\" must be a string", line);
        doc.author_id = author->get<std::string>();
    }
    return doc;
}

}  // namespace

void validate_corpus(const Corpus& corpus) {
    std::unordered_set<std::string_view> seen;
    for (const auto& doc : corpus.documents) {
        if (doc.id.empty()) throw ValidationError("document with empty id");
        if (!seen.insert(doc.id).second) throw ValidationError("duplicate document id: " + doc.id);
        if (blank(doc.text)) throw ValidationError("document " + doc.id + " has empty text");
    }
}

Corpus parse_corpus_jsonl(std::string_view text, std::string name) {
    Corpus corpus;
    corpus.name = std::move(name);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (blank(line)) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        corpus.documents.push_back(parse_document(obj, line_no));
    }
    validate_corpus(corpus);
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    if (format == CorpusFormat::jsonl) {
        return parse_corpus_jsonl(read_file(path), path.stem().string());
    }
    if (!std::filesystem::is_directory(path)) throw ValidationError("not a directory: " + path.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    Corpus corpus;
    corpus.name = path.filename().empty() ? path.parent_path().filename().string() : path.filename().string();
    for (const auto& f : files) corpus.documents.push_back(Document{f.stem().string(), read_file(f), {}, {}});
    validate_corpus(corpus);
    return corpus;
}

std::string serialize_corpus_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& doc : corpus.documents) {
        nlohmann::ordered_json obj;
        obj["id"] = doc.id;
        obj["text"] = doc.text;
        if (doc.labels) obj["labels"] = *doc.labels;
        if (doc.author_id) obj["author"] = *doc.author_id;
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << serialize_corpus_jsonl(corpus);
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, const SplitSpec& spec) {
    const std::size_t n = corpus.size();
    if (n < 2) throw ValidationError("split needs at least 2 documents");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ValidationError("train fraction must lie in (0,1)");
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n) + 0.5));
    if (n_train == 0 || n_train == n) throw ValidationError("train fraction leaves one side of the split empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    rng.shuffle(std::span(order));
    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

    Corpus train{corpus.name + "-train", {}};
    Corpus test{corpus.name + "-test", {}};
    for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).documents.push_back(corpus.documents[i]);
    return {std::move(train), std::move(test)};
}

std::vector<std::string> top_k_labels(const Corpus& corpus, std::size_t k) {
    if (k == 0) throw ValidationError("k must be positive");
    std::map<std::string, std::size_t> freq;
    for (const auto& doc : corpus.documents) {
        if (!doc.labels) continue;
        for (const auto& l : *doc.labels) ++freq[l];
    }
    if (freq.size() < k)
        throw ValidationError("requested " + std::to_string(k) + " labels but only " + std::to_string(freq.size()) +
                              " are present");
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].first);
    return out;
}

CorpusSummary summarize(const Corpus& corpus) {
    CorpusSummary s;
    std::set<std::string> labels, authors;
    s.documents = corpus.size();
    for (const auto& doc : corpus.documents) {
        s.bytes += doc.text.size();
        if (doc.labels) {
            ++s.labelled;
            labels.insert(doc.labels->begin(), doc.labels->end());
        }
        if (doc.author_id) {
            ++s.with_author;
            authors.insert(*doc.author_id);
        }
    }
    s.distinct_labels = labels.size();
    s.distinct_authors = authors.size();
    return s;
}

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "jsonl") return CorpusFormat::jsonl;
    if (name == "plain_dir") return CorpusFormat::plain_dir;
    throw ValidationError("unknown corpus format: " + std::string(name));
}

}  // namespace maskgen
