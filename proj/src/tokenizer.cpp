#include "maskgen/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "maskgen/error.hpp"
#include "maskgen/utf8.hpp"

// Generated at configure time from data/stopwords.txt; defines kBuiltinStopwords.
#include "stopwords_data.inc"

namespace maskgen {
namespace {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        pos = end + 1;
    }
    return out;
}

std::string trim(std::string_view s) {
    auto u = utf8::decode(s);
    std::size_t b = 0, e = u.size();
    while (b < e && utf8::is_space(u[b])) ++b;
    while (e > b && utf8::is_space(u[e - 1])) --e;
    return utf8::encode(std::u32string_view(u).substr(b, e - b));
}

// Whitespace split plus punctuation peeling, on already lowercased text.
std::vector<std::string> split_surfaces(std::string_view text) {
    const std::u32string cps = utf8::decode(utf8::lowercase(text));
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && utf8::is_space(cps[i])) ++i;
        std::size_t j = i;
        while (j < cps.size() && !utf8::is_space(cps[j])) ++j;
        if (i == j) break;
        std::size_t b = i, e = j;
        while (b < e && utf8::is_punctuation(cps[b])) {
            out.push_back(utf8::encode(std::u32string_view(&cps[b], 1)));
            ++b;
        }
        std::size_t core_end = e;
        while (core_end > b && utf8::is_punctuation(cps[core_end - 1])) --core_end;
        if (core_end > b) out.push_back(utf8::encode(std::u32string_view(cps).substr(b, core_end - b)));
        for (std::size_t k = core_end; k < e; ++k) out.push_back(utf8::encode(std::u32string_view(&cps[k], 1)));
        i = j;
    }
    return out;
}

}  // namespace

std::vector<std::string> TokenSequence::surfaces() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.surface);
    return out;
}

StopwordList::StopwordList(std::vector<std::string> words) {
    for (auto& w : words) {
        std::string t = trim(w);
        if (t.empty() || t.front() == '#') continue;
        words_.insert(utf8::lowercase(t));
    }
}

const StopwordList& StopwordList::builtin() {
    static const StopwordList list(split_lines(kBuiltinStopwords));
    return list;
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open stopword list " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return StopwordList(split_lines(ss.str()));
}

void EntityLexicon::add(std::string_view surface, std::string type) {
    auto key = split_surfaces(surface);
    if (key.empty()) throw ValidationError("empty lexicon surface");
    if (type.empty()) throw ValidationError("empty entity type for '" + std::string(surface) + "'");
    max_len_ = std::max(max_len_, key.size());
    entries_.insert_or_assign(std::move(key), std::move(type));
}

EntityLexicon EntityLexicon::parse_tsv(std::string_view text) {
    EntityLexicon lex;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("expected surface<TAB>type", line_no);
        lex.add(line.substr(0, tab), trim(line.substr(tab + 1)));
    }
    return lex;
}

EntityLexicon EntityLexicon::load_tsv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open lexicon " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tsv(ss.str());
}

std::vector<EntitySpan> EntityLexicon::match(std::span<const std::string> surfaces) const {
    std::vector<EntitySpan> candidates;
    std::vector<std::string> key;
    for (std::size_t b = 0; b < surfaces.size(); ++b) {
        key.clear();
        for (std::size_t len = 1; len <= max_len_ && b + len <= surfaces.size(); ++len) {
            key.push_back(surfaces[b + len - 1]);
            if (auto it = entries_.find(key); it != entries_.end()) candidates.push_back({b, b + len, it->second});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const EntitySpan& x, const EntitySpan& y) {
        const auto lx = x.end - x.begin, ly = y.end - y.begin;
        return lx != ly ? lx > ly : x.begin < y.begin;
    });
    std::vector<bool> taken(surfaces.size(), false);
    std::vector<EntitySpan> chosen;
    for (auto& c : candidates) {
        if (std::any_of(taken.begin() + static_cast<std::ptrdiff_t>(c.begin),
                        taken.begin() + static_cast<std::ptrdiff_t>(c.end), [](bool t) { return t; }))
            continue;
        std::fill(taken.begin() + static_cast<std::ptrdiff_t>(c.begin), taken.begin() + static_cast<std::ptrdiff_t>(c.end),
                  true);
        chosen.push_back(std::move(c));
    }
    std::sort(chosen.begin(), chosen.end(), [](const auto& x, const auto& y) { return x.begin < y.begin; });
    return chosen;
}

bool is_punctuation_token(std::string_view surface) {
    auto cps = utf8::decode(surface);
    return !cps.empty() && std::all_of(cps.begin(), cps.end(), utf8::is_punctuation);
}

Token make_token(std::string surface, const StopwordList& stopwords) {
    Token t;
    t.is_punctuation = is_punctuation_token(surface);
    t.is_stopword = !t.is_punctuation && stopwords.contains(surface);
    t.surface = std::move(surface);
    return t;
}

TokenSequence tokenize(std::string_view text, const EntityLexicon* lexicon, std::string doc_id,
                       const StopwordList& stopwords) {
    auto surfaces = split_surfaces(text);
    if (surfaces.empty()) throw ValidationError("text '" + doc_id + "' has no tokens");
    if (surfaces.size() > kMaxTokens) surfaces.resize(kMaxTokens);

    TokenSequence seq;
    seq.doc_id = std::move(doc_id);
    seq.tokens.reserve(surfaces.size());
    for (const auto& s : surfaces) seq.tokens.push_back(make_token(s, stopwords));
    if (lexicon) {
        for (const auto& span : lexicon->match(surfaces))
            for (std::size_t i = span.begin; i < span.end; ++i) seq.tokens[i].entity_type = span.type;
    }
    return seq;
}

std::string detokenize(std::span<const std::string> surfaces) {
    std::string out;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        if (i > 0 && !is_punctuation_token(surfaces[i])) out.push_back(' ');
        out += surfaces[i];
    }
    return out;
}

std::string detokenize(const TokenSequence& seq) {
    auto s = seq.surfaces();
    return detokenize(s);
}

Vocab::Vocab() {
    for (std::string_view s : {"[MASK]", "[UNK]", "[BOS]", "[EOS]"}) add(s);
}

Vocab::Vocab(std::span<const std::string> surfaces) : Vocab() {
    for (const auto& s : surfaces) {
        if (find(s)) throw ValidationError("duplicate vocabulary entry '" + s + "'");
        add(s);
    }
}

std::optional<TokenId> Vocab::find(std::string_view surface) const {
    if (auto it = index_.find(surface); it != index_.end()) return it->second;
    return std::nullopt;
}

TokenId Vocab::id(std::string_view surface) const { return find(surface).value_or(kUnk); }

TokenId Vocab::add(std::string_view surface) {
    if (auto existing = find(surface)) return *existing;
    const auto id = static_cast<TokenId>(surfaces_.size());
    surfaces_.emplace_back(surface);
    index_.emplace(surfaces_.back(), id);
    return id;
}

Vocab build_vocab(std::span<const TokenSequence> sequences, std::size_t min_count) {
    std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> freq;
    for (const auto& seq : sequences)
        for (const auto& t : seq.tokens) ++freq[t.surface];
    std::vector<std::pair<std::string, std::size_t>> ranked;
    for (auto& [s, c] : freq)
        if (c >= min_count) ranked.emplace_back(s, c);
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
    Vocab vocab;
    for (const auto& [s, c] : ranked) vocab.add(s);
    return vocab;
}

std::vector<TokenSequence> tokenize_corpus(const Corpus& corpus, const EntityLexicon* lexicon) {
    std::vector<TokenSequence> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus.documents) out.push_back(tokenize(doc.text, lexicon, doc.id));
    return out;
}

Vocab build_vocab(const Corpus& corpus, std::size_t min_count, const EntityLexicon* lexicon) {
    if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
    auto seqs = tokenize_corpus(corpus, lexicon);
    return build_vocab(seqs, min_count);
}

}  // namespace maskgen
