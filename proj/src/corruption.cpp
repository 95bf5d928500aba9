#include "maskgen/corruption.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <span>

#include "maskgen/error.hpp"
#include "maskgen/rng.hpp"

namespace maskgen {

MaskingStrategy MaskingStrategy::random(double ratio) {
    MaskingStrategy s{Kind::random, ratio};
    s.validate();
    return s;
}

MaskingStrategy MaskingStrategy::keep(Kind kind) {
    if (kind == Kind::random) throw ContractError("keep() needs a class strategy");
    return MaskingStrategy{kind, std::nullopt};
}

void MaskingStrategy::validate() const {
    if (kind == Kind::random) {
        if (!ratio) throw ValidationError("random masking requires a ratio");
        if (!(*ratio >= 0.0 && *ratio <= 1.0)) throw ValidationError("masking ratio must lie in [0,1]");
    } else if (ratio) {
        throw ValidationError("class masking strategies take no ratio");
    }
}

MaskingStrategy MaskingStrategy::parse(std::string_view text) {
    if (text.starts_with("random:")) {
        auto num = text.substr(7);
        double r = 0.0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), r);
        if (ec != std::errc{} || ptr != num.data() + num.size() || num.empty())
            throw ValidationError("bad ratio in strategy '" + std::string(text) + "'");
        return random(r);
    }
    if (text == "stopwords") return keep(Kind::keep_stopwords);
    if (text == "punctuation") return keep(Kind::keep_punctuation);
    if (text == "stopwords_punctuation") return keep(Kind::keep_stopwords_punctuation);
    if (text == "ner") return keep(Kind::keep_entities);
    throw ValidationError("unknown masking strategy '" + std::string(text) + "'");
}

std::string MaskingStrategy::name() const {
    switch (kind) {
        case Kind::random: return "random";
        case Kind::keep_stopwords: return "stopwords";
        case Kind::keep_punctuation: return "punctuation";
        case Kind::keep_stopwords_punctuation: return "stopwords_punctuation";
        case Kind::keep_entities: return "ner";
    }
    return "?";
}

std::string MaskingStrategy::to_string() const {
    if (kind != Kind::random) return name();
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, ratio.value_or(0.0));
    return "random:" + std::string(buf, res.ptr);
}

std::size_t MaskedSequence::masked_count() const {
    std::size_t n = 0;
    for (const auto& s : slots) n += s.masked ? 1 : 0;
    return n;
}

std::vector<std::size_t> MaskedSequence::masked_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (slots[i].masked) out.push_back(i);
    return out;
}

std::vector<std::optional<std::string>> MaskedSequence::visible() const {
    std::vector<std::optional<std::string>> out;
    out.reserve(slots.size());
    for (const auto& s : slots) {
        if (s.masked)
            out.emplace_back(std::nullopt);
        else
            out.emplace_back(s.token.surface);
    }
    return out;
}

std::vector<std::string> MaskedSequence::prompt() const {
    std::vector<std::string> out;
    out.reserve(slots.size());
    for (const auto& s : slots) out.push_back(s.masked ? std::string(Vocab::kMaskText) : s.token.surface);
    return out;
}

TokenSequence MaskedSequence::original() const {
    TokenSequence seq;
    seq.doc_id = doc_id;
    for (const auto& s : slots) seq.tokens.push_back(s.token);
    return seq;
}

std::vector<std::string> ContextSequence::surfaces() const {
    std::vector<std::string> out;
    for (const auto& t : tokens) out.push_back(t.surface);
    return out;
}

std::size_t mask_count_for(double ratio, std::size_t n) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5 + 1e-9));
}

namespace {

MaskedSequence unmasked(const TokenSequence& seq, const MaskingStrategy& strategy, std::uint64_t seed) {
    MaskedSequence out;
    out.doc_id = seq.doc_id;
    out.strategy = strategy;
    out.seed = seed;
    out.slots.reserve(seq.size());
    for (const auto& t : seq.tokens) out.slots.push_back(Slot{t, false});
    return out;
}

}  // namespace

MaskedSequence mask_random(const TokenSequence& seq, double ratio, std::uint64_t seed) {
    auto strategy = MaskingStrategy::random(ratio);
    MaskedSequence out = unmasked(seq, strategy, seed);
    const std::size_t n = seq.size();
    const std::size_t m = std::min(n, mask_count_for(ratio, n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < m; ++i) out.slots[order[i]].masked = true;
    return out;
}

MaskedSequence mask_keep_class(const TokenSequence& seq, const MaskingStrategy& strategy) {
    using Kind = MaskingStrategy::Kind;
    strategy.validate();
    if (strategy.kind == Kind::random) throw ContractError("mask_keep_class called with the random strategy");
    MaskedSequence out = unmasked(seq, strategy, 0);
    for (auto& slot : out.slots) {
        const Token& t = slot.token;
        bool keep = false;
        switch (strategy.kind) {
            case Kind::keep_stopwords: keep = t.is_stopword; break;
            case Kind::keep_punctuation: keep = t.is_punctuation; break;
            case Kind::keep_stopwords_punctuation: keep = t.is_stopword || t.is_punctuation; break;
            case Kind::keep_entities: keep = t.entity_type.has_value(); break;
            case Kind::random: break;
        }
        slot.masked = !keep;
    }
    return out;
}

MaskedSequence corrupt(const TokenSequence& seq, const MaskingStrategy& strategy, std::uint64_t seed) {
    if (strategy.kind == MaskingStrategy::Kind::random) return mask_random(seq, strategy.ratio.value_or(-1.0), seed);
    return mask_keep_class(seq, strategy);
}

ContextSequence extract_context(const MaskedSequence& masked) {
    ContextSequence ctx;
    ctx.doc_id = masked.doc_id;
    ctx.strategy = masked.strategy;
    for (const auto& s : masked.slots)
        if (!s.masked) ctx.tokens.push_back(s.token);
    return ctx;
}

}  // namespace maskgen
