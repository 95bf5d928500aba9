#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskgen/tokenizer.hpp"

namespace maskgen {

struct MaskingStrategy {
    enum class Kind { random, keep_stopwords, keep_punctuation, keep_stopwords_punctuation, keep_entities };

    Kind kind = Kind::random;
    std::optional<double> ratio;  // present iff kind == random

    static MaskingStrategy random(double ratio);
    static MaskingStrategy keep(Kind kind);

    /// `random:<ratio>`, `stopwords`, `punctuation`, `stopwords_punctuation`, `ner`.
    static MaskingStrategy parse(std::string_view text);
    /// Inverse of parse for the ratio-free kinds; random renders as "random".
    std::string name() const;
    /// Full round-trippable form, e.g. "random:0.5".
    std::string to_string() const;

    bool ratio_free() const noexcept { return kind != Kind::random; }
    void validate() const;
    bool operator==(const MaskingStrategy&) const = default;
};

struct Slot {
    Token token;  // original token; hidden from predictors when masked
    bool masked = false;

    bool operator==(const Slot&) const = default;
};

struct MaskedSequence {
    std::vector<Slot> slots;
    std::string doc_id;
    MaskingStrategy strategy;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return slots.size(); }
    std::size_t masked_count() const;
    std::vector<std::size_t> masked_positions() const;
    /// What a predictor may see: kept surfaces, nullopt for masked slots.
    std::vector<std::optional<std::string>> visible() const;
    /// Prompt rendering with "[MASK]" markers.
    std::vector<std::string> prompt() const;
    /// The uncorrupted token sequence (for scoring).
    TokenSequence original() const;

    bool operator==(const MaskedSequence&) const = default;
};

struct ContextSequence {
    std::vector<Token> tokens;
    std::string doc_id;
    MaskingStrategy strategy;

    std::vector<std::string> surfaces() const;
};

/// floor(ratio * n + 1/2), with a 1e-9 guard so decimal ratios like 0.3
/// round the way their decimal value does.
std::size_t mask_count_for(double ratio, std::size_t n);

MaskedSequence mask_random(const TokenSequence& seq, double ratio, std::uint64_t seed);
MaskedSequence mask_keep_class(const TokenSequence& seq, const MaskingStrategy& strategy);
/// Dispatches on strategy.kind; the seed is ignored by the class strategies.
MaskedSequence corrupt(const TokenSequence& seq, const MaskingStrategy& strategy, std::uint64_t seed);

ContextSequence extract_context(const MaskedSequence& masked);

}  // namespace maskgen
