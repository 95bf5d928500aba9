#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "maskgen/corpus.hpp"

namespace maskgen {

inline constexpr std::size_t kMaxTokens = 512;

struct Token {
    std::string surface;
    bool is_punctuation = false;
    bool is_stopword = false;
    std::optional<std::string> entity_type;

    bool operator==(const Token&) const = default;
};

struct TokenSequence {
    std::vector<Token> tokens;
    std::string doc_id;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
    const Token& operator[](std::size_t i) const { return tokens[i]; }
    std::vector<std::string> surfaces() const;

    bool operator==(const TokenSequence&) const = default;
};

struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

class StopwordList {
public:
    StopwordList() = default;
    explicit StopwordList(std::vector<std::string> words);

    /// The pinned English list shipped in data/stopwords.txt (compiled in).
    static const StopwordList& builtin();
    /// One lowercase word per line; blank lines and '#' comments ignored.
    static StopwordList load(const std::filesystem::path& path);

    bool contains(std::string_view word) const { return words_.find(word) != words_.end(); }
    std::size_t size() const noexcept { return words_.size(); }

private:
    std::unordered_set<std::string, StringHash, std::equal_to<>> words_;
};

/// A matched entity: tokens [begin, end) carry `type`.
struct EntitySpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string type;

    bool operator==(const EntitySpan&) const = default;
};

/// Surface form -> entity type. Surfaces are normalised with the tokenizer's
/// own splitting rules, so multi-word and punctuated entries match tokens.
class EntityLexicon {
public:
    void add(std::string_view surface, std::string type);
    /// TSV `surface<TAB>type`, one entry per line.
    static EntityLexicon load_tsv(const std::filesystem::path& path);
    static EntityLexicon parse_tsv(std::string_view text);

    /// Non-overlapping matches over lowercase token surfaces. All candidate
    /// spans are ranked longer-first, then earlier-start, and taken greedily.
    std::vector<EntitySpan> match(std::span<const std::string> surfaces) const;

    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::vector<std::string>, std::string> entries_;
    std::size_t max_len_ = 0;
};

/// Splits on Unicode whitespace, peels leading/trailing punctuation into
/// single-character tokens, lowercases, flags stopwords and punctuation, tags
/// lexicon entities and truncates to kMaxTokens. Throws ValidationError when
/// no token remains.
TokenSequence tokenize(std::string_view text, const EntityLexicon* lexicon = nullptr, std::string doc_id = {},
                       const StopwordList& stopwords = StopwordList::builtin());

/// Builds a Token for an arbitrary surface (used for generated tokens).
Token make_token(std::string surface, const StopwordList& stopwords = StopwordList::builtin());

/// Joins with single spaces; punctuation tokens attach to the preceding token.
std::string detokenize(const TokenSequence& seq);
std::string detokenize(std::span<const std::string> surfaces);

bool is_punctuation_token(std::string_view surface);

using TokenId = std::uint32_t;

class Vocab {
public:
    static constexpr TokenId kMask = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kBos = 2;
    static constexpr TokenId kEos = 3;
    static constexpr TokenId kFirstSurface = 4;
    static constexpr std::string_view kMaskText = "[MASK]";

    Vocab();
    /// Rebuilds a vocab from its surfaces in id order (specials excluded).
    explicit Vocab(std::span<const std::string> surfaces);

    /// Returns kUnk for unknown surfaces.
    TokenId id(std::string_view surface) const;
    std::optional<TokenId> find(std::string_view surface) const;
    const std::string& surface(TokenId id) const { return surfaces_.at(id); }
    /// Appends if absent; returns the id either way.
    TokenId add(std::string_view surface);

    std::size_t size() const noexcept { return surfaces_.size(); }
    /// Ids of ordinary surfaces: [kFirstSurface, size()).
    std::size_t surface_count() const noexcept { return surfaces_.size() - kFirstSurface; }
    std::span<const std::string> all() const noexcept { return surfaces_; }

    bool operator==(const Vocab& other) const { return surfaces_ == other.surfaces_; }

private:
    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, TokenId, StringHash, std::equal_to<>> index_;
};

/// Tokens with frequency >= min_count get ids ordered by descending
/// frequency, then lexicographically.
Vocab build_vocab(std::span<const TokenSequence> sequences, std::size_t min_count);
Vocab build_vocab(const Corpus& corpus, std::size_t min_count, const EntityLexicon* lexicon = nullptr);

std::vector<TokenSequence> tokenize_corpus(const Corpus& corpus, const EntityLexicon* lexicon = nullptr);

}  // namespace maskgen
