#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "maskgen/predictor.hpp"

namespace maskgen {

struct NGramOptions {
    std::size_t order = 3;
    double smoothing = 0.1;   // add-lambda constant
    std::size_t min_count = 1;
    double context_bonus = 2.0;  // causal only
};

namespace detail {

struct IdsHash {
    std::size_t operator()(const std::vector<TokenId>& v) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ v.size();
        for (TokenId t : v) h = (h ^ t) * 0x100000001b3ULL;
        return static_cast<std::size_t>(h);
    }
};

/// Continuation counts for one context, ids ascending.
struct Continuations {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint64_t>> counts;
};

using CountTable = std::unordered_map<std::vector<TokenId>, Continuations, detail::IdsHash>;

/// Katz-style step: observed tokens get (c + lambda) / (C + lambda V), the
/// remaining mass is spread over unobserved candidates in proportion to the
/// lower-order probabilities already in `probs`. Entries < 0 are ineligible.
void apply_backoff_level(std::vector<double>& probs, const Continuations& cont, double smoothing,
                         std::size_t candidates);

}  // namespace detail

/// Bidirectional n-gram: P(center | k tokens left, k tokens right) with a
/// backoff chain (k,k) -> (k,k-1) -> (k-1,k-1) -> ... -> (1,0) -> unigram.
/// Windows stop at still-masked slots; sequence edges pad with BOS/EOS.
class BidirNGram final : public MaskedPredictor {
public:
    static BidirNGram train(std::span<const TokenSequence> sequences, Vocab vocab, std::size_t order, double smoothing);
    static BidirNGram train(const Corpus& corpus, const NGramOptions& options = {},
                            const EntityLexicon* lexicon = nullptr);

    std::string id() const override;
    const Vocab& vocab() const override { return vocab_; }
    std::vector<Distribution> predict_masked(std::span<const std::optional<std::string>> slots,
                                             std::span<const std::size_t> positions, std::size_t top_k) override;
    std::optional<std::size_t> influence_radius() const override { return order_; }
    bool thread_safe() const override { return true; }

    Distribution predict(std::span<const std::optional<std::string>> slots, std::size_t position,
                         std::size_t top_k = 0) const;

    /// Raw count of `center` between the given windows (surfaces, nearest last
    /// on the left and nearest first on the right; "[BOS]"/"[EOS]" for pads).
    std::uint64_t count(std::span<const std::string> left, std::span<const std::string> right,
                        std::string_view center) const;

    std::size_t order() const noexcept { return order_; }
    double smoothing() const noexcept { return smoothing_; }

    nlohmann::json to_json() const;
    static BidirNGram from_json(const nlohmann::json& j);

    /// The (left, right) window sizes tried for a query whose usable windows
    /// are at most `left_avail` / `right_avail`, highest order first.
    static std::vector<std::pair<std::size_t, std::size_t>> backoff_chain(std::size_t order, std::size_t left_avail,
                                                                          std::size_t right_avail);

private:
    BidirNGram(Vocab vocab, std::size_t order, double smoothing);
    const detail::CountTable& table(std::size_t l, std::size_t r) const { return tables_[l * (order_ + 1) + r]; }
    detail::CountTable& table(std::size_t l, std::size_t r) { return tables_[l * (order_ + 1) + r]; }
    void finalize();

    Vocab vocab_;
    std::size_t order_;
    double smoothing_;
    std::vector<detail::CountTable> tables_;
};

/// Left-to-right n-gram with backoff k -> k-1 -> ... -> unigram and a
/// multiplicative bonus for context tokens not yet emitted.
class CausalNGram final : public CausalPredictor {
public:
    static CausalNGram train(std::span<const TokenSequence> sequences, Vocab vocab, std::size_t order,
                             double smoothing, double context_bonus = 2.0);
    static CausalNGram train(const Corpus& corpus, const NGramOptions& options = {},
                             const EntityLexicon* lexicon = nullptr);

    std::string id() const override;
    const Vocab& vocab() const override { return vocab_; }
    Distribution predict_next(std::span<const std::string> prefix, std::span<const std::string> context,
                              std::size_t top_k) override;
    bool thread_safe() const override { return true; }

    Distribution predict(std::span<const std::string> prefix, std::span<const std::string> context,
                         std::size_t top_k = 0) const;

    /// Raw count of `next` after `history` (BOS-padded, "[BOS]" allowed).
    std::uint64_t count(std::span<const std::string> history, std::string_view next) const;

    std::size_t order() const noexcept { return order_; }
    double smoothing() const noexcept { return smoothing_; }
    double context_bonus() const noexcept { return context_bonus_; }

    nlohmann::json to_json() const;
    static CausalNGram from_json(const nlohmann::json& j);

private:
    CausalNGram(Vocab vocab, std::size_t order, double smoothing, double context_bonus);
    void finalize();

    Vocab vocab_;
    std::size_t order_;
    double smoothing_;
    double context_bonus_;
    std::vector<detail::CountTable> tables_;  // index = history length
};

void save_model_json(const nlohmann::json& model, const std::filesystem::path& path);
nlohmann::json load_model_json(const std::filesystem::path& path);

}  // namespace maskgen
