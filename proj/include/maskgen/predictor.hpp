#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskgen/corruption.hpp"
#include "maskgen/tokenizer.hpp"

namespace maskgen {

/// Ranked token probabilities at one slot (MLM) or step (CLM).
class Distribution {
public:
    using Entry = std::pair<TokenId, double>;

    /// Sorts entries by descending probability, ties by ascending id, and
    /// checks the invariants: non-empty, no negative or non-finite values,
    /// unique ids, total mass <= 1 + 1e-9. Throws ContractError otherwise.
    Distribution(std::vector<Entry> entries, std::size_t position);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t position() const noexcept { return position_; }
    TokenId top() const noexcept { return entries_.front().first; }
    /// Probability of the argmax token.
    double confidence() const noexcept { return entries_.front().second; }
    double probability(TokenId id) const;
    double total() const;

private:
    std::vector<Entry> entries_;
    std::size_t position_;
};

/// Bidirectional conditional model over masked slots.
class MaskedPredictor {
public:
    virtual ~MaskedPredictor() = default;

    virtual std::string id() const = 0;
    virtual const Vocab& vocab() const = 0;

    /// One distribution per requested position. `slots` holds kept or
    /// committed surfaces and nullopt for still-masked slots; every position
    /// must refer to a nullopt slot. top_k == 0 means the full vocabulary.
    virtual std::vector<Distribution> predict_masked(std::span<const std::optional<std::string>> slots,
                                                     std::span<const std::size_t> positions,
                                                     std::size_t top_k) = 0;

    /// A commit at slot j can only change predictions for slots within this
    /// distance of j. nullopt: any slot may change.
    virtual std::optional<std::size_t> influence_radius() const { return std::nullopt; }
    /// True when concurrent calls from several threads are safe.
    virtual bool thread_safe() const { return false; }
};

/// Left-to-right conditional model. EOS is reported as Vocab::kEos.
class CausalPredictor {
public:
    virtual ~CausalPredictor() = default;

    virtual std::string id() const = 0;
    virtual const Vocab& vocab() const = 0;
    virtual Distribution predict_next(std::span<const std::string> prefix, std::span<const std::string> context,
                                      std::size_t top_k) = 0;
    virtual bool thread_safe() const { return false; }
};

/// Single-position convenience over the masked predictor contract; only the
/// visible surfaces of `masked` reach the predictor.
Distribution predict_masked(MaskedPredictor& model, const MaskedSequence& masked, std::size_t position,
                            std::size_t top_k = 0);

Distribution predict_next(CausalPredictor& model, std::span<const std::string> prefix, const ContextSequence& context,
                          std::size_t top_k = 0);

/// The top_k entries of a dense score vector indexed by token id, ranked by
/// probability then ascending id. Negative scores mark ineligible ids.
std::vector<Distribution::Entry> top_entries(std::span<const double> scores, std::size_t top_k);

}  // namespace maskgen
