#include "maskgen/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "maskgen/error.hpp"

namespace maskgen {
namespace {

bool ranks_before(const Distribution::Entry& a, const Distribution::Entry& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
}

}  // namespace

Distribution::Distribution(std::vector<Entry> entries, std::size_t position)
    : entries_(std::move(entries)), position_(position) {
    if (entries_.empty()) throw ContractError("distribution has no entries");
    double sum = 0.0;
    std::unordered_set<TokenId> ids;
    for (const auto& [id, p] : entries_) {
        if (!std::isfinite(p) || p < 0.0) throw ContractError("distribution has a negative or non-finite probability");
        if (!ids.insert(id).second) throw ContractError("distribution lists a token twice");
        sum += p;
    }
    if (sum > 1.0 + 1e-9) throw ContractError("distribution mass exceeds 1");
    std::sort(entries_.begin(), entries_.end(), ranks_before);
}

double Distribution::probability(TokenId id) const {
    for (const auto& [t, p] : entries_)
        if (t == id) return p;
    return 0.0;
}

double Distribution::total() const {
    return std::accumulate(entries_.begin(), entries_.end(), 0.0,
                           [](double acc, const Entry& e) { return acc + e.second; });
}

std::vector<Distribution::Entry> top_entries(std::span<const double> scores, std::size_t top_k) {
    std::vector<Distribution::Entry> all;
    all.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] >= 0.0) all.emplace_back(static_cast<TokenId>(i), scores[i]);
    if (top_k == 0 || top_k >= all.size()) {
        std::sort(all.begin(), all.end(), ranks_before);
        return all;
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(top_k), all.end(), ranks_before);
    all.resize(top_k);
    return all;
}

Distribution predict_masked(MaskedPredictor& model, const MaskedSequence& masked, std::size_t position,
                            std::size_t top_k) {
    if (position >= masked.size() || !masked.slots[position].masked)
        throw ContractError("predict_masked: slot " + std::to_string(position) + " is not masked");
    const auto view = masked.visible();
    const std::size_t pos[] = {position};
    return std::move(model.predict_masked(view, pos, top_k).front());
}

Distribution predict_next(CausalPredictor& model, std::span<const std::string> prefix, const ContextSequence& context,
                          std::size_t top_k) {
    const auto ctx = context.surfaces();
    return model.predict_next(prefix, ctx, top_k);
}

}  // namespace maskgen
