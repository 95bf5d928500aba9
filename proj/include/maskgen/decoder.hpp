#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskgen/corruption.hpp"
#include "maskgen/error.hpp"
#include "maskgen/predictor.hpp"

namespace maskgen {

enum class Regime { mlm, clm };

std::string to_string(Regime regime);
Regime parse_regime(std::string_view text);

struct DecodePolicy {
    enum class Mode { greedy, sample };

    Mode mode = Mode::greedy;
    double temperature = 1.0;        // sample only
    std::size_t top_k = 10;          // entries requested per query; sampling pool
    double length_cap_factor = 1.25; // clm only
    std::uint64_t seed = 0;
    bool no_repeat_trigram = false;  // clm only

    void validate() const;
};

struct DecodeStep {
    std::size_t step = 0;      // 1-based
    std::size_t position = 0;  // slot index (mlm) or output index (clm)
    std::string token;
    double confidence = 0.0;   // probability of the committed token

    bool operator==(const DecodeStep&) const = default;
};

struct GenerationRecord {
    std::string doc_id;
    Regime regime = Regime::mlm;
    MaskingStrategy strategy;
    TokenSequence output_tokens;
    std::vector<DecodeStep> steps;
    std::uint64_t seed = 0;
    std::string predictor_id;

    std::vector<std::string> output_surfaces() const { return output_tokens.surfaces(); }

    /// {"doc_id","regime","strategy","ratio","seed","predictor","output","steps"}
    nlohmann::ordered_json to_json() const;
    static GenerationRecord from_json(const nlohmann::json& j);

    bool operator==(const GenerationRecord&) const = default;
};

/// A predictor failed mid-decode; `partial()` holds the trace so far (with
/// "[MASK]" surfaces at slots that were never filled).
class DecodeError : public Error {
public:
    DecodeError(const std::string& what, GenerationRecord partial) : Error(what), partial_(std::move(partial)) {}
    const GenerationRecord& partial() const noexcept { return partial_; }

private:
    GenerationRecord partial_;
};

/// Confidence-ordered infilling: every round queries the masked slots whose
/// prediction may have changed, commits the single most confident slot
/// (ties: lowest position), and repeats until no mask remains.
GenerationRecord infill(const MaskedSequence& masked, MaskedPredictor& model, const DecodePolicy& policy = {});

/// Left-to-right generation from BOS conditioned on the context tokens,
/// stopping at EOS or after ceil(length_cap_factor * original_length) tokens.
GenerationRecord generate_causal(const ContextSequence& context, std::size_t original_length, CausalPredictor& model,
                                 const DecodePolicy& policy = {});

std::size_t causal_length_cap(double factor, std::size_t original_length);

}  // namespace maskgen
