#include "maskgen/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "maskgen/rng.hpp"

namespace maskgen {

std::string to_string(Regime regime) { return regime == Regime::mlm ? "mlm" : "clm"; }

Regime parse_regime(std::string_view text) {
    if (text == "mlm") return Regime::mlm;
    if (text == "clm") return Regime::clm;
    throw ValidationError("unknown regime '" + std::string(text) + "'");
}

void DecodePolicy::validate() const {
    if (top_k < 1) throw ValidationError("top_k must be >= 1");
    if (mode == Mode::sample && !(temperature > 0.0)) throw ValidationError("temperature must be > 0");
    if (!(length_cap_factor > 0.0)) throw ValidationError("length cap factor must be > 0");
}

std::size_t causal_length_cap(double factor, std::size_t original_length) {
    return static_cast<std::size_t>(std::ceil(factor * static_cast<double>(original_length) - 1e-9));
}

namespace {

// Returns the index into `candidates` (already ranked) to commit.
std::size_t choose(const std::vector<Distribution::Entry>& candidates, const DecodePolicy& policy, Rng& rng) {
    if (policy.mode == DecodePolicy::Mode::greedy || candidates.size() == 1) return 0;
    const std::size_t pool = std::min(policy.top_k, candidates.size());
    std::vector<double> w(pool);
    double total = 0.0;
    for (std::size_t i = 0; i < pool; ++i) {
        w[i] = std::pow(std::max(candidates[i].second, 0.0), 1.0 / policy.temperature);
        total += w[i];
    }
    if (!(total > 0.0)) return 0;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < pool; ++i) {
        if (u < w[i]) return i;
        u -= w[i];
    }
    return pool - 1;
}

GenerationRecord base_record(std::string doc_id, Regime regime, const MaskingStrategy& strategy,
                             const DecodePolicy& policy, std::string predictor_id) {
    GenerationRecord r;
    r.doc_id = std::move(doc_id);
    r.regime = regime;
    r.strategy = strategy;
    r.seed = policy.seed;
    r.predictor_id = std::move(predictor_id);
    r.output_tokens.doc_id = r.doc_id;
    return r;
}

}  // namespace

GenerationRecord infill(const MaskedSequence& masked, MaskedPredictor& model, const DecodePolicy& policy) {
    policy.validate();
    GenerationRecord rec = base_record(masked.doc_id, Regime::mlm, masked.strategy, policy, model.id());
    for (const auto& s : masked.slots)
        rec.output_tokens.tokens.push_back(make_token(s.masked ? std::string(Vocab::kMaskText) : s.token.surface));

    auto slots = masked.visible();
    std::set<std::size_t> remaining;
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (!slots[i]) remaining.insert(i);

    std::vector<std::optional<Distribution>> cache(slots.size());
    std::vector<std::size_t> dirty(remaining.begin(), remaining.end());
    const auto radius = model.influence_radius();
    Rng rng(policy.seed);

    while (!remaining.empty()) {
        if (!dirty.empty()) {
            std::vector<Distribution> fresh;
            try {
                fresh = model.predict_masked(slots, dirty, policy.top_k);
            } catch (const std::exception& e) {
                throw DecodeError(std::string("infill failed: ") + e.what(), rec);
            }
            if (fresh.size() != dirty.size()) throw DecodeError("predictor returned the wrong number of distributions", rec);
            for (std::size_t i = 0; i < dirty.size(); ++i) cache[dirty[i]] = std::move(fresh[i]);
        }

        // strict comparison over ascending positions keeps the lowest index on ties
        std::size_t best = *remaining.begin();
        for (std::size_t p : remaining)
            if (cache[p]->confidence() > cache[best]->confidence()) best = p;

        const auto& dist = *cache[best];
        const auto pick = dist.entries()[choose(dist.entries(), policy, rng)];
        const std::string surface = model.vocab().surface(pick.first);
        slots[best] = surface;
        rec.output_tokens.tokens[best] = make_token(surface);
        rec.steps.push_back(DecodeStep{rec.steps.size() + 1, best, surface, pick.second});
        remaining.erase(best);
        cache[best].reset();

        dirty.clear();
        for (std::size_t p : remaining) {
            const std::size_t dist_to = p > best ? p - best : best - p;
            if (!radius || dist_to <= *radius) dirty.push_back(p);
        }
    }
    return rec;
}

GenerationRecord generate_causal(const ContextSequence& context, std::size_t original_length, CausalPredictor& model,
                                 const DecodePolicy& policy) {
    policy.validate();
    GenerationRecord rec = base_record(context.doc_id, Regime::clm, context.strategy, policy, model.id());
    const std::size_t cap = causal_length_cap(policy.length_cap_factor, original_length);
    const auto ctx = context.surfaces();
    std::vector<std::string> prefix;
    Rng rng(policy.seed);

    auto repeats_trigram = [&](const std::string& next) {
        if (prefix.size() < 2) return false;
        const std::size_t n = prefix.size();
        for (std::size_t i = 0; i + 2 < n; ++i)
            if (prefix[i] == prefix[n - 2] && prefix[i + 1] == prefix[n - 1] && prefix[i + 2] == next) return true;
        return false;
    };

    while (prefix.size() < cap) {
        std::optional<Distribution> dist;
        try {
            dist.emplace(model.predict_next(prefix, ctx, policy.top_k));
        } catch (const std::exception& e) {
            throw DecodeError(std::string("causal generation failed: ") + e.what(), rec);
        }
        auto candidates = dist->entries();
        if (policy.no_repeat_trigram) {
            std::vector<Distribution::Entry> allowed;
            for (const auto& e : candidates)
                if (e.first == Vocab::kEos || !repeats_trigram(model.vocab().surface(e.first))) allowed.push_back(e);
            if (!allowed.empty()) candidates = std::move(allowed);
        }
        const auto pick = candidates[choose(candidates, policy, rng)];
        if (pick.first == Vocab::kEos) break;
        const std::string surface = model.vocab().surface(pick.first);
        rec.steps.push_back(DecodeStep{rec.steps.size() + 1, prefix.size(), surface, pick.second});
        rec.output_tokens.tokens.push_back(make_token(surface));
        prefix.push_back(surface);
    }
    return rec;
}

nlohmann::ordered_json GenerationRecord::to_json() const {
    nlohmann::ordered_json j;
    j["doc_id"] = doc_id;
    j["regime"] = to_string(regime);
    j["strategy"] = strategy.name();
    j["ratio"] = strategy.ratio ? nlohmann::ordered_json(*strategy.ratio) : nlohmann::ordered_json(nullptr);
    j["seed"] = seed;
    j["predictor"] = predictor_id;
    j["output"] = output_tokens.surfaces();
    nlohmann::ordered_json steps_json = nlohmann::ordered_json::array();
    for (const auto& s : steps) steps_json.push_back({s.step, s.position, s.token, s.confidence});
    j["steps"] = std::move(steps_json);
    return j;
}

GenerationRecord GenerationRecord::from_json(const nlohmann::json& j) {
    try {
        GenerationRecord r;
        r.doc_id = j.at("doc_id").get<std::string>();
        r.regime = parse_regime(j.at("regime").get<std::string>());
        const auto name = j.at("strategy").get<std::string>();
        if (name == "random") {
            r.strategy = MaskingStrategy::random(j.at("ratio").get<double>());
        } else {
            r.strategy = MaskingStrategy::parse(name);
        }
        r.seed = j.at("seed").get<std::uint64_t>();
        r.predictor_id = j.value("predictor", std::string());
        r.output_tokens.doc_id = r.doc_id;
        for (const auto& s : j.at("output")) r.output_tokens.tokens.push_back(make_token(s.get<std::string>()));
        for (const auto& s : j.at("steps")) {
            if (!s.is_array() || s.size() != 4) throw ParseError("generation step must be [step, pos, token, conf]");
            r.steps.push_back(DecodeStep{s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::string>(),
                                         s[3].get<double>()});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed generation record: ") + e.what());
    }
}

}  // namespace maskgen
