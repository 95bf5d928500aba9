#include "maskgen/ngram.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "maskgen/error.hpp"

namespace maskgen {
namespace detail {

void apply_backoff_level(std::vector<double>& probs, const Continuations& cont, double smoothing,
                         std::size_t candidates) {
    if (cont.total == 0) return;
    const double denom = static_cast<double>(cont.total) + smoothing * static_cast<double>(candidates);
    double old_mass = 0.0, new_mass = 0.0;
    for (const auto& [id, c] : cont.counts) {
        old_mass += probs[id];
        new_mass += (static_cast<double>(c) + smoothing) / denom;
    }
    const double old_rest = 1.0 - old_mass;
    const double beta = old_rest > 1e-300 ? std::max(0.0, 1.0 - new_mass) / old_rest : 0.0;
    for (double& p : probs)
        if (p >= 0.0) p *= beta;
    for (const auto& [id, c] : cont.counts) probs[id] = (static_cast<double>(c) + smoothing) / denom;
}

namespace {

void finalize_table(CountTable& table, std::unordered_map<std::vector<TokenId>, std::map<TokenId, std::uint64_t>, IdsHash>& raw) {
    table.clear();
    table.reserve(raw.size());
    for (auto& [key, counts] : raw) {
        Continuations c;
        for (const auto& [id, n] : counts) {
            c.counts.emplace_back(id, n);
            c.total += n;
        }
        table.emplace(key, std::move(c));
    }
}

nlohmann::json table_rows(const CountTable& table) {
    std::vector<std::vector<std::uint64_t>> rows;
    for (const auto& [key, cont] : table)
        for (const auto& [id, n] : cont.counts) {
            std::vector<std::uint64_t> row(key.begin(), key.end());
            row.push_back(id);
            row.push_back(n);
            rows.push_back(std::move(row));
        }
    std::sort(rows.begin(), rows.end());
    return rows;
}

CountTable table_from_rows(const nlohmann::json& rows, std::size_t key_len, std::size_t vocab_size) {
    std::unordered_map<std::vector<TokenId>, std::map<TokenId, std::uint64_t>, IdsHash> raw;
    for (const auto& row : rows) {
        if (!row.is_array() || row.size() != key_len + 2) throw ParseError("model table row has the wrong width");
        std::vector<TokenId> key;
        for (std::size_t i = 0; i < key_len; ++i) key.push_back(row[i].get<TokenId>());
        const auto id = row[key_len].get<TokenId>();
        if (id >= vocab_size) throw ParseError("model table row references an unknown token id");
        for (TokenId t : key)
            if (t >= vocab_size) throw ParseError("model table row references an unknown token id");
        raw[key][id] += row[key_len + 1].get<std::uint64_t>();
    }
    CountTable t;
    finalize_table(t, raw);
    return t;
}

std::vector<std::string> vocab_surfaces(const Vocab& v) {
    auto all = v.all();
    return {all.begin() + Vocab::kFirstSurface, all.end()};
}

Vocab vocab_from_json(const nlohmann::json& j) {
    auto surfaces = j.at("vocab").get<std::vector<std::string>>();
    return Vocab(surfaces);
}

void check_header(const nlohmann::json& j, std::string_view kind) {
    if (j.value("format", "") != "maskgen-ngram") throw ParseError("not a maskgen n-gram model file");
    if (j.value("version", 0) != 1) throw ParseError("unsupported model file version");
    if (j.value("kind", "") != kind) throw ParseError("model file holds a '" + j.value("kind", "") + "' model");
}

std::vector<TokenId> to_ids(const Vocab& vocab, std::span<const std::string> surfaces) {
    std::vector<TokenId> out;
    out.reserve(surfaces.size());
    for (const auto& s : surfaces) out.push_back(vocab.id(s));
    return out;
}

}  // namespace
}  // namespace detail

using detail::Continuations;
using detail::CountTable;
using RawTable = std::unordered_map<std::vector<TokenId>, std::map<TokenId, std::uint64_t>, detail::IdsHash>;

// ---------------------------------------------------------------- bidirectional

BidirNGram::BidirNGram(Vocab vocab, std::size_t order, double smoothing)
    : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing), tables_((order + 1) * (order + 1)) {
    if (order_ < 1) throw ValidationError("n-gram order must be >= 1");
    if (!(smoothing_ > 0.0)) throw ValidationError("smoothing must be > 0");
}

BidirNGram BidirNGram::train(std::span<const TokenSequence> sequences, Vocab vocab, std::size_t order,
                             double smoothing) {
    if (sequences.empty()) throw ValidationError("cannot train on an empty corpus");
    BidirNGram model(std::move(vocab), order, smoothing);
    const std::size_t k = order;
    std::vector<RawTable> raw(model.tables_.size());
    std::vector<TokenId> padded;
    std::vector<TokenId> key;
    for (const auto& seq : sequences) {
        padded.assign(k, Vocab::kBos);
        for (const auto& t : seq.tokens) padded.push_back(model.vocab_.id(t.surface));
        padded.insert(padded.end(), k, Vocab::kEos);
        for (std::size_t i = k; i < k + seq.size(); ++i) {
            const TokenId center = padded[i];
            if (center < Vocab::kFirstSurface) continue;
            for (std::size_t l = 0; l <= k; ++l)
                for (std::size_t r = 0; r <= k; ++r) {
                    key.assign(padded.begin() + static_cast<std::ptrdiff_t>(i - l),
                               padded.begin() + static_cast<std::ptrdiff_t>(i));
                    key.insert(key.end(), padded.begin() + static_cast<std::ptrdiff_t>(i + 1),
                               padded.begin() + static_cast<std::ptrdiff_t>(i + 1 + r));
                    ++raw[l * (k + 1) + r][key][center];
                }
        }
    }
    for (std::size_t i = 0; i < raw.size(); ++i) detail::finalize_table(model.tables_[i], raw[i]);
    return model;
}

BidirNGram BidirNGram::train(const Corpus& corpus, const NGramOptions& options, const EntityLexicon* lexicon) {
    if (corpus.empty()) throw ValidationError("cannot train on an empty corpus");
    auto seqs = tokenize_corpus(corpus, lexicon);
    auto vocab = build_vocab(seqs, options.min_count);
    return train(seqs, std::move(vocab), options.order, options.smoothing);
}

std::string BidirNGram::id() const { return "bidir" + std::to_string(order_); }

std::vector<std::pair<std::size_t, std::size_t>> BidirNGram::backoff_chain(std::size_t order, std::size_t left_avail,
                                                                           std::size_t right_avail) {
    std::vector<std::pair<std::size_t, std::size_t>> full;
    for (std::size_t n = order; n >= 1; --n) {
        full.emplace_back(n, n);
        full.emplace_back(n, n - 1);
    }
    full.emplace_back(0, 0);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (auto [l, r] : full) {
        std::pair<std::size_t, std::size_t> c{std::min(l, left_avail), std::min(r, right_avail)};
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
}

Distribution BidirNGram::predict(std::span<const std::optional<std::string>> slots, std::size_t position,
                                 std::size_t top_k) const {
    if (position >= slots.size() || slots[position].has_value())
        throw ContractError("predict_masked: slot " + std::to_string(position) + " is not masked");
    const std::size_t k = order_;
    std::vector<TokenId> left, right;  // left: nearest first while scanning
    for (std::size_t j = 1; j <= k; ++j) {
        if (j > position) {
            left.push_back(Vocab::kBos);
            continue;
        }
        const auto& s = slots[position - j];
        if (!s) break;
        left.push_back(vocab_.id(*s));
    }
    for (std::size_t j = 1; j <= k; ++j) {
        const std::size_t idx = position + j;
        if (idx >= slots.size()) {
            right.push_back(Vocab::kEos);
            continue;
        }
        const auto& s = slots[idx];
        if (!s) break;
        right.push_back(vocab_.id(*s));
    }

    const std::size_t candidates = vocab_.surface_count();
    std::vector<double> probs(vocab_.size(), -1.0);
    std::fill(probs.begin() + Vocab::kFirstSurface, probs.end(), 1.0 / static_cast<double>(candidates));

    auto chain = backoff_chain(k, left.size(), right.size());
    std::vector<TokenId> key;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        const auto [l, r] = *it;
        key.clear();
        for (std::size_t j = l; j >= 1; --j) key.push_back(left[j - 1]);
        for (std::size_t j = 0; j < r; ++j) key.push_back(right[j]);
        const auto& tab = table(l, r);
        if (auto found = tab.find(key); found != tab.end())
            detail::apply_backoff_level(probs, found->second, smoothing_, candidates);
    }
    return Distribution(top_entries(probs, top_k), position);
}

std::vector<Distribution> BidirNGram::predict_masked(std::span<const std::optional<std::string>> slots,
                                                     std::span<const std::size_t> positions, std::size_t top_k) {
    std::vector<Distribution> out;
    out.reserve(positions.size());
    for (std::size_t p : positions) out.push_back(predict(slots, p, top_k));
    return out;
}

std::uint64_t BidirNGram::count(std::span<const std::string> left, std::span<const std::string> right,
                                std::string_view center) const {
    if (left.size() > order_ || right.size() > order_) return 0;
    auto key = detail::to_ids(vocab_, left);
    auto r = detail::to_ids(vocab_, right);
    key.insert(key.end(), r.begin(), r.end());
    const auto& tab = table(left.size(), right.size());
    auto it = tab.find(key);
    if (it == tab.end()) return 0;
    const TokenId c = vocab_.id(center);
    for (const auto& [id, n] : it->second.counts)
        if (id == c) return n;
    return 0;
}

nlohmann::json BidirNGram::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "maskgen-ngram";
    j["version"] = 1;
    j["kind"] = "bidir";
    j["order"] = order_;
    j["smoothing"] = smoothing_;
    j["vocab"] = detail::vocab_surfaces(vocab_);
    nlohmann::ordered_json tables = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l <= order_; ++l)
        for (std::size_t r = 0; r <= order_; ++r) {
            nlohmann::ordered_json t;
            t["left"] = l;
            t["right"] = r;
            t["rows"] = detail::table_rows(table(l, r));
            tables.push_back(std::move(t));
        }
    j["tables"] = std::move(tables);
    return nlohmann::json::parse(j.dump());
}

BidirNGram BidirNGram::from_json(const nlohmann::json& j) {
    try {
        detail::check_header(j, "bidir");
        BidirNGram model(detail::vocab_from_json(j), j.at("order").get<std::size_t>(), j.at("smoothing").get<double>());
        for (const auto& t : j.at("tables")) {
            const auto l = t.at("left").get<std::size_t>(), r = t.at("right").get<std::size_t>();
            if (l > model.order_ || r > model.order_) throw ParseError("table window exceeds the model order");
            model.table(l, r) = detail::table_from_rows(t.at("rows"), l + r, model.vocab_.size());
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model file: ") + e.what());
    }
}

// ---------------------------------------------------------------- causal

CausalNGram::CausalNGram(Vocab vocab, std::size_t order, double smoothing, double context_bonus)
    : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing), context_bonus_(context_bonus),
      tables_(order + 1) {
    if (order_ < 1) throw ValidationError("n-gram order must be >= 1");
    if (!(smoothing_ > 0.0)) throw ValidationError("smoothing must be > 0");
    if (!(context_bonus_ >= 1.0)) throw ValidationError("context bonus must be >= 1");
}

CausalNGram CausalNGram::train(std::span<const TokenSequence> sequences, Vocab vocab, std::size_t order,
                               double smoothing, double context_bonus) {
    if (sequences.empty()) throw ValidationError("cannot train on an empty corpus");
    CausalNGram model(std::move(vocab), order, smoothing, context_bonus);
    const std::size_t k = order;
    std::vector<RawTable> raw(k + 1);
    std::vector<TokenId> padded;
    for (const auto& seq : sequences) {
        padded.assign(k, Vocab::kBos);
        for (const auto& t : seq.tokens) padded.push_back(model.vocab_.id(t.surface));
        padded.push_back(Vocab::kEos);
        for (std::size_t t = k; t < padded.size(); ++t) {
            const TokenId next = padded[t];
            if (next < Vocab::kFirstSurface && next != Vocab::kEos) continue;
            for (std::size_t h = 0; h <= k; ++h) {
                std::vector<TokenId> key(padded.begin() + static_cast<std::ptrdiff_t>(t - h),
                                         padded.begin() + static_cast<std::ptrdiff_t>(t));
                ++raw[h][key][next];
            }
        }
    }
    for (std::size_t h = 0; h <= k; ++h) detail::finalize_table(model.tables_[h], raw[h]);
    return model;
}

CausalNGram CausalNGram::train(const Corpus& corpus, const NGramOptions& options, const EntityLexicon* lexicon) {
    if (corpus.empty()) throw ValidationError("cannot train on an empty corpus");
    auto seqs = tokenize_corpus(corpus, lexicon);
    auto vocab = build_vocab(seqs, options.min_count);
    return train(seqs, std::move(vocab), options.order, options.smoothing, options.context_bonus);
}

std::string CausalNGram::id() const { return "causal" + std::to_string(order_); }

Distribution CausalNGram::predict(std::span<const std::string> prefix, std::span<const std::string> context,
                                  std::size_t top_k) const {
    const std::size_t k = order_;
    std::vector<TokenId> history(k, Vocab::kBos);
    for (const auto& s : prefix) history.push_back(vocab_.id(s));

    const std::size_t candidates = vocab_.surface_count() + 1;  // + EOS
    std::vector<double> probs(vocab_.size(), -1.0);
    const double uniform = 1.0 / static_cast<double>(candidates);
    std::fill(probs.begin() + Vocab::kFirstSurface, probs.end(), uniform);
    probs[Vocab::kEos] = uniform;

    for (std::size_t h = 0; h <= k; ++h) {
        std::vector<TokenId> key(history.end() - static_cast<std::ptrdiff_t>(h), history.end());
        if (auto it = tables_[h].find(key); it != tables_[h].end())
            detail::apply_backoff_level(probs, it->second, smoothing_, candidates);
    }

    if (!context.empty() && context_bonus_ != 1.0) {
        std::unordered_map<TokenId, long> remaining;
        for (const auto& s : context)
            if (auto id = vocab_.find(s); id && *id >= Vocab::kFirstSurface) ++remaining[*id];
        for (const auto& s : prefix)
            if (auto id = vocab_.find(s); id) {
                if (auto it = remaining.find(*id); it != remaining.end()) --it->second;
            }
        double sum = 0.0;
        for (const auto& [id, n] : remaining)
            if (n > 0) probs[id] *= context_bonus_;
        for (double p : probs)
            if (p > 0.0) sum += p;
        if (sum > 0.0)
            for (double& p : probs)
                if (p > 0.0) p /= sum;
    }
    return Distribution(top_entries(probs, top_k), prefix.size());
}

Distribution CausalNGram::predict_next(std::span<const std::string> prefix, std::span<const std::string> context,
                                       std::size_t top_k) {
    return predict(prefix, context, top_k);
}

std::uint64_t CausalNGram::count(std::span<const std::string> history, std::string_view next) const {
    if (history.size() > order_) return 0;
    auto key = detail::to_ids(vocab_, history);
    auto it = tables_[history.size()].find(key);
    if (it == tables_[history.size()].end()) return 0;
    const TokenId n = vocab_.id(next);
    for (const auto& [id, c] : it->second.counts)
        if (id == n) return c;
    return 0;
}

nlohmann::json CausalNGram::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "maskgen-ngram";
    j["version"] = 1;
    j["kind"] = "causal";
    j["order"] = order_;
    j["smoothing"] = smoothing_;
    j["context_bonus"] = context_bonus_;
    j["vocab"] = detail::vocab_surfaces(vocab_);
    nlohmann::ordered_json tables = nlohmann::ordered_json::array();
    for (std::size_t h = 0; h <= order_; ++h) {
        nlohmann::ordered_json t;
        t["history"] = h;
        t["rows"] = detail::table_rows(tables_[h]);
        tables.push_back(std::move(t));
    }
    j["tables"] = std::move(tables);
    return nlohmann::json::parse(j.dump());
}

CausalNGram CausalNGram::from_json(const nlohmann::json& j) {
    try {
        detail::check_header(j, "causal");
        CausalNGram model(detail::vocab_from_json(j), j.at("order").get<std::size_t>(),
                          j.at("smoothing").get<double>(), j.value("context_bonus", 2.0));
        for (const auto& t : j.at("tables")) {
            const auto h = t.at("history").get<std::size_t>();
            if (h > model.order_) throw ParseError("table history exceeds the model order");
            model.tables_[h] = detail::table_from_rows(t.at("rows"), h, model.vocab_.size());
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model file: ") + e.what());
    }
}

void save_model_json(const nlohmann::json& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << model.dump() << '\n';
}

nlohmann::json load_model_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid model JSON: ") + e.what());
    }
}

}  // namespace maskgen
