#pragma once
// Slow, obviously-correct reference implementations used to check the
// library. They share no code with src/ beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Words = std::vector<std::string>;

// Occurrences of the n-gram starting at `at` in `seq`, by linear scan.
inline std::size_t occurrences(const Words& seq, const Words& gram) {
    std::size_t k = 0;
    for (std::size_t i = 0; i + gram.size() <= seq.size(); ++i)
        if (std::equal(gram.begin(), gram.end(), seq.begin() + static_cast<long>(i))) ++k;
    return k;
}

// Clipped n-gram matches: for every distinct candidate n-gram,
// min(count in candidate, count in reference).
inline std::size_t clipped(const Words& cand, const Words& ref, std::size_t n) {
    std::vector<Words> seen;
    std::size_t total = 0;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
        Words g(cand.begin() + static_cast<long>(i), cand.begin() + static_cast<long>(i + n));
        if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
        seen.push_back(g);
        total += std::min(occurrences(cand, g), occurrences(ref, g));
    }
    return total;
}

// Corpus BLEU with uniform weights and pooled counts. A zero unigram bucket
// gives 0; a zero bucket for n >= 2 counts as 1 / (2 * bucket size).
inline double bleu(const std::vector<Words>& cands, const std::vector<Words>& refs, std::size_t max_n = 4) {
    double c = 0, r = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        c += static_cast<double>(cands[i].size());
        r += static_cast<double>(refs[i].size());
    }
    if (c == 0) return 0.0;
    double product = 1.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        double m = 0, t = 0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            m += static_cast<double>(clipped(cands[i], refs[i], n));
            t += cands[i].size() >= n ? static_cast<double>(cands[i].size() - n + 1) : 0.0;
        }
        double p;
        if (m == 0) {
            if (n == 1) return 0.0;
            p = 1.0 / (2.0 * std::max(t, 1.0));
        } else {
            p = m / t;
        }
        product *= std::pow(p, 1.0 / static_cast<double>(max_n));
    }
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * product;
}

// Multiset intersection size over the reference length.
inline double rouge1(const Words& cand, const Words& ref) {
    std::vector<bool> used(ref.size(), false);
    std::size_t hit = 0;
    for (const auto& w : cand)
        for (std::size_t j = 0; j < ref.size(); ++j)
            if (!used[j] && ref[j] == w) {
                used[j] = true;
                ++hit;
                break;
            }
    return static_cast<double>(hit) / static_cast<double>(ref.size());
}

// ---- METEOR by exhaustive enumeration of maximum alignments

struct Alignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

// Number of candidate->reference injections that use the maximum number of
// matches; lets callers skip pairs too large to enumerate.
inline double alignment_count(const Words& cand, const Words& ref) {
    std::vector<std::string> types(cand.begin(), cand.end());
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());
    double total = 1.0;
    for (const auto& t : types) {
        const auto a = static_cast<double>(std::count(cand.begin(), cand.end(), t));
        const auto b = static_cast<double>(std::count(ref.begin(), ref.end(), t));
        const double lo = std::min(a, b), hi = std::max(a, b);
        // choose which lo of the hi occurrences, in every order
        double ways = 1.0;
        for (double k = 0; k < lo; ++k) ways *= (hi - k);
        total *= ways;
    }
    return total;
}

inline std::size_t count_chunks(const std::vector<long>& map_to_ref) {
    std::size_t chunks = 0;
    for (std::size_t i = 0; i < map_to_ref.size(); ++i) {
        if (map_to_ref[i] < 0) continue;
        const bool continues = i > 0 && map_to_ref[i - 1] >= 0 && map_to_ref[i - 1] + 1 == map_to_ref[i];
        if (!continues) ++chunks;
    }
    return chunks;
}

// Tries every way to align each candidate token to an unused equal
// reference token (or leave it unaligned), keeps the alignments with the
// most matches, and among those the fewest chunks.
inline Alignment best_alignment(const Words& cand, const Words& ref) {
    Alignment best{0, std::numeric_limits<std::size_t>::max()};
    std::vector<long> map(cand.size(), -1);
    std::vector<bool> used(ref.size(), false);
    // Upper bound on matches still available from position i on, used only
    // to skip branches that cannot reach the best match count found so far.
    auto remaining = [&](std::size_t i) {
        std::size_t k = 0;
        std::vector<bool> u = used;
        for (std::size_t x = i; x < cand.size(); ++x)
            for (std::size_t j = 0; j < ref.size(); ++j)
                if (!u[j] && ref[j] == cand[x]) {
                    u[j] = true;
                    ++k;
                    break;
                }
        return k;
    };
    auto rec = [&](auto&& self, std::size_t i, std::size_t m) -> void {
        const std::size_t reach = m + remaining(i);
        if (reach < best.matches) return;
        // chunks never decrease as the map grows, so a branch that cannot
        // add matches and already has too many chunks cannot win
        if (reach == best.matches && count_chunks(map) >= best.chunks) return;
        if (i == cand.size()) {
            const std::size_t ch = count_chunks(map);
            if (m > best.matches || (m == best.matches && ch < best.chunks)) best = {m, ch};
            return;
        }
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (used[j] || ref[j] != cand[i]) continue;
            used[j] = true;
            map[i] = static_cast<long>(j);
            self(self, i + 1, m + 1);
            map[i] = -1;
            used[j] = false;
        }
        self(self, i + 1, m);
    };
    rec(rec, 0, 0);
    if (best.matches == 0) best.chunks = 0;
    return best;
}

inline double meteor(const Words& cand, const Words& ref) {
    const auto a = best_alignment(cand, ref);
    if (a.matches == 0) return 0.0;
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(cand.size());
    const double r = m / static_cast<double>(ref.size());
    const double f = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / m;
    return f * (1.0 - 0.5 * frag * frag * frag);
}

// ---- SemScore by all-pairs maximisation

inline double cosine(const std::vector<double>& x, const std::vector<double>& y) {
    double dot = 0, nx = 0, ny = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0 || ny == 0) return 0.0;
    return std::clamp(dot / std::sqrt(nx * ny), -1.0, 1.0);
}

// `vec(token)` and `idf(token)` come from the embedding table under test;
// the matching and weighting are recomputed here.
template <class VecFn, class IdfFn>
double semscore(const Words& cand, const Words& ref, VecFn vec, IdfFn idf) {
    std::vector<double> best(ref.size(), -2.0);
    for (std::size_t j = 0; j < ref.size(); ++j)
        for (const auto& c : cand) {
            const double s = c == ref[j] ? 1.0 : cosine(vec(ref[j]), vec(c));
            best[j] = std::max(best[j], s);
        }
    double wsum = 0, w = 0;
    for (std::size_t j = 0; j < ref.size(); ++j) {
        wsum += idf(ref[j]) * best[j];
        w += idf(ref[j]);
    }
    if (w > 0) return wsum / w;
    double s = 0;
    for (double b : best) s += b;
    return s / static_cast<double>(ref.size());
}

// ---- random inputs

inline Words random_words(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
    std::uniform_int_distribution<std::size_t> len(min_len, max_len), tok(0, vocab - 1);
    Words w(len(rng));
    for (auto& s : w) s = "w" + std::to_string(tok(rng));
    return w;
}

// floor(r * n + 1/2) evaluated exactly for decimal ratios r = num / 10^k.
inline std::size_t mask_count(std::uint64_t num, std::uint64_t den, std::size_t n) {
    return static_cast<std::size_t>((2 * num * n + den) / (2 * den));
}

}  // namespace oracle
