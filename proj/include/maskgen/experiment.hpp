#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskgen/corruption.hpp"
#include "maskgen/decoder.hpp"
#include "maskgen/downstream.hpp"
#include "maskgen/predictor.hpp"

namespace maskgen {

inline constexpr int kExperimentConfigVersion = 1;
inline constexpr const char* kCacheDirEnv = "MASKGEN_CACHE_DIR";

enum class DownstreamTask { none, ner, classification, authorship };

std::string to_string(DownstreamTask task);
DownstreamTask parse_downstream_task(std::string_view text);

struct DatasetSpec {
    std::string name;
    std::filesystem::path path;
    std::optional<std::filesystem::path> lexicon;  // TSV, needed by "ner"
    DownstreamTask downstream = DownstreamTask::none;
};

struct PredictorSpec {
    enum class Kind { ngram, remote };

    std::string id;
    Regime regime = Regime::mlm;
    Kind kind = Kind::ngram;
    std::size_t order = 3;
    double smoothing = 0.1;
    std::size_t min_count = 1;
    double context_bonus = 2.0;
    std::string endpoint;  // remote only

    nlohmann::ordered_json to_json() const;
};

struct DownstreamSpec {
    bool enabled = true;
    std::size_t top_k_labels = 5;
    std::size_t pairs_per_author = 3;
    TaggerOptions tagger;
    ClassifierOptions classifier;
    /// Policy for the synthetic training texts. Sampled by default: a greedy
    /// decoder maps every fully masked document of one length to one text.
    DecodePolicy decode{DecodePolicy::Mode::sample};
};

/// Versioned JSON document. Relative paths resolve against the config file.
///
///   {"version": 1, "experiment_id": "toy", "output_dir": "out",
///    "base_seed": 7, "sample_cap": 200, "train_fraction": 0.8,
///    "datasets":   [{"name", "path", "lexicon"?, "downstream"?}],
///    "predictors": [{"id", "regime", "kind": "ngram", "order", "smoothing"}
///                   | {"id", "regime", "kind": "remote", "endpoint"}],
///    "regimes": ["mlm", "clm"], "strategies": ["random", "stopwords", ...],
///    "ratios": [0.1, ...], "clm_full_mask": false,
///    "decode": {"mode", "temperature", "top_k", "length_cap_factor", "no_repeat_trigram"},
///    "downstream": {"enabled", "top_k_labels", "pairs_per_author", "tagger_epochs", "classifier_epochs",
///                   "decode": {...}},
///    "cache_dir"?: "...", "threads"?: 4}
struct ExperimentConfig {
    std::string experiment_id = "experiment";
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> cache_dir;  // default <output_dir>/cache
    std::uint64_t base_seed = 0;
    std::size_t sample_cap = 200;
    double train_fraction = 0.8;
    std::vector<DatasetSpec> datasets;
    std::vector<PredictorSpec> predictors;
    std::vector<Regime> regimes{Regime::mlm, Regime::clm};
    std::vector<std::string> strategies{"random", "stopwords", "punctuation", "stopwords_punctuation", "ner"};
    std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    bool clm_full_mask = false;  // CLM at ratio 1.0 has no context at all
    DecodePolicy decode;
    DownstreamSpec downstream;
    std::size_t threads = 0;  // 0: hardware concurrency

    void validate() const;
    /// Ratio-expanded grid for one predictor, in config order.
    std::vector<MaskingStrategy> cell_strategies(Regime regime) const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ResultRow {
    std::string experiment_id;
    std::string regime;
    std::string predictor_id;
    std::string strategy;
    std::optional<double> ratio;
    std::string metric_name;
    double value = 0.0;  // NaN on error rows
    std::size_t n_docs = 0;
    std::uint64_t seed = 0;

    bool operator==(const ResultRow& o) const;
};

/// Rows are unique on (experiment_id, regime, predictor_id, strategy, ratio,
/// metric_name) and kept sorted on that key.
class ResultsTable {
public:
    static constexpr const char* kHeader = "experiment_id,regime,predictor_id,strategy,ratio,metric_name,value,n_docs,seed";

    /// Throws ValidationError on a duplicate key.
    void add(ResultRow row);
    const std::vector<ResultRow>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    std::string to_csv() const;
    static ResultsTable parse_csv(std::string_view text);

    bool operator==(const ResultsTable&) const = default;

private:
    std::vector<ResultRow> rows_;
};

/// Shortest round-trip decimal; "nan" for NaN.
std::string format_number(double v);

/// Seed for one document in one grid cell.
std::uint64_t cell_seed(std::uint64_t base_seed, std::string_view doc_id, Regime regime, std::string_view predictor_id,
                        const MaskingStrategy& strategy);

/// Corrupt and regenerate one document; `mlm` or `clm` must match `regime`.
GenerationRecord generate_document(const TokenSequence& doc, Regime regime, MaskedPredictor* mlm, CausalPredictor* clm,
                                   const MaskingStrategy& strategy, std::uint64_t seed, DecodePolicy policy);

/// Entity-level F1 of a tagger trained on reference tags of `synthetic` texts.
double ner_harness(std::span<const Surfaces> synthetic, std::span<const TaggedSequence> test,
                   const EntityLexicon& lexicon, const TaggerOptions& options = {});

struct RunSummary {
    ResultsTable table;
    std::size_t cache_hits = 0;
    std::size_t generated = 0;
    std::size_t error_rows = 0;
    std::vector<std::string> errors;
    std::vector<DownstreamResult> downstream;
};

/// Runs the full grid. Cell failures become "error" rows and the run goes on.
RunSummary run_experiment(const ExperimentConfig& config);

/// results.csv plus one SVG per (experiment_id, metric) under `outdir`.
/// Returns the files written.
std::vector<std::filesystem::path> emit_report(const ResultsTable& table, const std::filesystem::path& outdir);

/// SVG for one (experiment_id, metric): curves for ratio sweeps, flat lines
/// for ratio-free strategies, one legend entry per series.
std::string render_plot(const ResultsTable& table, std::string_view experiment_id, std::string_view metric);

}  // namespace maskgen
