#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace maskgen {

struct Document {
    std::string id;
    std::string text;
    std::optional<std::vector<std::string>> labels;  // sorted, unique
    std::optional<std::string> author_id;

    bool operator==(const Document&) const = default;
};

struct Corpus {
    std::string name;
    std::vector<Document> documents;

    std::size_t size() const noexcept { return documents.size(); }
    bool empty() const noexcept { return documents.empty(); }
    bool operator==(const Corpus&) const = default;
};

enum class CorpusFormat { jsonl, plain_dir };

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct CorpusSummary {
    std::size_t documents = 0;
    std::size_t labelled = 0;
    std::size_t with_author = 0;
    std::size_t distinct_labels = 0;
    std::size_t distinct_authors = 0;
    std::size_t bytes = 0;
};

/// Checks every Document invariant plus id uniqueness. Throws ValidationError.
void validate_corpus(const Corpus& corpus);

/// Reads a corpus. JSONL: one {"id","text","labels"?,"author"?} object per
/// line, blank lines skipped. plain_dir: every *.txt file, id = file stem,
/// ordered by file name. The corpus name defaults to the path stem.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::jsonl);

/// Parses JSONL text; `name` becomes the corpus name.
Corpus parse_corpus_jsonl(std::string_view text, std::string name);

std::string serialize_corpus_jsonl(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Seeded, disjoint, exhaustive partition with |train| = round(fraction * N).
/// Both sides keep the corpus order of their members.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, const SplitSpec& spec);

/// The k labels with the highest document frequency, ties lexicographic.
std::vector<std::string> top_k_labels(const Corpus& corpus, std::size_t k);

CorpusSummary summarize(const Corpus& corpus);

CorpusFormat parse_corpus_format(std::string_view name);

}  // namespace maskgen
