#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace raterlens {

inline constexpr int kMinRating = 0;
inline constexpr int kMaxRating = 4;  // 0 = least toxic, 4 = most toxic
inline constexpr std::size_t kDefaultHistoryCap = 20;

// Reference corpus sizes for the full-scale dataset this schema mirrors.
// Desk-scale synthetic corpora are far smaller; these document the target.
inline constexpr std::size_t kReferenceTrainSize = 488100;
inline constexpr std::size_t kReferenceDevSize = 25000;
inline constexpr std::size_t kReferenceTestSize = 25000;
inline constexpr std::size_t kReferenceRatersPerText = 5;
inline constexpr std::size_t kReferenceRatingsPerAnnotator = 20;

inline constexpr const char* kUndisclosed = "undisclosed";

enum class Split { train, dev, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

// Fixed category vocabularies. Validation is case-insensitive so data may
// carry display casing ("Bachelor's degree" vs "bachelor's degree").
namespace categories {
const std::vector<std::string>& race();
const std::vector<std::string>& gender();
const std::vector<std::string>& religion_importance();
const std::vector<std::string>& lgbt_status();
const std::vector<std::string>& education();
const std::vector<std::string>& parental_status();
const std::vector<std::string>& political_stance();
const std::vector<std::string>& age_band();
const std::vector<std::string>& forums();
const std::vector<std::string>& yes_no();
const std::vector<std::string>& toxicity_problem();
const std::vector<std::string>& tech_impact();

bool is_known(const std::vector<std::string>& vocab, const std::string& value);
}  // namespace categories

// Every field holds a known category or the explicit "undisclosed" marker;
// empty strings are rejected at load time.
struct Demographics {
    std::string race = kUndisclosed;
    std::string gender = kUndisclosed;
    std::string religion_importance = kUndisclosed;
    std::string lgbt_status = kUndisclosed;
    std::string education = kUndisclosed;
    std::string parental_status = kUndisclosed;
    std::string political_stance = kUndisclosed;
    std::string age_band = kUndisclosed;

    bool operator==(const Demographics&) const = default;
    void validate() const;
};

struct SurveyResponses {
    std::vector<std::string> preferred_forums;
    std::optional<std::string> uses_social_media;
    std::optional<std::string> seen_toxic_content;
    std::optional<std::string> personally_targeted;
    std::optional<std::string> toxicity_is_problem;
    std::optional<std::string> tech_impact_opinion;

    bool operator==(const SurveyResponses&) const = default;
    bool empty() const;
    void validate() const;  // at least one field present, values from vocab
};

struct HistoryEntry {
    std::string text_id;
    std::string text;
    int rating = 0;

    bool operator==(const HistoryEntry&) const = default;
};

struct RatingRecord {
    std::string text_id;
    std::string annotator_id;
    std::string text;
    int rating = 0;
    Split split = Split::train;

    bool operator==(const RatingRecord&) const = default;
};

struct AnnotatorProfile {
    std::string annotator_id;
    std::optional<Demographics> demographics;
    std::optional<SurveyResponses> survey;
    std::vector<HistoryEntry> history;

    bool operator==(const AnnotatorProfile&) const = default;
};

struct Corpus {
    std::vector<RatingRecord> records;
    std::map<std::string, AnnotatorProfile> annotators;

    bool operator==(const Corpus&) const = default;
    std::map<Split, std::size_t> split_sizes() const;
    std::vector<const RatingRecord*> records_in(Split split) const;
    const AnnotatorProfile& profile(const std::string& annotator_id) const;
};

enum class CorpusFormat { jsonl, csv };

CorpusFormat format_from_string(const std::string& name);

struct LoadOptions {
    std::size_t history_cap = kDefaultHistoryCap;
};

// Loads and validates. CSV carries records only; bare profiles are
// synthesized so every record still resolves. Warnings (e.g. an annotator
// exceeding the reference per-annotator quota) are appended if requested.
Corpus load_corpus(const std::string& path, CorpusFormat format,
                   std::vector<std::string>* warnings = nullptr,
                   const LoadOptions& options = {});

// Canonical serialization: stable field order, profiles (sorted by id) before
// records. save(load(x)) is byte-identical to x for canonical files.
void save_corpus(const Corpus& corpus, const std::string& path, CorpusFormat format);
std::string corpus_to_jsonl(const Corpus& corpus);
std::string corpus_to_csv(const Corpus& corpus);

std::map<Split, std::size_t> split_counts(const Corpus& corpus);

struct GeneratorParams {
    std::uint64_t seed = 0;
    std::size_t n_texts = 0;
    std::size_t raters_per_text = kReferenceRatersPerText;
    std::size_t ratings_per_annotator = kReferenceRatingsPerAnnotator;
    std::size_t history_cap = kDefaultHistoryCap;
};

// Synthetic corpus plus the latent variables that produced it, so tests can
// check the ratings against the generating model.
struct SynthCorpus {
    Corpus corpus;
    std::map<std::string, double> text_severity;   // text_id -> latent severity
    std::map<std::string, double> annotator_bias;  // annotator_id -> latent bias
};

// rating = clamp(round(text_severity + annotator_bias + noise), 0, 4).
// Each text gets exactly raters_per_text ratings and each annotator exactly
// ratings_per_annotator; survey responses determine the six predictable
// demographic attributes (annotators are drawn from a fixed persona table),
// which gives ablation and imputation experiments signal to find.
SynthCorpus generate_corpus(const GeneratorParams& params);

inline Corpus generate_corpus_records(const GeneratorParams& params) {
    return generate_corpus(params).corpus;
}

}  // namespace raterlens
