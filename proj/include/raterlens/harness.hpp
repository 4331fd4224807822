#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "raterlens/contexting.hpp"
#include "raterlens/corpus.hpp"
#include "raterlens/encoder.hpp"
#include "raterlens/icl.hpp"
#include "raterlens/neuralcore.hpp"

namespace raterlens {

// Micro-averaged over all (text, annotator) pairs.
double mae(const std::vector<int>& predictions, const std::vector<int>& truths);

// 100 * (baseline - value) / baseline
double relative_improvement(double baseline_mae, double mae_value);

enum class PredictorKind { ncf, embed_head, icl, stub_constant };

PredictorKind predictor_from_string(const std::string& name);
std::string to_string(PredictorKind kind);

// Evaluation split for a matrix cell. train is accepted beyond the dev/test
// pair so memorization-style checks can run through the same harness.
struct ExperimentSpec {
    PredictorKind predictor = PredictorKind::embed_head;
    ProviderSpec provider;
    ChatSpec chat;
    AblationSpec ablation;
    Split split = Split::dev;
    std::uint64_t seed = 0;
    TrainConfig train;
    int stub_value = 2;  // stub_constant only

    void validate() const;
};

// The nine canonical context configurations, in table order.
std::vector<AblationSpec> canonical_ablations();

// One base spec fanned out across the canonical ablations.
std::vector<ExperimentSpec> canonical_matrix(const ExperimentSpec& base);

struct ReportRow {
    std::string label;
    bool ok = true;
    std::string error;  // when !ok
    double mae = 0.0;
    std::size_t n = 0;
    std::size_t parse_failures = 0;
    std::size_t fallbacks = 0;
    std::optional<double> relative_improvement_vs_text_only;  // percent

    bool operator==(const ReportRow&) const = default;
};

struct MetricsReport {
    std::string predictor;
    std::string split;
    std::vector<ReportRow> rows;

    bool operator==(const MetricsReport&) const = default;
    bool any_error() const;
};

// Runs each cell independently; a failed cell becomes an error row and the
// remaining cells still run. Predicted-demographics rows train the six
// survey-only imputers first (once per matrix).
MetricsReport run_ablation_matrix(const Corpus& corpus, const std::vector<ExperimentSpec>& specs,
                                  const std::filesystem::path& cache_dir);

// report.json (structured, round-trips through parse_report) and report.txt
// (aligned table with the same row labels).
void render_report(const MetricsReport& report, const std::filesystem::path& out_dir);
MetricsReport parse_report(const std::filesystem::path& json_path);
std::string report_to_text(const MetricsReport& report);

// Multi-column reference tables (e.g. published results) with per-column
// minimum bolding in the text rendering.
struct ReferenceTable {
    std::vector<std::string> columns;
    std::vector<std::string> row_labels;
    std::vector<std::vector<double>> values;  // [row][column]

    bool operator==(const ReferenceTable&) const = default;
};

ReferenceTable load_reference_table(const std::filesystem::path& json_path);
std::string render_reference_table(const ReferenceTable& table, bool bold_minima = true);

}  // namespace raterlens
