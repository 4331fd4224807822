#include "raterlens/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "raterlens/demographics.hpp"
#include "raterlens/embed_head.hpp"
#include "raterlens/errors.hpp"
#include "raterlens/ncf.hpp"
#include "raterlens/util.hpp"
#include "serialize.hpp"

namespace raterlens {

using ordered_json = nlohmann::ordered_json;

double mae(const std::vector<int>& predictions, const std::vector<int>& truths) {
    if (predictions.empty()) throw ValidationError("mae of empty prediction list");
    if (predictions.size() != truths.size()) {
        throw ValidationError("mae length mismatch: " + std::to_string(predictions.size()) +
                              " predictions vs " + std::to_string(truths.size()) + " truths");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] < kMinRating || predictions[i] > kMaxRating ||
            truths[i] < kMinRating || truths[i] > kMaxRating) {
            throw ValidationError("mae inputs must be ratings in 0-4");
        }
        total += std::abs(predictions[i] - truths[i]);
    }
    return total / static_cast<double>(predictions.size());
}

double relative_improvement(double baseline_mae, double mae_value) {
    if (!(baseline_mae > 0.0)) {
        throw ValidationError("relative improvement needs a positive baseline MAE");
    }
    return 100.0 * (baseline_mae - mae_value) / baseline_mae;
}

PredictorKind predictor_from_string(const std::string& name) {
    if (name == "ncf") return PredictorKind::ncf;
    if (name == "embed_head" || name == "embed") return PredictorKind::embed_head;
    if (name == "icl") return PredictorKind::icl;
    if (name == "stub_constant" || name == "stub") return PredictorKind::stub_constant;
    throw ConfigError("unknown predictor '" + name + "'");
}

std::string to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::ncf: return "ncf";
        case PredictorKind::embed_head: return "embed_head";
        case PredictorKind::icl: return "icl";
        case PredictorKind::stub_constant: return "stub_constant";
    }
    throw ConfigError("unknown predictor kind");
}

void ExperimentSpec::validate() const {
    ablation.validate();
    if (predictor == PredictorKind::icl) {
        chat.validate();
    } else if (predictor != PredictorKind::stub_constant) {
        provider.validate();
    }
    if (predictor == PredictorKind::stub_constant &&
        (stub_value < kMinRating || stub_value > kMaxRating)) {
        throw ConfigError("stub predictor value must be a rating in 0-4");
    }
}

std::vector<AblationSpec> canonical_ablations() {
    auto make = [](bool h, bool s, DemoSource d) {
        AblationSpec spec;
        spec.use_history = h;
        spec.use_survey = s;
        spec.use_demographics = d != DemoSource::none;
        spec.demographics_source = d;
        return spec;
    };
    return {
        make(false, false, DemoSource::none),         // Text only
        make(false, false, DemoSource::true_values),  // + demo.
        make(true, false, DemoSource::true_values),   // + demo. + history
        make(true, false, DemoSource::none),          // + history
        make(false, true, DemoSource::none),          // + survey
        make(false, true, DemoSource::true_values),   // + demo. + survey
        make(true, true, DemoSource::none),           // + history + survey
        make(true, true, DemoSource::predicted),      // + predicted demo. + history + survey
        make(true, true, DemoSource::true_values),    // + demo. + history + survey
    };
}

std::vector<ExperimentSpec> canonical_matrix(const ExperimentSpec& base) {
    std::vector<ExperimentSpec> specs;
    for (const auto& ablation : canonical_ablations()) {
        ExperimentSpec spec = base;
        spec.ablation = ablation;
        specs.push_back(std::move(spec));
    }
    return specs;
}

bool MetricsReport::any_error() const {
    return std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.ok; });
}

namespace {

struct CellOutcome {
    double mae = 0.0;
    std::size_t n = 0;
    std::size_t parse_failures = 0;
    std::size_t fallbacks = 0;
};

CellOutcome run_cell(const Corpus& corpus, const ExperimentSpec& spec,
                     const std::filesystem::path& cache_dir,
                     const PredictedDemographics* predicted) {
    spec.validate();
    auto eval_records = corpus.records_in(spec.split);
    if (eval_records.empty()) {
        throw ValidationError("no records in evaluation split '" + to_string(spec.split) + "'");
    }

    TrainConfig train_cfg = spec.train;
    train_cfg.seed = mix_seeds(spec.seed, fnv1a64(spec.ablation.to_csv()));

    CellOutcome outcome;
    outcome.n = eval_records.size();

    std::vector<int> predictions;
    std::vector<int> truths;
    truths.reserve(eval_records.size());
    for (const auto* record : eval_records) truths.push_back(record->rating);

    switch (spec.predictor) {
        case PredictorKind::stub_constant: {
            predictions.assign(eval_records.size(), spec.stub_value);
            break;
        }
        case PredictorKind::embed_head: {
            Encoder encoder(spec.provider, cache_dir);
            auto trained = embedhead_train(corpus, encoder, spec.ablation, train_cfg, predicted,
                                           {.log_dev_mae = false});
            outcome.mae =
                embedhead_split_mae(trained.model, encoder, corpus, spec.split, predicted);
            return outcome;
        }
        case PredictorKind::ncf: {
            Encoder encoder(spec.provider, cache_dir);
            NcfTrainOptions options;
            options.text_ablation = spec.ablation;
            auto model = ncf_train(corpus, encoder, train_cfg, options, predicted);
            outcome.mae = ncf_split_mae(model, encoder, corpus, spec.split, predicted);
            return outcome;
        }
        case PredictorKind::icl: {
            auto client = ChatClient::make(spec.chat);
            predictions.reserve(eval_records.size());
            for (const auto* record : eval_records) {
                const auto& profile = corpus.profile(record->annotator_id);
                const Demographics* pd = nullptr;
                if (predicted) {
                    auto it = predicted->find(record->annotator_id);
                    if (it != predicted->end()) pd = &it->second;
                }
                if (spec.ablation.demographics_source == DemoSource::predicted && !pd) {
                    throw ConfigError("no predicted demographics for annotator '" +
                                      record->annotator_id + "'");
                }
                auto prompt = build_prompt(*record, profile, spec.ablation, pd);
                // Batch harness policy: keep the run going, flag the fallback.
                auto result = icl_predict(*client, prompt, FallbackPolicy::fallback_mid);
                if (result.flagged) {
                    outcome.parse_failures += 1;
                    outcome.fallbacks += 1;
                }
                predictions.push_back(result.rating);
            }
            break;
        }
    }
    outcome.mae = mae(predictions, truths);
    return outcome;
}

bool matrix_needs_imputation(const std::vector<ExperimentSpec>& specs) {
    return std::any_of(specs.begin(), specs.end(), [](const ExperimentSpec& spec) {
        return spec.ablation.demographics_source == DemoSource::predicted;
    });
}

}  // namespace

MetricsReport run_ablation_matrix(const Corpus& corpus, const std::vector<ExperimentSpec>& specs,
                                  const std::filesystem::path& cache_dir) {
    if (specs.empty()) throw ConfigError("ablation matrix needs at least one experiment");
    MetricsReport report;
    report.predictor = to_string(specs.front().predictor);
    report.split = to_string(specs.front().split);

    // Predicted-demographics rows share one imputation pass.
    PredictedDemographics predicted;
    bool have_predicted = false;
    if (matrix_needs_imputation(specs)) {
        const auto& base = specs.front();
        ProviderSpec imputer_provider =
            base.predictor == PredictorKind::icl ? ProviderSpec::mock("mock-large", base.seed)
                                                 : base.provider;
        Encoder encoder(imputer_provider, cache_dir);
        TrainConfig imputer_cfg = base.train;
        imputer_cfg.seed = mix_seeds(base.seed, fnv1a64("raterlens-imputer"));
        if (imputer_cfg.epochs <= 0) imputer_cfg.epochs = 60;
        std::vector<DemoClassifier> classifiers;
        for (const auto& attribute : predictable_attributes()) {
            classifiers.push_back(demo_train(
                corpus, DemographicTask::standard(attribute, DemoInputMode::survey_only), encoder,
                imputer_cfg));
        }
        predicted = imputed_to_demographics(impute(corpus, classifiers, encoder));
        have_predicted = true;
    }

    std::optional<double> text_only_mae;
    for (const auto& spec : specs) {
        ReportRow row;
        row.label = spec.ablation.label();
        try {
            const PredictedDemographics* pd = have_predicted ? &predicted : nullptr;
            auto outcome = run_cell(corpus, spec, cache_dir, pd);
            row.mae = outcome.mae;
            row.n = outcome.n;
            row.parse_failures = outcome.parse_failures;
            row.fallbacks = outcome.fallbacks;
            if (row.label == "Text only" && !text_only_mae) text_only_mae = row.mae;
            if (text_only_mae && *text_only_mae > 0.0) {
                row.relative_improvement_vs_text_only =
                    relative_improvement(*text_only_mae, row.mae);
            }
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

std::string format_mae(double value) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << value;
    return ss.str();
}

std::string format_percent(double value) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << value << "%";
    return ss.str();
}

}  // namespace

std::string report_to_text(const MetricsReport& report) {
    std::size_t label_width = std::string("Model").size();
    for (const auto& row : report.rows) label_width = std::max(label_width, row.label.size());

    std::ostringstream out;
    out << "predictor: " << report.predictor << "  split: " << report.split << "\n";
    out << std::left << std::setw(static_cast<int>(label_width) + 2) << "Model"
        << std::setw(10) << "MAE" << std::setw(8) << "n" << std::setw(10) << "parse_fail"
        << "  vs text-only\n";
    for (const auto& row : report.rows) {
        out << std::left << std::setw(static_cast<int>(label_width) + 2) << row.label;
        if (!row.ok) {
            out << "ERROR: " << row.error << "\n";
            continue;
        }
        out << std::setw(10) << format_mae(row.mae) << std::setw(8) << row.n << std::setw(10)
            << row.parse_failures;
        if (row.relative_improvement_vs_text_only) {
            out << "  " << format_percent(*row.relative_improvement_vs_text_only);
        }
        out << "\n";
    }
    return out.str();
}

void render_report(const MetricsReport& report, const std::filesystem::path& out_dir) {
    if (report.rows.empty()) throw ValidationError("cannot render an empty report");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create report directory: " + out_dir.string());

    ordered_json j;
    j["format"] = "raterlens-report";
    j["version"] = 1;
    j["predictor"] = report.predictor;
    j["split"] = report.split;
    ordered_json rows = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json rj;
        rj["label"] = row.label;
        rj["ok"] = row.ok;
        if (!row.ok) {
            rj["error"] = row.error;
        } else {
            rj["mae"] = row.mae;
            rj["n"] = row.n;
            rj["parse_failures"] = row.parse_failures;
            rj["fallbacks"] = row.fallbacks;
            if (row.relative_improvement_vs_text_only) {
                rj["relative_improvement_vs_text_only"] = *row.relative_improvement_vs_text_only;
            }
        }
        rows.push_back(std::move(rj));
    }
    j["rows"] = std::move(rows);

    write_file((out_dir / "report.json").string(), j.dump(2) + "\n");
    write_file((out_dir / "report.txt").string(), report_to_text(report));
}

MetricsReport parse_report(const std::filesystem::path& json_path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(json_path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad report file: ") + e.what());
    }
    if (j.value("format", "") != "raterlens-report") throw ParseError("not a raterlens report");
    MetricsReport report;
    report.predictor = j.value("predictor", std::string());
    report.split = j.value("split", std::string());
    for (const auto& rj : j.at("rows")) {
        ReportRow row;
        row.label = rj.at("label").get<std::string>();
        row.ok = rj.value("ok", true);
        if (!row.ok) {
            row.error = rj.value("error", std::string());
        } else {
            row.mae = rj.at("mae").get<double>();
            row.n = rj.at("n").get<std::size_t>();
            row.parse_failures = rj.value("parse_failures", std::size_t{0});
            row.fallbacks = rj.value("fallbacks", std::size_t{0});
            if (rj.contains("relative_improvement_vs_text_only")) {
                row.relative_improvement_vs_text_only =
                    rj.at("relative_improvement_vs_text_only").get<double>();
            }
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

ReferenceTable load_reference_table(const std::filesystem::path& json_path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(json_path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad reference table: ") + e.what());
    }
    ReferenceTable table;
    table.columns = j.at("columns").get<std::vector<std::string>>();
    table.row_labels = j.at("rows").get<std::vector<std::string>>();
    table.values = j.at("values").get<std::vector<std::vector<double>>>();
    if (table.values.size() != table.row_labels.size()) {
        throw ValidationError("reference table row count mismatch");
    }
    for (const auto& row : table.values) {
        if (row.size() != table.columns.size()) {
            throw ValidationError("reference table column count mismatch");
        }
    }
    return table;
}

std::string render_reference_table(const ReferenceTable& table, bool bold_minima) {
    std::vector<std::size_t> min_row(table.columns.size(), 0);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        for (std::size_t r = 1; r < table.values.size(); ++r) {
            if (table.values[r][c] < table.values[min_row[c]][c]) min_row[c] = r;
        }
    }

    std::size_t label_width = std::string("Model").size();
    for (const auto& label : table.row_labels) label_width = std::max(label_width, label.size());

    auto cell = [&](std::size_t r, std::size_t c) {
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(2) << table.values[r][c];
        std::string text = ss.str();
        if (bold_minima && min_row[c] == r) text = "**" + text + "**";
        return text;
    };

    std::vector<std::size_t> widths(table.columns.size());
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        widths[c] = table.columns[c].size();
        for (std::size_t r = 0; r < table.values.size(); ++r) {
            widths[c] = std::max(widths[c], cell(r, c).size());
        }
    }

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(label_width) + 2) << "Model";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        out << std::setw(static_cast<int>(widths[c]) + 2) << table.columns[c];
    }
    out << "\n";
    for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
        out << std::left << std::setw(static_cast<int>(label_width) + 2) << table.row_labels[r];
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            out << std::setw(static_cast<int>(widths[c]) + 2) << cell(r, c);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace raterlens
