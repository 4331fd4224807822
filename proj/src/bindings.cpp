#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "raterlens/contexting.hpp"
#include "raterlens/corpus.hpp"
#include "raterlens/demographics.hpp"
#include "raterlens/embed_head.hpp"
#include "raterlens/encoder.hpp"
#include "raterlens/errors.hpp"
#include "raterlens/harness.hpp"
#include "raterlens/icl.hpp"
#include "raterlens/ncf.hpp"
#include "raterlens/neuralcore.hpp"

namespace py = pybind11;
using namespace raterlens;

namespace {

const RatingRecord& find_record(const Corpus& corpus, const std::string& text_id,
                                const std::string& annotator_id) {
    for (const auto& record : corpus.records) {
        if (record.text_id == text_id && record.annotator_id == annotator_id) return record;
    }
    throw LookupError("no record (" + text_id + ", " + annotator_id + ")");
}

std::map<std::string, std::size_t> split_counts_by_name(const Corpus& corpus) {
    std::map<std::string, std::size_t> out;
    for (const auto& [split, count] : split_counts(corpus)) out[to_string(split)] = count;
    return out;
}

}  // namespace

PYBIND11_MODULE(_raterlens, m) {
    m.doc() = "Annotator-aware toxicity rating prediction toolkit";

    py::register_exception<Error>(m, "RaterlensError");

    py::class_<Demographics>(m, "Demographics")
        .def(py::init<>())
        .def_readwrite("race", &Demographics::race)
        .def_readwrite("gender", &Demographics::gender)
        .def_readwrite("religion_importance", &Demographics::religion_importance)
        .def_readwrite("lgbt_status", &Demographics::lgbt_status)
        .def_readwrite("education", &Demographics::education)
        .def_readwrite("parental_status", &Demographics::parental_status)
        .def_readwrite("political_stance", &Demographics::political_stance)
        .def_readwrite("age_band", &Demographics::age_band)
        .def("__eq__", [](const Demographics& a, const Demographics& b) { return a == b; });

    py::class_<SurveyResponses>(m, "SurveyResponses")
        .def(py::init<>())
        .def_readwrite("preferred_forums", &SurveyResponses::preferred_forums)
        .def_readwrite("uses_social_media", &SurveyResponses::uses_social_media)
        .def_readwrite("seen_toxic_content", &SurveyResponses::seen_toxic_content)
        .def_readwrite("personally_targeted", &SurveyResponses::personally_targeted)
        .def_readwrite("toxicity_is_problem", &SurveyResponses::toxicity_is_problem)
        .def_readwrite("tech_impact_opinion", &SurveyResponses::tech_impact_opinion);

    py::class_<HistoryEntry>(m, "HistoryEntry")
        .def(py::init<>())
        .def_readwrite("text_id", &HistoryEntry::text_id)
        .def_readwrite("text", &HistoryEntry::text)
        .def_readwrite("rating", &HistoryEntry::rating);

    py::class_<RatingRecord>(m, "RatingRecord")
        .def(py::init<>())
        .def_readwrite("text_id", &RatingRecord::text_id)
        .def_readwrite("annotator_id", &RatingRecord::annotator_id)
        .def_readwrite("text", &RatingRecord::text)
        .def_readwrite("rating", &RatingRecord::rating)
        .def_property(
            "split", [](const RatingRecord& r) { return to_string(r.split); },
            [](RatingRecord& r, const std::string& s) { r.split = split_from_string(s); });

    py::class_<AnnotatorProfile>(m, "AnnotatorProfile")
        .def(py::init<>())
        .def_readwrite("annotator_id", &AnnotatorProfile::annotator_id)
        .def_readwrite("demographics", &AnnotatorProfile::demographics)
        .def_readwrite("survey", &AnnotatorProfile::survey)
        .def_readwrite("history", &AnnotatorProfile::history);

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def_readonly("records", &Corpus::records)
        .def("profile", &Corpus::profile, py::return_value_policy::reference_internal)
        .def("annotator_ids",
             [](const Corpus& corpus) {
                 std::vector<std::string> ids;
                 for (const auto& [id, _] : corpus.annotators) ids.push_back(id);
                 return ids;
             })
        .def("split_counts", &split_counts_by_name)
        .def("record", &find_record, py::return_value_policy::reference_internal)
        .def("save",
             [](const Corpus& corpus, const std::string& path, const std::string& format) {
                 save_corpus(corpus, path, format_from_string(format));
             },
             py::arg("path"), py::arg("format") = "jsonl")
        .def("__len__", [](const Corpus& corpus) { return corpus.records.size(); })
        .def("__eq__", [](const Corpus& a, const Corpus& b) { return a == b; });

    py::class_<SynthCorpus>(m, "SynthCorpus")
        .def_readonly("corpus", &SynthCorpus::corpus)
        .def_readonly("text_severity", &SynthCorpus::text_severity)
        .def_readonly("annotator_bias", &SynthCorpus::annotator_bias);

    m.def(
        "generate_corpus",
        [](std::uint64_t seed, std::size_t n_texts, std::size_t raters_per_text,
           std::size_t ratings_per_annotator) {
            return generate_corpus(
                {seed, n_texts, raters_per_text, ratings_per_annotator, kDefaultHistoryCap});
        },
        py::arg("seed"), py::arg("n_texts"), py::arg("raters_per_text") = kReferenceRatersPerText,
        py::arg("ratings_per_annotator") = kReferenceRatingsPerAnnotator);

    m.def(
        "load_corpus",
        [](const std::string& path, const std::string& format) {
            return load_corpus(path, format_from_string(format));
        },
        py::arg("path"), py::arg("format") = "jsonl");

    py::class_<AblationSpec>(m, "AblationSpec")
        .def(py::init<>())
        .def_static("parse", &AblationSpec::parse)
        .def_static("text_only", &AblationSpec::text_only)
        .def_static("all_context", &AblationSpec::all_context)
        .def_readwrite("use_history", &AblationSpec::use_history)
        .def_readwrite("use_survey", &AblationSpec::use_survey)
        .def_readwrite("use_demographics", &AblationSpec::use_demographics)
        .def("label", &AblationSpec::label)
        .def("to_csv", &AblationSpec::to_csv);

    m.def("render_demographics", &render_demographics);
    m.def("render_survey", &render_survey);
    m.def(
        "render_history",
        [](const std::vector<HistoryEntry>& history, const std::string& exclude_text_id) {
            return render_history(history, exclude_text_id);
        },
        py::arg("history"), py::arg("exclude_text_id") = "");
    m.def(
        "render_context",
        [](const RatingRecord& record, const AnnotatorProfile& profile, const AblationSpec& spec,
           const Demographics* predicted) {
            return render_context(record, profile, spec, predicted).joined;
        },
        py::arg("record"), py::arg("profile"), py::arg("spec"), py::arg("predicted") = nullptr);

    m.def(
        "build_prompt",
        [](const RatingRecord& record, const AnnotatorProfile& profile, const AblationSpec& spec,
           const Demographics* predicted) {
            auto pair = build_prompt(record, profile, spec, predicted);
            return py::make_tuple(pair.system, pair.user);
        },
        py::arg("record"), py::arg("profile"), py::arg("spec"), py::arg("predicted") = nullptr);
    m.def("parse_rating", &parse_rating);
    m.attr("SYSTEM_PROMPT") = kIclSystemPrompt;
    m.attr("SEPARATOR") = kSeparator;

    py::class_<ProviderSpec>(m, "ProviderSpec")
        .def_static("mock", &ProviderSpec::mock, py::arg("model_id") = "mock-large",
                    py::arg("seed") = 0, py::arg("dimension") = 0)
        .def_static("http", &ProviderSpec::http)
        .def_readwrite("provider_id", &ProviderSpec::provider_id)
        .def_readwrite("model_id", &ProviderSpec::model_id)
        .def_readwrite("dimension", &ProviderSpec::dimension);

    py::class_<Encoder>(m, "Encoder")
        .def(py::init<ProviderSpec, std::filesystem::path, EncoderOptions>(), py::arg("spec"),
             py::arg("cache_dir") = std::filesystem::path(),
             py::arg("options") = EncoderOptions{})
        .def("embed", [](Encoder& e, const std::string& text) { return e.embed(text).values; })
        .def("embed_batch",
             [](Encoder& e, const std::vector<std::string>& texts) {
                 std::vector<std::vector<double>> out;
                 for (auto& v : e.embed_batch(texts)) out.push_back(std::move(v.values));
                 return out;
             })
        .def_property_readonly("provider_calls", &Encoder::provider_calls);

    py::class_<EncoderOptions>(m, "EncoderOptions")
        .def(py::init<>())
        .def_readwrite("max_in_flight", &EncoderOptions::max_in_flight)
        .def_readwrite("max_retries", &EncoderOptions::max_retries);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("l2", &TrainConfig::l2);

    py::class_<EmbedHeadModel>(m, "EmbedHeadModel")
        .def("predict",
             [](const EmbedHeadModel& model, Encoder& encoder, const RatingRecord& record,
                const AnnotatorProfile& profile) {
                 return embedhead_predict(model, encoder, record, profile);
             })
        .def("split_mae",
             [](const EmbedHeadModel& model, Encoder& encoder, const Corpus& corpus,
                const std::string& split) {
                 return embedhead_split_mae(model, encoder, corpus, split_from_string(split));
             });

    py::class_<EmbedHeadTrainResult>(m, "EmbedHeadTrainResult")
        .def_readonly("model", &EmbedHeadTrainResult::model)
        .def_readonly("epoch_loss", &EmbedHeadTrainResult::epoch_loss)
        .def_readonly("dev_mae", &EmbedHeadTrainResult::dev_mae);

    m.def(
        "train_embed_head",
        [](const Corpus& corpus, Encoder& encoder, const AblationSpec& ablation,
           const TrainConfig& cfg) { return embedhead_train(corpus, encoder, ablation, cfg); },
        py::arg("corpus"), py::arg("encoder"), py::arg("ablation"), py::arg("config"));

    py::class_<NcfModel>(m, "NcfModel")
        .def("predict",
             [](const NcfModel& model, Encoder& encoder, const RatingRecord& record) {
                 return ncf_predict(model, encoder, record);
             })
        .def("split_mae", [](const NcfModel& model, Encoder& encoder, const Corpus& corpus,
                             const std::string& split) {
            return ncf_split_mae(model, encoder, corpus, split_from_string(split));
        });

    m.def(
        "train_ncf",
        [](const Corpus& corpus, Encoder& encoder, const TrainConfig& cfg, std::size_t dim,
           const std::string& fusion) {
            NcfTrainOptions options;
            options.embedding_dim = dim;
            options.fusion = fusion_from_string(fusion);
            return ncf_train(corpus, encoder, cfg, options);
        },
        py::arg("corpus"), py::arg("encoder"), py::arg("config"),
        py::arg("dim") = kAnnotatorDimDefault, py::arg("fusion") = "concat");

    m.def("mae", &mae);
    m.def("relative_improvement", &relative_improvement);
    m.def(
        "decode_rating",
        [](const std::vector<double>& logits, const std::string& mode) {
            return decode_rating(logits, decode_from_string(mode));
        },
        py::arg("logits"), py::arg("mode") = "argmax");

    m.def(
        "majority_baseline",
        [](const Corpus& corpus, const std::string& attribute, const std::string& fit_split,
           const std::string& eval_split) {
            auto result = majority_baseline(corpus, DemographicTask::standard(attribute),
                                            split_from_string(fit_split),
                                            split_from_string(eval_split));
            return py::make_tuple(result.predicted_class, result.accuracy);
        },
        py::arg("corpus"), py::arg("attribute"), py::arg("fit_split") = "train",
        py::arg("eval_split") = "dev");

    m.attr("__version__") = "0.1.0";
}
