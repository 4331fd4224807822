#include "raterlens/demographics.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "raterlens/contexting.hpp"
#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"
#include "serialize.hpp"

namespace raterlens {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& predictable_attributes() {
    static const std::vector<std::string> v = {
        "race", "gender", "religion_importance", "lgbt_status", "education", "political_stance"};
    return v;
}

DemoInputMode demo_input_mode_from_string(const std::string& name) {
    if (name == "survey" || name == "survey_only") return DemoInputMode::survey_only;
    if (name == "survey+text" || name == "survey_plus_text") return DemoInputMode::survey_plus_text;
    throw ConfigError("unknown demographic input mode '" + name + "'");
}

std::string to_string(DemoInputMode mode) {
    return mode == DemoInputMode::survey_only ? "survey" : "survey+text";
}

void DemographicTask::validate() const {
    const auto& known = predictable_attributes();
    if (std::find(known.begin(), known.end(), attribute) == known.end()) {
        throw ConfigError("'" + attribute + "' is not a predictable demographic attribute");
    }
    if (classes.empty()) throw ConfigError("demographic task has no classes");
    std::set<std::string> unique(classes.begin(), classes.end());
    if (unique.size() != classes.size()) {
        throw ConfigError("demographic task classes are not unique");
    }
}

DemographicTask DemographicTask::standard(const std::string& attribute, DemoInputMode mode) {
    DemographicTask task;
    task.attribute = attribute;
    task.input_mode = mode;
    if (attribute == "race") task.classes = categories::race();
    else if (attribute == "gender") task.classes = categories::gender();
    else if (attribute == "religion_importance") task.classes = categories::religion_importance();
    else if (attribute == "lgbt_status") task.classes = categories::lgbt_status();
    else if (attribute == "education") task.classes = categories::education();
    else if (attribute == "political_stance") task.classes = categories::political_stance();
    else throw ConfigError("'" + attribute + "' is not a predictable demographic attribute");
    return task;
}

std::string demographic_value(const Demographics& d, const std::string& attribute) {
    if (attribute == "race") return d.race;
    if (attribute == "gender") return d.gender;
    if (attribute == "religion_importance") return d.religion_importance;
    if (attribute == "lgbt_status") return d.lgbt_status;
    if (attribute == "education") return d.education;
    if (attribute == "political_stance") return d.political_stance;
    if (attribute == "parental_status") return d.parental_status;
    if (attribute == "age_band") return d.age_band;
    throw ConfigError("unknown demographic attribute '" + attribute + "'");
}

void set_demographic_value(Demographics& d, const std::string& attribute,
                           const std::string& value) {
    if (attribute == "race") d.race = value;
    else if (attribute == "gender") d.gender = value;
    else if (attribute == "religion_importance") d.religion_importance = value;
    else if (attribute == "lgbt_status") d.lgbt_status = value;
    else if (attribute == "education") d.education = value;
    else if (attribute == "political_stance") d.political_stance = value;
    else if (attribute == "parental_status") d.parental_status = value;
    else if (attribute == "age_band") d.age_band = value;
    else throw ConfigError("unknown demographic attribute '" + attribute + "'");
}

std::string demo_input_text(const AnnotatorProfile& profile, DemoInputMode mode) {
    if (!profile.survey || profile.survey->empty()) {
        throw ValidationError("annotator '" + profile.annotator_id + "' has no survey responses");
    }
    std::string input = render_survey(*profile.survey);
    if (mode == DemoInputMode::survey_plus_text) {
        std::vector<std::string> texts;
        std::size_t take = std::min(profile.history.size(), kDefaultHistoryCap);
        for (std::size_t i = 0; i < take; ++i) {
            texts.push_back("\"" + profile.history[i].text + "\"");
        }
        if (!texts.empty()) {
            input += " ";
            input += kSeparator;
            input += " The annotator rated these texts: " + join(texts, ", ");
        }
    }
    return input;
}

namespace {

std::set<std::string> annotators_in_split(const Corpus& corpus, Split split) {
    std::set<std::string> ids;
    for (const auto& record : corpus.records) {
        if (record.split == split) ids.insert(record.annotator_id);
    }
    return ids;
}

std::ptrdiff_t class_index(const DemographicTask& task, const std::string& value) {
    for (std::size_t i = 0; i < task.classes.size(); ++i) {
        if (lower_ascii(task.classes[i]) == lower_ascii(value)) {
            return static_cast<std::ptrdiff_t>(i);
        }
    }
    return -1;
}

}  // namespace

DemoClassifier demo_train(const Corpus& corpus, const DemographicTask& task, Encoder& encoder,
                          const TrainConfig& cfg) {
    task.validate();
    auto fit_ids = annotators_in_split(corpus, Split::train);

    std::vector<std::string> inputs;
    std::vector<int> labels;
    for (const auto& id : fit_ids) {
        const auto& profile = corpus.profile(id);
        if (!profile.survey || profile.survey->empty() || !profile.demographics) continue;
        std::string value = demographic_value(*profile.demographics, task.attribute);
        if (value == kUndisclosed) continue;
        auto idx = class_index(task, value);
        if (idx < 0) continue;
        inputs.push_back(demo_input_text(profile, task.input_mode));
        labels.push_back(static_cast<int>(idx));
    }
    if (inputs.empty()) {
        throw TrainingError("attribute '" + task.attribute +
                            "' has no disclosed labels in the train split");
    }

    auto embedded = encoder.embed_batch(inputs);
    Batch batch;
    batch.inputs.reserve(embedded.size());
    for (auto& e : embedded) batch.inputs.push_back(std::move(e.values));
    batch.labels = std::move(labels);

    DemoClassifier classifier;
    classifier.task = task;
    classifier.provider = encoder.spec();
    classifier.head = DenseNet::make({encoder.spec().dimension, kDemoHiddenDim, task.classes.size()},
                                     mix_seeds(cfg.seed, fnv1a64("raterlens-demo-" + task.attribute)));
    train(classifier.head, batch, cfg);
    return classifier;
}

std::pair<std::string, double> demo_predict(const DemoClassifier& classifier, Encoder& encoder,
                                            const AnnotatorProfile& profile) {
    auto embedding = encoder.embed(demo_input_text(profile, classifier.task.input_mode));
    auto logits = forward(classifier.head, embedding.values);
    auto probs = softmax(logits);
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return {classifier.task.classes[best], probs[best]};
}

double demo_accuracy(const DemoClassifier& classifier, Encoder& encoder, const Corpus& corpus,
                     Split eval_split) {
    auto eval_ids = annotators_in_split(corpus, eval_split);
    std::size_t n = 0;
    std::size_t correct = 0;
    for (const auto& id : eval_ids) {
        const auto& profile = corpus.profile(id);
        if (!profile.survey || profile.survey->empty() || !profile.demographics) continue;
        std::string truth = demographic_value(*profile.demographics, classifier.task.attribute);
        if (truth == kUndisclosed) continue;
        auto [predicted, _] = demo_predict(classifier, encoder, profile);
        ++n;
        if (lower_ascii(predicted) == lower_ascii(truth)) ++correct;
    }
    if (n == 0) throw ValidationError("no labeled annotators in the evaluation split");
    return static_cast<double>(correct) / static_cast<double>(n);
}

MajorityBaselineResult majority_baseline(const Corpus& corpus, const DemographicTask& task,
                                         Split fit_split, Split eval_split) {
    task.validate();
    auto count_labels = [&](Split split, std::vector<std::size_t>& counts) {
        std::size_t total = 0;
        for (const auto& id : annotators_in_split(corpus, split)) {
            const auto& profile = corpus.profile(id);
            if (!profile.demographics) continue;
            std::string value = demographic_value(*profile.demographics, task.attribute);
            if (value == kUndisclosed) continue;
            auto idx = class_index(task, value);
            if (idx < 0) continue;
            counts[static_cast<std::size_t>(idx)]++;
            ++total;
        }
        return total;
    };

    std::vector<std::size_t> fit_counts(task.classes.size(), 0);
    std::size_t n_fit = count_labels(fit_split, fit_counts);
    if (n_fit == 0) throw ValidationError("no labeled annotators in the fit split");

    std::size_t modal = 0;
    bool tie = false;
    for (std::size_t i = 1; i < fit_counts.size(); ++i) {
        if (fit_counts[i] > fit_counts[modal]) {
            modal = i;
            tie = false;
        } else if (fit_counts[i] == fit_counts[modal]) {
            tie = true;  // lower index already held, keep it
        }
    }

    std::vector<std::size_t> eval_counts(task.classes.size(), 0);
    std::size_t n_eval = count_labels(eval_split, eval_counts);
    if (n_eval == 0) throw ValidationError("no labeled annotators in the evaluation split");

    MajorityBaselineResult result;
    result.predicted_class = task.classes[modal];
    result.accuracy = static_cast<double>(eval_counts[modal]) / static_cast<double>(n_eval);
    result.tie_broken = tie && fit_counts[modal] != 0;
    result.n_fit = n_fit;
    result.n_eval = n_eval;
    return result;
}

void ImputedDemographics::validate() const {
    for (const auto& attribute : predictable_attributes()) {
        auto it = attributes.find(attribute);
        if (it == attributes.end()) {
            throw ValidationError("imputed demographics missing attribute '" + attribute + "'");
        }
        if (it->second.confidence < 0.0 || it->second.confidence > 1.0) {
            throw ValidationError("imputed confidence outside [0, 1]");
        }
    }
    if (attributes.size() != predictable_attributes().size()) {
        throw ValidationError("imputed demographics carries unexpected attributes");
    }
}

Demographics ImputedDemographics::to_demographics() const {
    validate();
    Demographics d;
    for (const auto& [attribute, imputed] : attributes) {
        set_demographic_value(d, attribute, imputed.category);
    }
    return d;
}

std::map<std::string, ImputedDemographics> impute(const Corpus& corpus,
                                                  const std::vector<DemoClassifier>& classifiers,
                                                  Encoder& encoder,
                                                  std::vector<std::string>* warnings) {
    std::set<std::string> covered;
    for (const auto& classifier : classifiers) covered.insert(classifier.task.attribute);
    for (const auto& attribute : predictable_attributes()) {
        if (!covered.count(attribute)) {
            throw ConfigError("impute needs a classifier for attribute '" + attribute + "'");
        }
    }

    std::map<std::string, ImputedDemographics> out;
    for (const auto& [id, profile] : corpus.annotators) {
        if (!profile.survey || profile.survey->empty()) {
            if (warnings) {
                warnings->push_back("annotator '" + id + "' has no survey data; skipped");
            }
            continue;
        }
        ImputedDemographics imputed;
        imputed.source_model = classifiers.front().provider.model_id;
        for (const auto& classifier : classifiers) {
            auto [category, confidence] = demo_predict(classifier, encoder, profile);
            imputed.attributes[classifier.task.attribute] = {category, confidence};
        }
        imputed.validate();
        out.emplace(id, std::move(imputed));
    }
    return out;
}

std::map<std::string, Demographics> imputed_to_demographics(
    const std::map<std::string, ImputedDemographics>& imputed) {
    std::map<std::string, Demographics> out;
    for (const auto& [id, entry] : imputed) out.emplace(id, entry.to_demographics());
    return out;
}

void save_imputed_jsonl(const std::map<std::string, ImputedDemographics>& imputed,
                        const std::string& path) {
    std::string out;
    for (const auto& [id, entry] : imputed) {
        ordered_json j;
        j["annotator_id"] = id;
        j["source_model"] = entry.source_model;
        ordered_json attrs;
        for (const auto& attribute : predictable_attributes()) {
            const auto& value = entry.attributes.at(attribute);
            attrs[attribute] = ordered_json{{"category", value.category},
                                            {"confidence", value.confidence}};
        }
        j["attributes"] = std::move(attrs);
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::map<std::string, ImputedDemographics> load_imputed_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open imputed demographics file: " + path);
    std::map<std::string, ImputedDemographics> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = ordered_json::parse(line);
            ImputedDemographics entry;
            entry.source_model = j.value("source_model", std::string());
            for (const auto& [attribute, value] : j.at("attributes").items()) {
                entry.attributes[attribute] = {value.at("category").get<std::string>(),
                                               value.at("confidence").get<double>()};
            }
            entry.validate();
            out.emplace(j.at("annotator_id").get<std::string>(), std::move(entry));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace raterlens
