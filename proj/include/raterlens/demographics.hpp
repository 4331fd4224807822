#pragma once

#include <map>
#include <string>
#include <vector>

#include "raterlens/corpus.hpp"
#include "raterlens/encoder.hpp"
#include "raterlens/neuralcore.hpp"

namespace raterlens {

// The six predictable attributes; parental status and age band stay in the
// Demographics record for rendering but are not imputation targets.
const std::vector<std::string>& predictable_attributes();

enum class DemoInputMode { survey_only, survey_plus_text };

DemoInputMode demo_input_mode_from_string(const std::string& name);
std::string to_string(DemoInputMode mode);

struct DemographicTask {
    std::string attribute;
    std::vector<std::string> classes;  // ordered, unique
    DemoInputMode input_mode = DemoInputMode::survey_only;

    void validate() const;
    static DemographicTask standard(const std::string& attribute,
                                    DemoInputMode mode = DemoInputMode::survey_only);
};

std::string demographic_value(const Demographics& d, const std::string& attribute);
void set_demographic_value(Demographics& d, const std::string& attribute,
                           const std::string& value);

// The classifier input string: the rendered survey segment, with the
// annotator's rated texts appended (up to the history cap) in
// survey_plus_text mode. True demographic fields are never read here.
std::string demo_input_text(const AnnotatorProfile& profile, DemoInputMode mode);

struct DemoClassifier {
    DemographicTask task;
    ProviderSpec provider;
    DenseNet head;  // provider dim -> 256 -> |classes|
};

inline constexpr std::size_t kDemoHiddenDim = 256;

// Fits on annotators with a train-split record, a survey, and a disclosed
// target attribute.
DemoClassifier demo_train(const Corpus& corpus, const DemographicTask& task, Encoder& encoder,
                          const TrainConfig& cfg);

// (predicted class, softmax confidence)
std::pair<std::string, double> demo_predict(const DemoClassifier& classifier, Encoder& encoder,
                                            const AnnotatorProfile& profile);

// Accuracy over annotators with a record in the evaluation split.
double demo_accuracy(const DemoClassifier& classifier, Encoder& encoder, const Corpus& corpus,
                     Split eval_split);

struct MajorityBaselineResult {
    std::string predicted_class;
    double accuracy = 0.0;       // modal-class frequency on the evaluation split
    bool tie_broken = false;     // modal tie resolved toward the lower class index
    std::size_t n_fit = 0;
    std::size_t n_eval = 0;
};

MajorityBaselineResult majority_baseline(const Corpus& corpus, const DemographicTask& task,
                                         Split fit_split = Split::train,
                                         Split eval_split = Split::dev);

struct ImputedAttribute {
    std::string category;
    double confidence = 0.0;  // in [0, 1]

    bool operator==(const ImputedAttribute&) const = default;
};

struct ImputedDemographics {
    std::map<std::string, ImputedAttribute> attributes;  // exactly the six tasks
    std::string source_model;

    void validate() const;
    // Predicted values for the six attributes; age band and parental status
    // stay undisclosed.
    Demographics to_demographics() const;
};

// One entry per annotator with survey data; annotators without a survey are
// skipped with a warning.
std::map<std::string, ImputedDemographics> impute(const Corpus& corpus,
                                                  const std::vector<DemoClassifier>& classifiers,
                                                  Encoder& encoder,
                                                  std::vector<std::string>* warnings = nullptr);

std::map<std::string, Demographics> imputed_to_demographics(
    const std::map<std::string, ImputedDemographics>& imputed);

void save_imputed_jsonl(const std::map<std::string, ImputedDemographics>& imputed,
                        const std::string& path);
std::map<std::string, ImputedDemographics> load_imputed_jsonl(const std::string& path);

}  // namespace raterlens
