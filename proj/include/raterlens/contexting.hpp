#pragma once

#include <string>
#include <utility>
#include <vector>

#include "raterlens/corpus.hpp"

namespace raterlens {

// Separator between context segments. Kept verbatim even for providers with
// no special-token semantics.
inline constexpr const char* kSeparator = "[SEP]";

enum class DemoSource { true_values, predicted, none };

struct AblationSpec {
    bool use_history = false;
    bool use_survey = false;
    bool use_demographics = false;
    DemoSource demographics_source = DemoSource::none;

    bool operator==(const AblationSpec&) const = default;

    // demographics_source == none must coincide with use_demographics == false
    void validate() const;

    // "text,history,survey,demo" / "text,history,survey,pdemo"; "text" alone
    // (or empty) is the text-only configuration.
    static AblationSpec parse(const std::string& csv);

    std::string label() const;  // "Text only", "+ demo. + history + survey", ...
    std::string to_csv() const;

    static AblationSpec text_only() { return {}; }
    static AblationSpec all_context();
    static AblationSpec predicted_all_context();  // + predicted demo. + history + survey
};

enum class SegmentKind { history, survey, demographics, text };

std::string to_string(SegmentKind kind);

// Segments appear in the fixed order history, survey, demographics, text;
// the text segment is always present.
struct RenderedContext {
    std::vector<std::pair<SegmentKind, std::string>> segments;
    std::string joined;
};

// "The reader is a 55-64 year old white female who has a bachelor's degree,
// is politically independent, is a parent, and thinks religion is very
// important. The reader is straight and cisgender" — the trailing sentence is
// emitted only when LGBT status is disclosed; undisclosed values elsewhere
// render as "prefers not to say".
std::string render_demographics(const Demographics& d);

std::string render_survey(const SurveyResponses& s);

struct HistoryRenderOptions {
    std::size_t max_items = kDefaultHistoryCap;  // keep the most recent on overflow
};

// "The annotator has annotated these texts: "<text>" is rated as <r>, ...".
// The entry matching exclude_text_id (or, failing an id, the exact target
// text) is dropped so the target never leaks into its own context.
std::string render_history(const std::vector<HistoryEntry>& history,
                           const std::string& exclude_text_id,
                           const std::string& exclude_text = "",
                           const HistoryRenderOptions& options = {});

RenderedContext render_context(const RatingRecord& record, const AnnotatorProfile& profile,
                               const AblationSpec& spec,
                               const Demographics* predicted = nullptr);

}  // namespace raterlens
