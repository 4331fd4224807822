#include "raterlens/contexting.hpp"

#include <algorithm>

#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"

namespace raterlens {

namespace {
constexpr const char* kPrefersNotToSay = "prefers not to say";

bool affirmative(const std::string& value) {
    std::string v = lower_ascii(value);
    return v == "yes" || v == "true";
}
}  // namespace

void AblationSpec::validate() const {
    if (use_demographics && demographics_source == DemoSource::none) {
        throw ConfigError("ablation enables demographics but names no source");
    }
    if (!use_demographics && demographics_source != DemoSource::none) {
        throw ConfigError("ablation names a demographics source but demographics are disabled");
    }
}

AblationSpec AblationSpec::parse(const std::string& csv) {
    AblationSpec spec;
    for (const auto& raw : split(csv, ',')) {
        std::string token = lower_ascii(raw);
        if (token.empty() || token == "text") continue;
        if (token == "history") {
            spec.use_history = true;
        } else if (token == "survey") {
            spec.use_survey = true;
        } else if (token == "demo" || token == "demographics") {
            spec.use_demographics = true;
            spec.demographics_source = DemoSource::true_values;
        } else if (token == "pdemo" || token == "predicted-demo" || token == "predicted_demo") {
            spec.use_demographics = true;
            spec.demographics_source = DemoSource::predicted;
        } else {
            throw ConfigError("unknown ablation token '" + raw + "'");
        }
    }
    spec.validate();
    return spec;
}

std::string AblationSpec::label() const {
    std::vector<std::string> parts;
    if (use_demographics) {
        parts.push_back(demographics_source == DemoSource::predicted ? "predicted demo." : "demo.");
    }
    if (use_history) parts.push_back("history");
    if (use_survey) parts.push_back("survey");
    if (parts.empty()) return "Text only";
    return "+ " + join(parts, " + ");
}

std::string AblationSpec::to_csv() const {
    std::vector<std::string> parts = {"text"};
    if (use_history) parts.push_back("history");
    if (use_survey) parts.push_back("survey");
    if (use_demographics) {
        parts.push_back(demographics_source == DemoSource::predicted ? "pdemo" : "demo");
    }
    return join(parts, ",");
}

AblationSpec AblationSpec::all_context() {
    AblationSpec spec;
    spec.use_history = spec.use_survey = spec.use_demographics = true;
    spec.demographics_source = DemoSource::true_values;
    return spec;
}

AblationSpec AblationSpec::predicted_all_context() {
    AblationSpec spec = all_context();
    spec.demographics_source = DemoSource::predicted;
    return spec;
}

std::string to_string(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::history: return "history";
        case SegmentKind::survey: return "survey";
        case SegmentKind::demographics: return "demographics";
        case SegmentKind::text: return "text";
    }
    throw ConfigError("unknown segment kind");
}

std::string render_demographics(const Demographics& d) {
    auto slot = [](const std::string& value) {
        return value == kUndisclosed ? std::string(kPrefersNotToSay) : value;
    };

    std::string parental;
    if (d.parental_status == kUndisclosed) {
        parental = std::string(kPrefersNotToSay) + " whether they are a parent";
    } else if (lower_ascii(d.parental_status) == "parent") {
        parental = "is a parent";
    } else {
        parental = "is " + d.parental_status;  // "not a parent"
    }

    std::string out = "The reader is a " + slot(d.age_band) + " year old " + slot(d.race) + " " +
                      slot(d.gender) + " who has a " + slot(d.education) + ", is politically " +
                      slot(d.political_stance) + ", " + parental + ", and thinks religion is " +
                      slot(d.religion_importance) + ".";
    if (d.lgbt_status != kUndisclosed) {
        out += " The reader is " + d.lgbt_status;
    }
    return out;
}

std::string render_survey(const SurveyResponses& s) {
    std::vector<std::string> sentences;

    std::vector<std::string> uses;
    if (s.uses_social_media && affirmative(*s.uses_social_media)) uses.push_back("social media");
    for (const auto& forum : s.preferred_forums) uses.push_back(forum);
    if (!uses.empty()) {
        sentences.push_back("The reader uses " + join_natural(uses) + ".");
    }

    std::vector<std::string> clauses;
    if (s.seen_toxic_content) {
        clauses.push_back(affirmative(*s.seen_toxic_content) ? "has seen toxic comments"
                                                             : "has not seen toxic comments");
    }
    if (s.personally_targeted) {
        clauses.push_back(affirmative(*s.personally_targeted)
                              ? "has been personally targeted by toxic comments"
                              : "has not been personally targeted by toxic comments");
    }
    if (s.tech_impact_opinion) {
        clauses.push_back("thinks technology has a " + *s.tech_impact_opinion +
                          " impact on people's lives");
    }
    if (s.toxicity_is_problem) {
        if (lower_ascii(*s.toxicity_is_problem) == "not a problem") {
            clauses.push_back("thinks toxic comments are not a problem");
        } else {
            clauses.push_back("thinks toxic comments are a " + *s.toxicity_is_problem);
        }
    }
    if (!clauses.empty()) {
        sentences.push_back("The reader " + join_natural(clauses) + ".");
    }
    return join(sentences, " ");
}

std::string render_history(const std::vector<HistoryEntry>& history,
                           const std::string& exclude_text_id, const std::string& exclude_text,
                           const HistoryRenderOptions& options) {
    std::vector<const HistoryEntry*> kept;
    for (const auto& entry : history) {
        if (!exclude_text_id.empty() && entry.text_id == exclude_text_id) continue;
        if (!exclude_text.empty() && entry.text == exclude_text) continue;
        kept.push_back(&entry);
    }
    if (kept.size() > options.max_items) {
        kept.erase(kept.begin(), kept.end() - static_cast<std::ptrdiff_t>(options.max_items));
    }
    if (kept.empty()) return "";

    std::vector<std::string> items;
    items.reserve(kept.size());
    for (const auto* entry : kept) {
        items.push_back("\"" + entry->text + "\" is rated as " + std::to_string(entry->rating));
    }
    return "The annotator has annotated these texts: " + join(items, ", ");
}

RenderedContext render_context(const RatingRecord& record, const AnnotatorProfile& profile,
                               const AblationSpec& spec, const Demographics* predicted) {
    spec.validate();
    RenderedContext out;

    if (spec.use_history) {
        std::string rendered = render_history(profile.history, record.text_id, record.text);
        if (!rendered.empty()) {
            out.segments.emplace_back(SegmentKind::history, std::move(rendered));
        }
    }
    if (spec.use_survey && profile.survey && !profile.survey->empty()) {
        out.segments.emplace_back(SegmentKind::survey, render_survey(*profile.survey));
    }
    if (spec.use_demographics) {
        if (spec.demographics_source == DemoSource::predicted) {
            if (!predicted) {
                throw ConfigError(
                    "ablation requests predicted demographics but none were supplied");
            }
            out.segments.emplace_back(SegmentKind::demographics, render_demographics(*predicted));
        } else if (profile.demographics) {
            out.segments.emplace_back(SegmentKind::demographics,
                                      render_demographics(*profile.demographics));
        }
    }
    out.segments.emplace_back(SegmentKind::text, record.text);

    std::vector<std::string> parts;
    parts.reserve(out.segments.size());
    for (const auto& [_, text] : out.segments) parts.push_back(text);
    out.joined = join(parts, std::string(" ") + kSeparator + " ");
    return out;
}

}  // namespace raterlens
