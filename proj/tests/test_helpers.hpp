#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "raterlens/corpus.hpp"
#include "raterlens/util.hpp"

#ifndef RATERLENS_FIXTURE_DIR
#error "RATERLENS_FIXTURE_DIR must be defined by the build"
#endif

namespace raterlens::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(RATERLENS_FIXTURE_DIR) / name;
}

// Fixture files end with a single newline; the golden content is what
// precedes it.
inline std::string load_fixture(const std::string& name) {
    std::string content = read_file(fixture_path(name).string());
    if (!content.empty() && content.back() == '\n') content.pop_back();
    return content;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("raterlens-test-" + tag + "-" + to_hex(mix64(fnv1a64(tag) ^
                    static_cast<std::uint64_t>(::getpid()))));
    std::filesystem::create_directories(dir);
    return dir;
}

// The sample prompt's inputs: three history items, the survey and
// demographics sentences, and the target text.
inline AnnotatorProfile figure3_profile() {
    AnnotatorProfile profile;
    profile.annotator_id = "fig3";
    profile.history = {
        {"h1", "This is a harmless comment", 0},
        {"h2", "You're an idiot", 3},
        {"h3", "I respectfully disagree", 1},
    };
    SurveyResponses survey;
    survey.uses_social_media = "yes";
    survey.preferred_forums = {"news sites", "video sites"};
    survey.seen_toxic_content = "yes";
    survey.personally_targeted = "yes";
    survey.tech_impact_opinion = "positive";
    survey.toxicity_is_problem = "serious problem";
    profile.survey = survey;
    Demographics demo;
    demo.age_band = "25-34";
    demo.race = "Asian";
    demo.gender = "female";
    demo.education = "Bachelor's degree";
    demo.political_stance = "liberal";
    demo.parental_status = "not a parent";
    demo.religion_importance = "not important";
    demo.lgbt_status = kUndisclosed;
    profile.demographics = demo;
    return profile;
}

inline RatingRecord figure3_record() {
    RatingRecord record;
    record.text_id = "w1";
    record.annotator_id = "fig3";
    record.text = "Why don't you go jump off a cliff?";
    record.rating = 4;
    record.split = Split::test;
    return record;
}

inline Demographics appendix_demographics() {
    Demographics demo;
    demo.age_band = "55-64";
    demo.race = "white";
    demo.gender = "female";
    demo.education = "bachelor's degree";
    demo.political_stance = "independent";
    demo.parental_status = "parent";
    demo.religion_importance = "very important";
    demo.lgbt_status = "straight and cisgender";
    return demo;
}

}  // namespace raterlens::testing
