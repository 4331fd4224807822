#include <doctest.h>

#include <algorithm>

#include "raterlens/contexting.hpp"
#include "raterlens/errors.hpp"
#include "test_helpers.hpp"

using namespace raterlens;
using raterlens::testing::appendix_demographics;
using raterlens::testing::figure3_profile;
using raterlens::testing::figure3_record;
using raterlens::testing::load_fixture;

TEST_CASE("demographics template reproduces the documented sentence") {
    CHECK(render_demographics(appendix_demographics()) == load_fixture("appendix_demographics.txt"));
}

TEST_CASE("demographics template reproduces the sample-prompt sentence") {
    auto profile = figure3_profile();
    CHECK(render_demographics(*profile.demographics) ==
          "The reader is a 25-34 year old Asian female who has a Bachelor's degree, is politically "
          "liberal, is not a parent, and thinks religion is not important.");
}

TEST_CASE("undisclosed demographics render as prefers-not-to-say slots") {
    Demographics d;  // everything undisclosed
    std::string rendered = render_demographics(d);
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = rendered.find("prefers not to say", pos)) != std::string::npos) {
        ++count;
        pos += 1;
    }
    // seven first-sentence slots; the LGBT sentence is omitted when undisclosed
    CHECK(count == 7);
    CHECK(rendered.find("The reader is straight") == std::string::npos);
    CHECK(rendered.back() == '.');
}

TEST_CASE("history renders the documented item list") {
    auto profile = figure3_profile();
    CHECK(render_history(profile.history, "") ==
          "The annotator has annotated these texts: \"This is a harmless comment\" is rated as 0, "
          "\"You're an idiot\" is rated as 3, \"I respectfully disagree\" is rated as 1");
}

TEST_CASE("empty history yields no segment") {
    CHECK(render_history({}, "") == "");

    RatingRecord record = figure3_record();
    AnnotatorProfile profile;
    profile.annotator_id = record.annotator_id;
    AblationSpec spec;
    spec.use_history = true;
    auto context = render_context(record, profile, spec);
    CHECK(context.segments.size() == 1);
    CHECK(context.segments[0].first == SegmentKind::text);
}

TEST_CASE("history excludes the target text") {
    std::vector<HistoryEntry> history = {
        {"t1", "first", 0}, {"t2", "second", 2}, {"t3", "third", 4}};
    std::string rendered = render_history(history, "t2");
    CHECK(rendered.find("second") == std::string::npos);
    CHECK(rendered.find("first") != std::string::npos);
    CHECK(rendered.find("third") != std::string::npos);
    // two items remain -> one separator comma between them
    CHECK(std::count(rendered.begin(), rendered.end(), ',') == 1);

    // fallback match on the text itself when ids are absent
    std::vector<HistoryEntry> no_ids = {{"", "first", 0}, {"", "second", 2}};
    CHECK(render_history(no_ids, "", "second").find("second") == std::string::npos);
}

TEST_CASE("history truncation keeps the most recent items") {
    std::vector<HistoryEntry> history;
    for (int i = 0; i < 30; ++i) {
        history.push_back({"t" + std::to_string(i), "text " + std::to_string(i), 1});
    }
    HistoryRenderOptions options;
    options.max_items = 3;
    std::string rendered = render_history(history, "", "", options);
    CHECK(rendered.find("text 27") != std::string::npos);
    CHECK(rendered.find("text 29") != std::string::npos);
    CHECK(rendered.find("text 0\"") == std::string::npos);
}

TEST_CASE("survey renders the documented sentences") {
    auto profile = figure3_profile();
    CHECK(render_survey(*profile.survey) ==
          "The reader uses social media, news sites, and video sites. The reader has seen toxic "
          "comments, has been personally targeted by toxic comments, thinks technology has a "
          "positive impact on people's lives, and thinks toxic comments are a serious problem.");
}

TEST_CASE("survey renders partial field sets") {
    SurveyResponses s;
    s.seen_toxic_content = "no";
    CHECK(render_survey(s) == "The reader has not seen toxic comments.");

    SurveyResponses forums_only;
    forums_only.preferred_forums = {"blogs"};
    CHECK(render_survey(forums_only) == "The reader uses blogs.");

    SurveyResponses two;
    two.seen_toxic_content = "yes";
    two.toxicity_is_problem = "not a problem";
    CHECK(render_survey(two) ==
          "The reader has seen toxic comments and thinks toxic comments are not a problem.");
}

TEST_CASE("full context matches the sample prompt body up to the target rewrite") {
    auto record = figure3_record();
    auto profile = figure3_profile();
    auto context = render_context(record, profile, AblationSpec::all_context());

    std::string golden = load_fixture("figure3_user_prompt.txt");
    std::string target_marker = "Annotate this text: \"" + record.text + "\"";
    REQUIRE(golden.size() >= target_marker.size());
    std::string expected =
        golden.substr(0, golden.size() - target_marker.size()) + record.text;
    CHECK(context.joined == expected);
    CHECK(context.segments.size() == 4);
}

TEST_CASE("text-only context is the bare text") {
    auto record = figure3_record();
    auto profile = figure3_profile();
    auto context = render_context(record, profile, AblationSpec::text_only());
    CHECK(context.joined == record.text);
    CHECK(context.joined.find(kSeparator) == std::string::npos);
}

TEST_CASE("history+survey context equals the hand-assembled concatenation") {
    auto record = figure3_record();
    auto profile = figure3_profile();
    AblationSpec spec;
    spec.use_history = true;
    spec.use_survey = true;
    auto context = render_context(record, profile, spec);

    std::string expected = render_history(profile.history, record.text_id, record.text);
    expected += " [SEP] ";
    expected += render_survey(*profile.survey);
    expected += " [SEP] ";
    expected += record.text;
    CHECK(context.joined == expected);
}

TEST_CASE("segment order and separator count hold for every subset") {
    auto record = figure3_record();
    auto profile = figure3_profile();
    for (int mask = 0; mask < 8; ++mask) {
        AblationSpec spec;
        spec.use_history = mask & 1;
        spec.use_survey = mask & 2;
        spec.use_demographics = mask & 4;
        spec.demographics_source =
            spec.use_demographics ? DemoSource::true_values : DemoSource::none;
        auto context = render_context(record, profile, spec);

        // order: history < survey < demographics < text
        for (std::size_t i = 1; i < context.segments.size(); ++i) {
            CHECK(static_cast<int>(context.segments[i - 1].first) <
                  static_cast<int>(context.segments[i].first));
        }
        CHECK(context.segments.back().first == SegmentKind::text);

        std::size_t separators = 0;
        std::size_t pos = 0;
        while ((pos = context.joined.find(kSeparator, pos)) != std::string::npos) {
            ++separators;
            pos += 1;
        }
        CHECK(separators == context.segments.size() - 1);

        // determinism
        CHECK(render_context(record, profile, spec).joined == context.joined);
    }
}

TEST_CASE("leave-one-out holds for every record of a generated corpus") {
    auto synth = generate_corpus({13, 12, 5, 10});
    AblationSpec spec;
    spec.use_history = true;
    for (const auto& record : synth.corpus.records) {
        auto context = render_context(record, synth.corpus.profile(record.annotator_id), spec);
        if (context.segments.size() == 2) {
            CHECK(context.segments[0].second.find("\"" + record.text + "\"") ==
                  std::string::npos);
        }
    }
}

TEST_CASE("predicted demographics require the prediction") {
    auto record = figure3_record();
    auto profile = figure3_profile();
    auto spec = AblationSpec::predicted_all_context();
    CHECK_THROWS_AS(render_context(record, profile, spec), ConfigError);

    Demographics predicted = appendix_demographics();
    auto context = render_context(record, profile, spec, &predicted);
    bool found = false;
    for (const auto& [kind, text] : context.segments) {
        if (kind == SegmentKind::demographics) {
            CHECK(text == render_demographics(predicted));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("ablation spec validation and labels") {
    AblationSpec bad;
    bad.use_demographics = true;
    bad.demographics_source = DemoSource::none;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    CHECK(AblationSpec::text_only().label() == "Text only");
    CHECK(AblationSpec::all_context().label() == "+ demo. + history + survey");
    CHECK(AblationSpec::predicted_all_context().label() ==
          "+ predicted demo. + history + survey");
    CHECK(AblationSpec::parse("text,history").label() == "+ history");
    CHECK(AblationSpec::parse("text,survey,demo").label() == "+ demo. + survey");
    CHECK_THROWS_AS(AblationSpec::parse("text,nonsense"), ConfigError);

    // csv round-trip
    auto spec = AblationSpec::parse("text,history,survey,pdemo");
    CHECK(AblationSpec::parse(spec.to_csv()) == spec);
}
