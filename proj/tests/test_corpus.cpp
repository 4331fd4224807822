#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "raterlens/corpus.hpp"
#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"
#include "test_helpers.hpp"

using namespace raterlens;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    auto dir = testing::temp_dir("corpus");
    auto path = dir / name;
    write_file(path.string(), content);
    return path;
}

const char* kMinimalJsonl =
    R"({"kind":"profile","annotator_id":"a1","history":[]})"
    "\n"
    R"({"kind":"record","text_id":"t1","annotator_id":"a1","text":"hello","rating":0,"split":"train"})"
    "\n";

}  // namespace

TEST_CASE("load_corpus accepts a minimal well-formed file") {
    auto path = write_temp("minimal.jsonl", kMinimalJsonl);
    auto corpus = load_corpus(path.string(), CorpusFormat::jsonl);
    CHECK(corpus.records.size() == 1);
    CHECK(corpus.annotators.size() == 1);
    CHECK(corpus.records[0].text == "hello");
    CHECK(corpus.records[0].rating == 0);
    CHECK(corpus.records[0].split == Split::train);
}

TEST_CASE("load_corpus rejects an out-of-range rating and names the row") {
    std::string bad =
        R"({"kind":"profile","annotator_id":"a1","history":[]})"
        "\n"
        R"({"kind":"record","text_id":"t1","annotator_id":"a1","text":"x","rating":5,"split":"train"})"
        "\n";
    auto path = write_temp("bad_rating.jsonl", bad);
    CHECK_THROWS_WITH_AS(load_corpus(path.string(), CorpusFormat::jsonl),
                         doctest::Contains("line 2"), ValidationError);
}

TEST_CASE("load_corpus rejects a dangling annotator id") {
    std::string bad =
        R"({"kind":"record","text_id":"t1","annotator_id":"ghost","text":"x","rating":1,"split":"dev"})"
        "\n";
    auto path = write_temp("dangling.jsonl", bad);
    CHECK_THROWS_AS(load_corpus(path.string(), CorpusFormat::jsonl), ValidationError);
}

TEST_CASE("load_corpus rejects unknown survey fields and empty demographics") {
    std::string unknown_survey =
        R"({"kind":"profile","annotator_id":"a1","survey":{"favorite_color":"blue"},"history":[]})"
        "\n";
    auto path = write_temp("unknown_survey.jsonl", unknown_survey);
    CHECK_THROWS_AS(load_corpus(path.string(), CorpusFormat::jsonl), ValidationError);

    std::string empty_demo =
        R"({"kind":"profile","annotator_id":"a1","demographics":{"race":""},"history":[]})"
        "\n";
    auto path2 = write_temp("empty_demo.jsonl", empty_demo);
    CHECK_THROWS_AS(load_corpus(path2.string(), CorpusFormat::jsonl), ValidationError);
}

TEST_CASE("load_corpus reports malformed JSON as a parse error with the line") {
    auto path = write_temp("broken.jsonl", "{not json\n");
    CHECK_THROWS_WITH_AS(load_corpus(path.string(), CorpusFormat::jsonl),
                         doctest::Contains("line 1"), ParseError);
}

TEST_CASE("duplicate (text_id, annotator_id) pairs are rejected") {
    std::string dup =
        R"({"kind":"profile","annotator_id":"a1","history":[]})"
        "\n"
        R"({"kind":"record","text_id":"t1","annotator_id":"a1","text":"x","rating":1,"split":"train"})"
        "\n"
        R"({"kind":"record","text_id":"t1","annotator_id":"a1","text":"x","rating":2,"split":"train"})"
        "\n";
    auto path = write_temp("dup.jsonl", dup);
    CHECK_THROWS_AS(load_corpus(path.string(), CorpusFormat::jsonl), ValidationError);
}

TEST_CASE("generator honors the quota arithmetic") {
    auto synth = generate_corpus({7, 20, 5, 20});
    CHECK(synth.corpus.records.size() == 100);
    CHECK(synth.corpus.annotators.size() == 5);

    // each text rated by exactly 5 distinct annotators, each annotator 20 records
    std::map<std::string, std::size_t> per_text, per_annotator;
    for (const auto& record : synth.corpus.records) {
        per_text[record.text_id]++;
        per_annotator[record.annotator_id]++;
    }
    for (const auto& [_, count] : per_text) CHECK(count == 5);
    for (const auto& [_, count] : per_annotator) CHECK(count == 20);
}

TEST_CASE("generator is deterministic and seeds diverge") {
    auto a = generate_corpus({7, 20, 5, 20});
    auto b = generate_corpus({7, 20, 5, 20});
    CHECK(corpus_to_jsonl(a.corpus) == corpus_to_jsonl(b.corpus));
    CHECK(a.corpus == b.corpus);

    auto c = generate_corpus({8, 20, 5, 20});
    CHECK(a.corpus != c.corpus);
}

TEST_CASE("generator ratings stay near the latent severities") {
    auto synth = generate_corpus({7, 20, 5, 20});
    double total = 0.0;
    for (const auto& record : synth.corpus.records) {
        double severity = synth.text_severity.at(record.text_id);
        total += std::abs(record.rating - std::lround(severity));
    }
    CHECK(total / static_cast<double>(synth.corpus.records.size()) <= 1.0);
}

TEST_CASE("generator rejects infeasible quotas") {
    CHECK_THROWS_AS(generate_corpus({1, 10, 3, 20}), ConfigError);   // 30 % 20 != 0
    CHECK_THROWS_AS(generate_corpus({1, 2, 10, 20}), ConfigError);   // raters > annotators
    CHECK_THROWS_AS(generate_corpus({1, 0, 5, 20}), ConfigError);
}

TEST_CASE("generated histories respect the cap") {
    auto synth = generate_corpus({3, 30, 5, 30, 20});
    for (const auto& [_, profile] : synth.corpus.annotators) {
        CHECK(profile.history.size() <= 20);
    }
}

TEST_CASE("jsonl round-trip is exact") {
    auto synth = generate_corpus({11, 20, 5, 20});
    auto dir = testing::temp_dir("roundtrip");
    auto path = dir / "synth.jsonl";
    save_corpus(synth.corpus, path.string(), CorpusFormat::jsonl);
    auto reloaded = load_corpus(path.string(), CorpusFormat::jsonl);
    CHECK(reloaded == synth.corpus);

    // save(load(x)) is byte-identical for canonical files
    auto path2 = dir / "resaved.jsonl";
    save_corpus(reloaded, path2.string(), CorpusFormat::jsonl);
    CHECK(read_file(path.string()) == read_file(path2.string()));
}

TEST_CASE("csv round-trip carries the records") {
    auto synth = generate_corpus({5, 10, 5, 10});
    auto dir = testing::temp_dir("csv");
    auto path = dir / "records.csv";
    save_corpus(synth.corpus, path.string(), CorpusFormat::csv);
    auto reloaded = load_corpus(path.string(), CorpusFormat::csv);
    REQUIRE(reloaded.records.size() == synth.corpus.records.size());
    for (std::size_t i = 0; i < reloaded.records.size(); ++i) {
        CHECK(reloaded.records[i] == synth.corpus.records[i]);
    }
    // bare profiles synthesized so every record resolves
    CHECK(reloaded.annotators.size() == synth.corpus.annotators.size());

    auto path2 = dir / "resaved.csv";
    save_corpus(reloaded, path2.string(), CorpusFormat::csv);
    CHECK(read_file(path.string()) == read_file(path2.string()));
}

TEST_CASE("csv fields with commas and quotes survive") {
    Corpus corpus;
    AnnotatorProfile p;
    p.annotator_id = "a1";
    corpus.annotators.emplace("a1", p);
    corpus.records.push_back({"t1", "a1", "says \"hi, there\"\nand more", 2, Split::dev});
    auto dir = testing::temp_dir("csvq");
    // embedded newline is not representable line-wise; strip it for this check
    corpus.records[0].text = "says \"hi, there\" and more";
    auto path = dir / "quoted.csv";
    save_corpus(corpus, path.string(), CorpusFormat::csv);
    auto reloaded = load_corpus(path.string(), CorpusFormat::csv);
    CHECK(reloaded.records[0].text == corpus.records[0].text);
}

TEST_CASE("split_counts partitions the corpus") {
    Corpus empty;
    auto counts = split_counts(empty);
    CHECK(counts[Split::train] == 0);
    CHECK(counts[Split::dev] == 0);
    CHECK(counts[Split::test] == 0);

    auto synth = generate_corpus({7, 20, 5, 20});
    counts = split_counts(synth.corpus);
    CHECK(counts[Split::train] == 80);
    CHECK(counts[Split::dev] == 10);
    CHECK(counts[Split::test] == 10);
    CHECK(counts[Split::train] + counts[Split::dev] + counts[Split::test] ==
          synth.corpus.records.size());
}

TEST_CASE("reference split sizes match the documented corpus scale") {
    CHECK(kReferenceTrainSize == 488100);
    CHECK(kReferenceDevSize == 25000);
    CHECK(kReferenceTestSize == 25000);
    CHECK(kReferenceRatersPerText == 5);
    CHECK(kReferenceRatingsPerAnnotator == 20);
}

TEST_CASE("loader warns when an annotator exceeds the reference quota") {
    auto synth = generate_corpus({3, 30, 5, 30, 30});
    auto dir = testing::temp_dir("warn");
    auto path = dir / "big.jsonl";
    save_corpus(synth.corpus, path.string(), CorpusFormat::jsonl);
    std::vector<std::string> warnings;
    LoadOptions options;
    options.history_cap = 30;
    auto corpus = load_corpus(path.string(), CorpusFormat::jsonl, &warnings, options);
    CHECK(corpus.records.size() == 150);
    CHECK(!warnings.empty());
}

TEST_CASE("history cap is enforced at load time") {
    std::string long_history = R"({"kind":"profile","annotator_id":"a1","history":[)";
    for (int i = 0; i < 21; ++i) {
        if (i) long_history += ",";
        long_history += R"({"text_id":"t)" + std::to_string(i) + R"(","text":"x","rating":1})";
    }
    long_history += "]}\n";
    auto path = write_temp("long_history.jsonl", long_history);
    CHECK_THROWS_AS(load_corpus(path.string(), CorpusFormat::jsonl), ValidationError);
}
