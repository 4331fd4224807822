#include "raterlens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"

namespace raterlens {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    throw ConfigError("unknown split");
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    throw ValidationError("unknown split tag: '" + name + "'");
}

CorpusFormat format_from_string(const std::string& name) {
    if (name == "jsonl") return CorpusFormat::jsonl;
    if (name == "csv") return CorpusFormat::csv;
    throw ConfigError("unknown corpus format: '" + name + "'");
}

namespace categories {

const std::vector<std::string>& race() {
    static const std::vector<std::string> v = {
        "white", "Black", "Asian", "Hispanic", "Middle Eastern", "Native American", "mixed race"};
    return v;
}

const std::vector<std::string>& gender() {
    static const std::vector<std::string> v = {"male", "female", "nonbinary"};
    return v;
}

const std::vector<std::string>& religion_importance() {
    static const std::vector<std::string> v = {"very important", "somewhat important", "not important"};
    return v;
}

const std::vector<std::string>& lgbt_status() {
    static const std::vector<std::string> v = {"straight and cisgender", "LGBTQ+"};
    return v;
}

const std::vector<std::string>& education() {
    static const std::vector<std::string> v = {
        "no high school diploma", "high school diploma", "some college",
        "bachelor's degree",      "master's degree",     "doctorate"};
    return v;
}

const std::vector<std::string>& parental_status() {
    static const std::vector<std::string> v = {"parent", "not a parent"};
    return v;
}

const std::vector<std::string>& political_stance() {
    static const std::vector<std::string> v = {"liberal", "conservative", "independent"};
    return v;
}

const std::vector<std::string>& age_band() {
    static const std::vector<std::string> v = {"18-24", "25-34", "35-44", "45-54", "55-64", "65+"};
    return v;
}

const std::vector<std::string>& forums() {
    static const std::vector<std::string> v = {
        "social media", "news sites", "video sites", "discussion forums", "comment sections", "blogs"};
    return v;
}

const std::vector<std::string>& yes_no() {
    static const std::vector<std::string> v = {"yes", "no"};
    return v;
}

const std::vector<std::string>& toxicity_problem() {
    static const std::vector<std::string> v = {"serious problem", "minor problem", "not a problem"};
    return v;
}

const std::vector<std::string>& tech_impact() {
    static const std::vector<std::string> v = {"positive", "negative", "mixed"};
    return v;
}

bool is_known(const std::vector<std::string>& vocab, const std::string& value) {
    std::string needle = lower_ascii(value);
    for (const auto& entry : vocab) {
        if (lower_ascii(entry) == needle) return true;
    }
    return false;
}

}  // namespace categories

namespace {

void check_field(const std::string& field, const std::string& value,
                 const std::vector<std::string>& vocab) {
    if (value.empty()) throw ValidationError("demographics field '" + field + "' is empty");
    if (value == kUndisclosed) return;
    if (!categories::is_known(vocab, value)) {
        throw ValidationError("demographics field '" + field + "' has unknown category '" + value + "'");
    }
}

void check_survey_value(const std::string& field, const std::string& value,
                        const std::vector<std::string>& vocab) {
    if (value.empty()) throw ValidationError("survey field '" + field + "' is empty");
    if (!categories::is_known(vocab, value)) {
        throw ValidationError("survey field '" + field + "' has unknown category '" + value + "'");
    }
}

}  // namespace

void Demographics::validate() const {
    check_field("race", race, categories::race());
    check_field("gender", gender, categories::gender());
    check_field("religion_importance", religion_importance, categories::religion_importance());
    check_field("lgbt_status", lgbt_status, categories::lgbt_status());
    check_field("education", education, categories::education());
    check_field("parental_status", parental_status, categories::parental_status());
    check_field("political_stance", political_stance, categories::political_stance());
    check_field("age_band", age_band, categories::age_band());
}

bool SurveyResponses::empty() const {
    return preferred_forums.empty() && !uses_social_media && !seen_toxic_content &&
           !personally_targeted && !toxicity_is_problem && !tech_impact_opinion;
}

void SurveyResponses::validate() const {
    if (empty()) throw ValidationError("survey responses present but carry no fields");
    for (const auto& forum : preferred_forums) {
        check_survey_value("preferred_forums", forum, categories::forums());
    }
    if (uses_social_media) check_survey_value("uses_social_media", *uses_social_media, categories::yes_no());
    if (seen_toxic_content) check_survey_value("seen_toxic_content", *seen_toxic_content, categories::yes_no());
    if (personally_targeted) check_survey_value("personally_targeted", *personally_targeted, categories::yes_no());
    if (toxicity_is_problem)
        check_survey_value("toxicity_is_problem", *toxicity_is_problem, categories::toxicity_problem());
    if (tech_impact_opinion)
        check_survey_value("tech_impact_opinion", *tech_impact_opinion, categories::tech_impact());
}

std::map<Split, std::size_t> Corpus::split_sizes() const {
    std::map<Split, std::size_t> counts = {
        {Split::train, 0}, {Split::dev, 0}, {Split::test, 0}};
    for (const auto& record : records) counts[record.split]++;
    return counts;
}

std::vector<const RatingRecord*> Corpus::records_in(Split split) const {
    std::vector<const RatingRecord*> out;
    for (const auto& record : records) {
        if (record.split == split) out.push_back(&record);
    }
    return out;
}

const AnnotatorProfile& Corpus::profile(const std::string& annotator_id) const {
    auto it = annotators.find(annotator_id);
    if (it == annotators.end()) throw LookupError("unknown annotator: '" + annotator_id + "'");
    return it->second;
}

std::map<Split, std::size_t> split_counts(const Corpus& corpus) {
    return corpus.split_sizes();
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

namespace {

ordered_json demographics_to_json(const Demographics& d) {
    ordered_json j;
    j["race"] = d.race;
    j["gender"] = d.gender;
    j["religion_importance"] = d.religion_importance;
    j["lgbt_status"] = d.lgbt_status;
    j["education"] = d.education;
    j["parental_status"] = d.parental_status;
    j["political_stance"] = d.political_stance;
    j["age_band"] = d.age_band;
    return j;
}

Demographics demographics_from_json(const ordered_json& j) {
    static const std::set<std::string> known = {
        "race", "gender", "religion_importance", "lgbt_status",
        "education", "parental_status", "political_stance", "age_band"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ValidationError("unknown demographics field '" + key + "'");
    }
    Demographics d;
    auto get = [&](const char* key, std::string& out) {
        if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    get("race", d.race);
    get("gender", d.gender);
    get("religion_importance", d.religion_importance);
    get("lgbt_status", d.lgbt_status);
    get("education", d.education);
    get("parental_status", d.parental_status);
    get("political_stance", d.political_stance);
    get("age_band", d.age_band);
    d.validate();
    return d;
}

ordered_json survey_to_json(const SurveyResponses& s) {
    ordered_json j;
    if (!s.preferred_forums.empty()) j["preferred_forums"] = s.preferred_forums;
    if (s.uses_social_media) j["uses_social_media"] = *s.uses_social_media;
    if (s.seen_toxic_content) j["seen_toxic_content"] = *s.seen_toxic_content;
    if (s.personally_targeted) j["personally_targeted"] = *s.personally_targeted;
    if (s.toxicity_is_problem) j["toxicity_is_problem"] = *s.toxicity_is_problem;
    if (s.tech_impact_opinion) j["tech_impact_opinion"] = *s.tech_impact_opinion;
    return j;
}

SurveyResponses survey_from_json(const ordered_json& j) {
    static const std::set<std::string> known = {
        "preferred_forums", "uses_social_media", "seen_toxic_content",
        "personally_targeted", "toxicity_is_problem", "tech_impact_opinion"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ValidationError("unknown survey field '" + key + "'");
    }
    SurveyResponses s;
    if (j.contains("preferred_forums")) s.preferred_forums = j.at("preferred_forums").get<std::vector<std::string>>();
    auto get = [&](const char* key, std::optional<std::string>& out) {
        if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    get("uses_social_media", s.uses_social_media);
    get("seen_toxic_content", s.seen_toxic_content);
    get("personally_targeted", s.personally_targeted);
    get("toxicity_is_problem", s.toxicity_is_problem);
    get("tech_impact_opinion", s.tech_impact_opinion);
    s.validate();
    return s;
}

int rating_from_json(const ordered_json& j, const char* where) {
    if (!j.is_number_integer()) throw ValidationError(std::string(where) + ": rating must be an integer");
    long long r = j.get<long long>();
    if (r < kMinRating || r > kMaxRating) {
        throw ValidationError(std::string(where) + ": rating " + std::to_string(r) + " outside 0-4");
    }
    return static_cast<int>(r);
}

ordered_json record_to_json(const RatingRecord& r) {
    ordered_json j;
    j["kind"] = "record";
    j["text_id"] = r.text_id;
    j["annotator_id"] = r.annotator_id;
    j["text"] = r.text;
    j["rating"] = r.rating;
    j["split"] = to_string(r.split);
    return j;
}

ordered_json profile_to_json(const AnnotatorProfile& p) {
    ordered_json j;
    j["kind"] = "profile";
    j["annotator_id"] = p.annotator_id;
    if (p.demographics) j["demographics"] = demographics_to_json(*p.demographics);
    if (p.survey) j["survey"] = survey_to_json(*p.survey);
    ordered_json history = ordered_json::array();
    for (const auto& h : p.history) {
        ordered_json e;
        e["text_id"] = h.text_id;
        e["text"] = h.text;
        e["rating"] = h.rating;
        history.push_back(std::move(e));
    }
    j["history"] = std::move(history);
    return j;
}

void validate_corpus(Corpus& corpus, std::vector<std::string>* warnings, const LoadOptions& options) {
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, std::size_t> per_annotator;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& r = corpus.records[i];
        auto key = std::make_pair(r.text_id, r.annotator_id);
        if (!seen.insert(key).second) {
            throw ValidationError("duplicate (text_id, annotator_id) pair (" + r.text_id + ", " +
                                  r.annotator_id + ")");
        }
        if (!corpus.annotators.count(r.annotator_id)) {
            throw ValidationError("record " + std::to_string(i) + " references unknown annotator '" +
                                  r.annotator_id + "'");
        }
        per_annotator[r.annotator_id]++;
    }
    for (const auto& [id, profile] : corpus.annotators) {
        if (profile.history.size() > options.history_cap) {
            throw ValidationError("annotator '" + id + "' history length " +
                                  std::to_string(profile.history.size()) + " exceeds cap " +
                                  std::to_string(options.history_cap));
        }
        for (const auto& h : profile.history) {
            if (h.rating < kMinRating || h.rating > kMaxRating) {
                throw ValidationError("annotator '" + id + "' history rating outside 0-4");
            }
        }
    }
    if (warnings) {
        for (const auto& [id, count] : per_annotator) {
            if (count > kReferenceRatingsPerAnnotator) {
                warnings->push_back("annotator '" + id + "' has " + std::to_string(count) +
                                    " records, above the reference per-annotator quota of " +
                                    std::to_string(kReferenceRatingsPerAnnotator));
            }
        }
    }
}

Corpus load_jsonl(const std::string& path, const LoadOptions& options,
                  std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);

    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        std::string where = "line " + std::to_string(line_no);
        try {
            if (!j.contains("kind")) throw ValidationError("missing 'kind' discriminator");
            std::string kind = j.at("kind").get<std::string>();
            if (kind == "record") {
                RatingRecord r;
                r.text_id = j.at("text_id").get<std::string>();
                r.annotator_id = j.at("annotator_id").get<std::string>();
                r.text = j.at("text").get<std::string>();
                r.rating = rating_from_json(j.at("rating"), where.c_str());
                r.split = split_from_string(j.at("split").get<std::string>());
                if (r.text_id.empty() || r.annotator_id.empty())
                    throw ValidationError("empty identifier");
                corpus.records.push_back(std::move(r));
            } else if (kind == "profile") {
                AnnotatorProfile p;
                p.annotator_id = j.at("annotator_id").get<std::string>();
                if (p.annotator_id.empty()) throw ValidationError("empty annotator_id");
                if (j.contains("demographics") && !j.at("demographics").is_null()) {
                    p.demographics = demographics_from_json(j.at("demographics"));
                }
                if (j.contains("survey") && !j.at("survey").is_null()) {
                    p.survey = survey_from_json(j.at("survey"));
                }
                if (j.contains("history") && !j.at("history").is_null()) {
                    for (const auto& e : j.at("history")) {
                        HistoryEntry h;
                        h.text_id = e.value("text_id", std::string());
                        h.text = e.at("text").get<std::string>();
                        h.rating = rating_from_json(e.at("rating"), where.c_str());
                        p.history.push_back(std::move(h));
                    }
                }
                if (corpus.annotators.count(p.annotator_id)) {
                    throw ValidationError("duplicate profile for annotator '" + p.annotator_id + "'");
                }
                corpus.annotators.emplace(p.annotator_id, std::move(p));
            } else {
                throw ValidationError("unknown kind '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    validate_corpus(corpus, warnings, options);
    return corpus;
}

// RFC 4180 quoting, applied only when needed so files stay readable.
std::string csv_escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::vector<std::string> csv_parse_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            if (!current.empty())
                throw ParseError("line " + std::to_string(line_no) + ": stray quote in CSV field");
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    if (in_quotes) throw ParseError("line " + std::to_string(line_no) + ": unterminated CSV quote");
    fields.push_back(std::move(current));
    return fields;
}

const char* kCsvHeader = "text_id,annotator_id,text,rating,split";

Corpus load_csv(const std::string& path, const LoadOptions& options,
                std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);

    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) {
        throw ParseError("line 1: expected CSV header '" + std::string(kCsvHeader) + "'");
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = csv_parse_line(line, line_no);
        if (fields.size() != 5) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        }
        RatingRecord r;
        r.text_id = fields[0];
        r.annotator_id = fields[1];
        r.text = fields[2];
        try {
            std::size_t used = 0;
            int rating = std::stoi(fields[3], &used);
            if (used != fields[3].size()) throw std::invalid_argument("trailing junk");
            if (rating < kMinRating || rating > kMaxRating) {
                throw ValidationError("line " + std::to_string(line_no) + ": rating " +
                                      std::to_string(rating) + " outside 0-4");
            }
            r.rating = rating;
        } catch (const std::invalid_argument&) {
            throw ParseError("line " + std::to_string(line_no) + ": rating is not an integer");
        } catch (const std::out_of_range&) {
            throw ParseError("line " + std::to_string(line_no) + ": rating is not an integer");
        }
        try {
            r.split = split_from_string(fields[4]);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (r.text_id.empty() || r.annotator_id.empty()) {
            throw ValidationError("line " + std::to_string(line_no) + ": empty identifier");
        }
        // CSV carries no profiles; create a bare one per annotator.
        if (!corpus.annotators.count(r.annotator_id)) {
            AnnotatorProfile p;
            p.annotator_id = r.annotator_id;
            corpus.annotators.emplace(r.annotator_id, std::move(p));
        }
        corpus.records.push_back(std::move(r));
    }
    validate_corpus(corpus, warnings, options);
    return corpus;
}

}  // namespace

Corpus load_corpus(const std::string& path, CorpusFormat format,
                   std::vector<std::string>* warnings, const LoadOptions& options) {
    switch (format) {
        case CorpusFormat::jsonl: return load_jsonl(path, options, warnings);
        case CorpusFormat::csv: return load_csv(path, options, warnings);
    }
    throw ConfigError("unknown corpus format");
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& [_, profile] : corpus.annotators) {
        out += profile_to_json(profile).dump();
        out += '\n';
    }
    for (const auto& record : corpus.records) {
        out += record_to_json(record).dump();
        out += '\n';
    }
    return out;
}

std::string corpus_to_csv(const Corpus& corpus) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : corpus.records) {
        out += csv_escape(r.text_id);
        out += ',';
        out += csv_escape(r.annotator_id);
        out += ',';
        out += csv_escape(r.text);
        out += ',';
        out += std::to_string(r.rating);
        out += ',';
        out += to_string(r.split);
        out += '\n';
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::string& path, CorpusFormat format) {
    switch (format) {
        case CorpusFormat::jsonl: write_file(path, corpus_to_jsonl(corpus)); return;
        case CorpusFormat::csv: write_file(path, corpus_to_csv(corpus)); return;
    }
    throw ConfigError("unknown corpus format");
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

struct Persona {
    double bias;
    SurveyResponses survey;
    Demographics demographics;  // six predictable attributes; age/parental filled per annotator
};

SurveyResponses make_survey(std::vector<std::string> forums, const char* social, const char* seen,
                            const char* targeted, const char* problem, const char* tech) {
    SurveyResponses s;
    s.preferred_forums = std::move(forums);
    s.uses_social_media = social;
    s.seen_toxic_content = seen;
    s.personally_targeted = targeted;
    s.toxicity_is_problem = problem;
    s.tech_impact_opinion = tech;
    return s;
}

Demographics make_demo(const char* race, const char* gender, const char* religion,
                       const char* lgbt, const char* education, const char* stance) {
    Demographics d;
    d.race = race;
    d.gender = gender;
    d.religion_importance = religion;
    d.lgbt_status = lgbt;
    d.education = education;
    d.political_stance = stance;
    return d;
}

// Each persona couples a rating bias with a distinct survey fingerprint and
// the demographic attributes that fingerprint determines.
const std::vector<Persona>& personas() {
    static const std::vector<Persona> v = {
        {-1.0,
         make_survey({"news sites"}, "yes", "no", "no", "not a problem", "positive"),
         make_demo("white", "male", "not important", "straight and cisgender", "high school diploma",
                   "conservative")},
        {-1.0,
         make_survey({"blogs", "video sites"}, "yes", "yes", "no", "minor problem", "positive"),
         make_demo("Asian", "female", "somewhat important", "straight and cisgender",
                   "Bachelor's degree", "liberal")},
        {0.0,
         make_survey({"discussion forums"}, "no", "yes", "no", "minor problem", "mixed"),
         make_demo("Black", "female", "very important", "straight and cisgender", "some college",
                   "independent")},
        {0.0,
         make_survey({"news sites", "comment sections"}, "yes", "yes", "yes", "serious problem",
                     "negative"),
         make_demo("Hispanic", "male", "somewhat important", "LGBTQ+", "master's degree", "liberal")},
        {1.0,
         make_survey({"video sites"}, "no", "yes", "yes", "serious problem", "negative"),
         make_demo("white", "nonbinary", "not important", "LGBTQ+", "doctorate", "liberal")},
        {1.0,
         make_survey({"comment sections", "blogs"}, "yes", "yes", "yes", "serious problem", "mixed"),
         make_demo("mixed race", "female", "very important", "straight and cisgender",
                   "Bachelor's degree", "conservative")},
    };
    return v;
}

const std::vector<std::string>& severity_phrases() {
    static const std::vector<std::string> v = {
        "thanks for sharing, this genuinely made my day",
        "i guess that is one way to look at it",
        "this take is honestly pretty dumb",
        "only an idiot would post something like this",
        "you are worthless garbage and everyone here despises you",
    };
    return v;
}

std::string pad_id(const char* prefix, std::size_t index) {
    std::string digits = std::to_string(index);
    std::string out = prefix;
    for (std::size_t i = digits.size(); i < 4; ++i) out += '0';
    return out + digits;
}

}  // namespace

SynthCorpus generate_corpus(const GeneratorParams& params) {
    if (params.n_texts == 0 || params.raters_per_text == 0 || params.ratings_per_annotator == 0) {
        throw ConfigError("generator counts must be positive");
    }
    const std::size_t total = params.n_texts * params.raters_per_text;
    if (total % params.ratings_per_annotator != 0) {
        throw ConfigError("n_texts * raters_per_text (" + std::to_string(total) +
                          ") is not divisible by ratings_per_annotator (" +
                          std::to_string(params.ratings_per_annotator) + ")");
    }
    const std::size_t n_annotators = total / params.ratings_per_annotator;
    if (params.raters_per_text > n_annotators) {
        throw ConfigError("raters_per_text " + std::to_string(params.raters_per_text) +
                          " exceeds the " + std::to_string(n_annotators) +
                          " annotators implied by the quotas");
    }

    Rng rng(mix_seeds(params.seed, fnv1a64("raterlens-synth")));
    SynthCorpus out;

    // Texts with latent severities.
    std::vector<std::string> text_ids(params.n_texts);
    std::vector<std::string> texts(params.n_texts);
    std::vector<double> severities(params.n_texts);
    for (std::size_t t = 0; t < params.n_texts; ++t) {
        text_ids[t] = pad_id("t", t);
        double severity = rng.uniform(0.0, 4.0);
        severities[t] = severity;
        auto bucket = static_cast<std::size_t>(std::lround(severity));
        texts[t] = severity_phrases()[bucket] + " (sample " + std::to_string(t) + ")";
        out.text_severity[text_ids[t]] = severity;
    }

    // Annotators drawn from the persona table.
    std::vector<std::string> annotator_ids(n_annotators);
    std::vector<double> biases(n_annotators);
    for (std::size_t a = 0; a < n_annotators; ++a) {
        annotator_ids[a] = pad_id("a", a);
        const Persona& persona = personas()[rng.uniform_index(personas().size())];
        AnnotatorProfile profile;
        profile.annotator_id = annotator_ids[a];
        Demographics demo = persona.demographics;
        demo.age_band = rng.pick(categories::age_band());
        demo.parental_status = rng.pick(categories::parental_status());
        profile.demographics = demo;
        profile.survey = persona.survey;
        biases[a] = persona.bias;
        out.annotator_bias[annotator_ids[a]] = persona.bias;
        out.corpus.annotators.emplace(profile.annotator_id, std::move(profile));
    }

    // Regular assignment: text-major slots, annotators offset by a shuffled
    // order. raters_per_text <= n_annotators guarantees distinct raters per
    // text, and the divisibility check gives every annotator an equal quota.
    std::vector<std::size_t> annotator_order(n_annotators);
    for (std::size_t i = 0; i < n_annotators; ++i) annotator_order[i] = i;
    rng.shuffle(annotator_order);

    for (std::size_t t = 0; t < params.n_texts; ++t) {
        for (std::size_t r = 0; r < params.raters_per_text; ++r) {
            std::size_t slot = t * params.raters_per_text + r;
            std::size_t a = annotator_order[slot % n_annotators];
            double noise = rng.normal(0.0, 0.3);
            double latent = severities[t] + biases[a] + noise;
            int rating = static_cast<int>(std::lround(latent));
            rating = std::clamp(rating, kMinRating, kMaxRating);

            RatingRecord record;
            record.text_id = text_ids[t];
            record.annotator_id = annotator_ids[a];
            record.text = texts[t];
            record.rating = rating;
            out.corpus.records.push_back(std::move(record));
        }
    }

    // 80/10/10 split over a shuffled view; records keep text-major order.
    const std::size_t n = out.corpus.records.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t n_dev = n / 10;
    const std::size_t n_test = n / 10;
    for (std::size_t i = 0; i < n; ++i) {
        Split split = Split::train;
        if (i < n_dev) split = Split::dev;
        else if (i < n_dev + n_test) split = Split::test;
        out.corpus.records[order[i]].split = split;
    }

    // Histories mirror each annotator's own records, newest last, capped.
    for (const auto& record : out.corpus.records) {
        auto& profile = out.corpus.annotators.at(record.annotator_id);
        profile.history.push_back({record.text_id, record.text, record.rating});
    }
    for (auto& [_, profile] : out.corpus.annotators) {
        if (profile.history.size() > params.history_cap) {
            profile.history.erase(profile.history.begin(),
                                  profile.history.end() - static_cast<std::ptrdiff_t>(params.history_cap));
        }
    }
    return out;
}

}  // namespace raterlens
