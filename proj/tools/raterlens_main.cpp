#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

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
#include "raterlens/util.hpp"

namespace rl = raterlens;
using ordered_json = nlohmann::ordered_json;

namespace {

rl::ProviderSpec provider_from_flags(const std::string& provider, const std::string& endpoint,
                                     std::size_t dimension, std::uint64_t seed) {
    if (provider == "http") {
        if (endpoint.empty()) throw rl::ConfigError("--endpoint is required for the http provider");
        if (dimension == 0) throw rl::ConfigError("--dim is required for the http provider");
        return rl::ProviderSpec::http(endpoint, "remote", dimension);
    }
    return rl::ProviderSpec::mock(provider, seed, dimension);
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& warning : warnings) std::cerr << "warning: " << warning << "\n";
}

int run_gradcheck() {
    struct Case {
        std::string name;
        std::vector<std::size_t> dims;
    };
    // The two production head shapes plus the imputer head.
    std::vector<Case> cases = {
        {"embed-head 3072->1024->1024->1024->5", {3072, 1024, 1024, 1024, 5}},
        {"ncf-head (768+64)->256->256->64->5", {768 + 64, 256, 256, 64, 5}},
        {"demo-head 512->256->7", {512, 256, 7}},
    };
    bool all_passed = true;
    for (const auto& test_case : cases) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto net = rl::DenseNet::make(test_case.dims, seed);
            rl::Batch batch;
            rl::Rng rng(rl::mix_seeds(seed, rl::fnv1a64(test_case.name)));
            for (int b = 0; b < 2; ++b) {
                std::vector<double> x(test_case.dims.front());
                for (double& v : x) v = rng.normal();
                batch.inputs.push_back(std::move(x));
                batch.labels.push_back(static_cast<int>(
                    rng.uniform_index(test_case.dims.back())));
            }
            auto report = rl::gradient_check(net, batch, 1e-4, 1e-4, 25, seed);
            std::printf("%-44s seed=%llu  coords=%zu  max_rel=%.3e  %s\n", test_case.name.c_str(),
                        static_cast<unsigned long long>(seed), report.coordinates_checked,
                        report.max_relative_error, report.passed ? "PASS" : "FAIL");
            all_passed = all_passed && report.passed;
        }
    }
    return all_passed ? 0 : 1;
}

rl::ExperimentSpec base_spec_from_config(const ordered_json& config) {
    rl::ExperimentSpec base;
    base.predictor = rl::predictor_from_string(config.value("predictor", std::string("embed_head")));
    base.seed = config.value("seed", std::uint64_t{0});
    if (config.contains("train")) {
        const auto& t = config.at("train");
        base.train.epochs = t.value("epochs", 40);
        base.train.learning_rate = t.value("learning_rate", 1e-3);
        base.train.batch_size = t.value("batch_size", 8);
        base.train.l2 = t.value("l2", 0.0);
    } else {
        base.train.epochs = 40;
    }
    if (config.contains("provider")) {
        const auto& p = config.at("provider");
        std::string id = p.value("provider_id", std::string("mock"));
        if (id == "http") {
            base.provider = rl::ProviderSpec::http(p.at("endpoint").get<std::string>(),
                                                   p.value("model_id", std::string("remote")),
                                                   p.at("dimension").get<std::size_t>());
        } else {
            base.provider = rl::ProviderSpec::mock(p.value("model_id", std::string("mock-large")),
                                                   p.value("seed", std::uint64_t{0}),
                                                   p.value("dimension", std::size_t{0}));
        }
    } else if (base.predictor != rl::PredictorKind::icl) {
        base.provider = rl::ProviderSpec::mock("mock-large", base.seed);
    }
    if (config.contains("chat")) {
        const auto& c = config.at("chat");
        base.chat.provider_id = c.value("provider_id", std::string("scripted"));
        base.chat.model_id = c.value("model_id", std::string());
        base.chat.endpoint = c.value("endpoint", std::string());
        base.chat.temperature = c.value("temperature", 0.0);
        base.chat.max_retries = c.value("max_retries", 3);
        base.chat.replies_path = c.value("replies_path", std::string());
    }
    base.stub_value = config.value("stub_value", 2);
    return base;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"raterlens: individual toxicity-rating prediction toolkit"};
    app.require_subcommand(1);

    // --- ingest ---
    std::string ingest_in, ingest_out, ingest_format = "jsonl", ingest_out_format;
    auto* ingest = app.add_subcommand("ingest", "validate a corpus file and re-emit it canonically");
    ingest->add_option("--in", ingest_in, "input corpus path")->required();
    ingest->add_option("--format", ingest_format, "input format: jsonl|csv");
    ingest->add_option("--out", ingest_out, "output corpus path")->required();
    ingest->add_option("--out-format", ingest_out_format, "output format (defaults to --format)");

    // --- synth ---
    std::uint64_t synth_seed = 0;
    std::size_t synth_texts = 0, synth_raters = 5, synth_quota = 20;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--seed", synth_seed, "generator seed")->required();
    synth->add_option("--texts", synth_texts, "number of texts")->required();
    synth->add_option("--raters-per-text", synth_raters, "ratings per text");
    synth->add_option("--ratings-per-annotator", synth_quota, "records per annotator");
    synth->add_option("--out", synth_out, "output JSONL path")->required();

    // --- render ---
    std::string render_corpus, render_ablation = "text", render_record, render_annotator;
    auto* render = app.add_subcommand("render", "print the joined context string for one record");
    render->add_option("--corpus", render_corpus, "corpus JSONL path")->required();
    render->add_option("--ablation", render_ablation, "segments, e.g. text,history,survey,demo");
    render->add_option("--record", render_record, "text id (or text_id:annotator_id)")->required();
    render->add_option("--annotator", render_annotator, "annotator id");

    // --- nets ---
    auto* nets = app.add_subcommand("nets", "network utilities");
    nets->require_subcommand(1);
    auto* gradcheck = nets->add_subcommand("gradcheck", "finite-difference gradient verification");
    (void)gradcheck;

    // --- train-ncf ---
    std::string ncf_corpus, ncf_fusion = "concat", ncf_provider = "mock-large", ncf_endpoint,
                ncf_cache = "cache", ncf_out;
    std::size_t ncf_dim = rl::kAnnotatorDimDefault, ncf_provider_dim = 0;
    int ncf_epochs = 30;
    std::uint64_t ncf_seed = 0;
    auto* train_ncf = app.add_subcommand("train-ncf", "train the collaborative-filtering head");
    train_ncf->add_option("--corpus", ncf_corpus)->required();
    train_ncf->add_option("--dim", ncf_dim, "annotator embedding dimension (8|512|768|...)");
    train_ncf->add_option("--fusion", ncf_fusion, "concat|dot");
    train_ncf->add_option("--provider", ncf_provider, "mock-large|mock-small|http");
    train_ncf->add_option("--endpoint", ncf_endpoint);
    train_ncf->add_option("--provider-dim", ncf_provider_dim);
    train_ncf->add_option("--cache-dir", ncf_cache);
    train_ncf->add_option("--epochs", ncf_epochs);
    train_ncf->add_option("--seed", ncf_seed);
    train_ncf->add_option("--out", ncf_out, "checkpoint path");

    // --- train-embed ---
    std::string embed_corpus, embed_ablation = "text,history,survey,demo",
                embed_provider = "mock-large", embed_endpoint, embed_cache = "cache", embed_out;
    std::size_t embed_dim = 0;
    int embed_epochs = 40;
    std::uint64_t embed_seed = 0;
    auto* train_embed = app.add_subcommand("train-embed", "train the embedding-based head");
    train_embed->add_option("--corpus", embed_corpus)->required();
    train_embed->add_option("--ablation", embed_ablation);
    train_embed->add_option("--provider", embed_provider, "mock-large|mock-small|http");
    train_embed->add_option("--endpoint", embed_endpoint);
    train_embed->add_option("--dim", embed_dim);
    train_embed->add_option("--cache-dir", embed_cache);
    train_embed->add_option("--epochs", embed_epochs);
    train_embed->add_option("--seed", embed_seed);
    train_embed->add_option("--out", embed_out, "checkpoint path");

    // --- icl-predict ---
    std::string icl_chat_spec, icl_corpus, icl_ablation = "text,history,survey,demo",
                icl_split = "dev", icl_out;
    auto* icl_cmd = app.add_subcommand("icl-predict", "prompt a chat model for each record");
    icl_cmd->add_option("--chat-spec", icl_chat_spec, "chat spec JSON path")->required();
    icl_cmd->add_option("--corpus", icl_corpus)->required();
    icl_cmd->add_option("--ablation", icl_ablation);
    icl_cmd->add_option("--split", icl_split, "train|dev|test");
    icl_cmd->add_option("--out", icl_out, "write per-record predictions JSONL here");

    // --- impute-demo ---
    std::string impute_corpus, impute_mode = "survey", impute_out, impute_cache = "cache";
    int impute_epochs = 60;
    std::uint64_t impute_seed = 0;
    auto* impute_cmd = app.add_subcommand("impute-demo", "predict demographics from survey data");
    impute_cmd->add_option("--corpus", impute_corpus)->required();
    impute_cmd->add_option("--mode", impute_mode, "survey|survey+text");
    impute_cmd->add_option("--out", impute_out, "predictions JSONL path")->required();
    impute_cmd->add_option("--cache-dir", impute_cache);
    impute_cmd->add_option("--epochs", impute_epochs);
    impute_cmd->add_option("--seed", impute_seed);

    // --- ablate ---
    std::string ablate_config, ablate_split, ablate_out = "report", ablate_cache = "cache";
    auto* ablate = app.add_subcommand("ablate", "run the ablation matrix from a config file");
    ablate->add_option("--config", ablate_config, "experiment config JSON")->required();
    ablate->add_option("--split", ablate_split, "dev|test (overrides the config)");
    ablate->add_option("--out", ablate_out, "report directory");
    ablate->add_option("--cache-dir", ablate_cache);

    // --- stub-chat ---
    std::string stub_replies;
    int stub_port = 8811;
    auto* stub = app.add_subcommand("stub-chat", "serve scripted chat replies over HTTP");
    stub->add_option("--replies", stub_replies, "replies JSONL")->required();
    stub->add_option("--port", stub_port);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            std::vector<std::string> warnings;
            auto format = rl::format_from_string(ingest_format);
            auto corpus = rl::load_corpus(ingest_in, format, &warnings);
            print_warnings(warnings);
            auto out_format = ingest_out_format.empty() ? format
                                                        : rl::format_from_string(ingest_out_format);
            rl::save_corpus(corpus, ingest_out, out_format);
            auto counts = rl::split_counts(corpus);
            std::cout << "records: " << corpus.records.size()
                      << "  annotators: " << corpus.annotators.size()
                      << "  train/dev/test: " << counts[rl::Split::train] << "/"
                      << counts[rl::Split::dev] << "/" << counts[rl::Split::test] << "\n";
        } else if (*synth) {
            auto synth_result = rl::generate_corpus(
                {synth_seed, synth_texts, synth_raters, synth_quota, rl::kDefaultHistoryCap});
            rl::save_corpus(synth_result.corpus, synth_out, rl::CorpusFormat::jsonl);
            std::cout << "wrote " << synth_result.corpus.records.size() << " records / "
                      << synth_result.corpus.annotators.size() << " annotators to " << synth_out
                      << "\n";
        } else if (*render) {
            auto corpus = rl::load_corpus(render_corpus, rl::CorpusFormat::jsonl);
            std::string text_id = render_record;
            std::string annotator_id = render_annotator;
            if (annotator_id.empty()) {
                auto colon = render_record.find(':');
                if (colon == std::string::npos) {
                    throw rl::ConfigError("pass --annotator or use --record text_id:annotator_id");
                }
                text_id = render_record.substr(0, colon);
                annotator_id = render_record.substr(colon + 1);
            }
            const rl::RatingRecord* found = nullptr;
            for (const auto& record : corpus.records) {
                if (record.text_id == text_id && record.annotator_id == annotator_id) {
                    found = &record;
                    break;
                }
            }
            if (!found) {
                throw rl::LookupError("no record (" + text_id + ", " + annotator_id + ")");
            }
            auto spec = rl::AblationSpec::parse(render_ablation);
            auto context =
                rl::render_context(*found, corpus.profile(annotator_id), spec, nullptr);
            std::cout << context.joined << "\n";
        } else if (*gradcheck) {
            return run_gradcheck();
        } else if (*train_ncf) {
            auto corpus = rl::load_corpus(ncf_corpus, rl::CorpusFormat::jsonl);
            auto provider =
                provider_from_flags(ncf_provider, ncf_endpoint, ncf_provider_dim, ncf_seed);
            rl::Encoder encoder(provider, ncf_cache);
            rl::TrainConfig cfg;
            cfg.epochs = ncf_epochs;
            cfg.seed = ncf_seed;
            rl::NcfTrainOptions options;
            options.embedding_dim = ncf_dim;
            options.fusion = rl::fusion_from_string(ncf_fusion);
            auto model = rl::ncf_train(corpus, encoder, cfg, options);
            std::cout << "train MAE: " << rl::ncf_split_mae(model, encoder, corpus, rl::Split::train)
                      << "\n";
            auto counts = rl::split_counts(corpus);
            if (counts[rl::Split::dev] > 0) {
                std::cout << "dev MAE:   " << rl::ncf_split_mae(model, encoder, corpus, rl::Split::dev)
                          << "\n";
            }
            if (!ncf_out.empty()) {
                rl::save_ncf_checkpoint(model, ncf_out);
                std::cout << "checkpoint: " << ncf_out << "\n";
            }
        } else if (*train_embed) {
            auto corpus = rl::load_corpus(embed_corpus, rl::CorpusFormat::jsonl);
            auto provider = provider_from_flags(embed_provider, embed_endpoint, embed_dim, embed_seed);
            rl::Encoder encoder(provider, embed_cache);
            rl::TrainConfig cfg;
            cfg.epochs = embed_epochs;
            cfg.seed = embed_seed;
            auto ablation = rl::AblationSpec::parse(embed_ablation);
            auto result = rl::embedhead_train(corpus, encoder, ablation, cfg);
            std::cout << "train MAE: "
                      << rl::embedhead_split_mae(result.model, encoder, corpus, rl::Split::train)
                      << "\n";
            if (!result.dev_mae.empty()) {
                std::cout << "dev MAE:   " << result.dev_mae.back() << "\n";
            }
            if (!embed_out.empty()) {
                rl::save_embedhead_checkpoint(result.model, embed_out);
                std::cout << "checkpoint: " << embed_out << "\n";
            }
        } else if (*icl_cmd) {
            auto corpus = rl::load_corpus(icl_corpus, rl::CorpusFormat::jsonl);
            auto chat = rl::load_chat_spec(icl_chat_spec);
            auto client = rl::ChatClient::make(chat);
            auto ablation = rl::AblationSpec::parse(icl_ablation);
            auto split = rl::split_from_string(icl_split);

            std::vector<int> predictions, truths;
            std::size_t fallbacks = 0;
            std::string out_lines;
            for (const auto* record : corpus.records_in(split)) {
                auto prompt = rl::build_prompt(*record, corpus.profile(record->annotator_id),
                                               ablation, nullptr);
                auto result = rl::icl_predict(*client, prompt, rl::FallbackPolicy::fallback_mid);
                if (result.flagged) ++fallbacks;
                predictions.push_back(result.rating);
                truths.push_back(record->rating);
                if (!icl_out.empty()) {
                    ordered_json j;
                    j["text_id"] = record->text_id;
                    j["annotator_id"] = record->annotator_id;
                    j["prediction"] = result.rating;
                    j["truth"] = record->rating;
                    j["flagged"] = result.flagged;
                    out_lines += j.dump();
                    out_lines += '\n';
                }
            }
            if (!icl_out.empty()) rl::write_file(icl_out, out_lines);
            std::cout << "n: " << predictions.size() << "  MAE: " << rl::mae(predictions, truths)
                      << "  fallbacks: " << fallbacks << "\n";
        } else if (*impute_cmd) {
            auto corpus = rl::load_corpus(impute_corpus, rl::CorpusFormat::jsonl);
            auto mode = rl::demo_input_mode_from_string(impute_mode);
            rl::Encoder encoder(rl::ProviderSpec::mock("mock-large", impute_seed), impute_cache);
            rl::TrainConfig cfg;
            cfg.epochs = impute_epochs;
            cfg.seed = impute_seed;
            std::vector<rl::DemoClassifier> classifiers;
            for (const auto& attribute : rl::predictable_attributes()) {
                classifiers.push_back(rl::demo_train(
                    corpus, rl::DemographicTask::standard(attribute, mode), encoder, cfg));
                double survey_acc = rl::demo_accuracy(classifiers.back(), encoder, corpus,
                                                      rl::Split::dev);
                auto baseline = rl::majority_baseline(corpus,
                                                      rl::DemographicTask::standard(attribute));
                std::printf("%-22s accuracy=%.3f  majority=%.3f (%s)\n", attribute.c_str(),
                            survey_acc, baseline.accuracy, baseline.predicted_class.c_str());
            }
            std::vector<std::string> warnings;
            auto imputed = rl::impute(corpus, classifiers, encoder, &warnings);
            print_warnings(warnings);
            rl::save_imputed_jsonl(imputed, impute_out);
            std::cout << "imputed " << imputed.size() << " annotators -> " << impute_out << "\n";
        } else if (*ablate) {
            ordered_json config;
            try {
                config = ordered_json::parse(rl::read_file(ablate_config));
            } catch (const nlohmann::json::exception& e) {
                throw rl::ParseError(std::string("bad experiment config: ") + e.what());
            }
            auto corpus = rl::load_corpus(config.at("corpus").get<std::string>(),
                                          rl::CorpusFormat::jsonl);
            auto base = base_spec_from_config(config);
            base.split = rl::split_from_string(
                !ablate_split.empty() ? ablate_split : config.value("split", std::string("dev")));

            std::vector<rl::ExperimentSpec> specs;
            if (config.contains("rows")) {
                for (const auto& row : config.at("rows")) {
                    rl::ExperimentSpec spec = base;
                    spec.ablation = rl::AblationSpec::parse(row.get<std::string>());
                    specs.push_back(std::move(spec));
                }
            } else {
                specs = rl::canonical_matrix(base);
            }
            auto report = rl::run_ablation_matrix(corpus, specs, ablate_cache);
            rl::render_report(report, ablate_out);
            std::cout << rl::report_to_text(report);
            if (report.any_error()) return 1;
        } else if (*stub) {
            rl::StubChatServer server(rl::load_replies_jsonl(stub_replies));
            int port = server.start(stub_port);
            std::cout << "stub chat endpoint: http://127.0.0.1:" << port
                      << "/v1/chat/completions (ctrl-c to stop)\n";
            while (true) std::this_thread::sleep_for(std::chrono::seconds(3600));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
