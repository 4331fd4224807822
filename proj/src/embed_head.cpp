#include "raterlens/embed_head.hpp"

#include <algorithm>

#include "raterlens/errors.hpp"
#include "raterlens/harness.hpp"
#include "raterlens/util.hpp"
#include "serialize.hpp"

namespace raterlens {

using ordered_json = nlohmann::ordered_json;

void EmbedHeadModel::check_architecture() const {
    head.check_chain();
    if (head.layers.size() != 4) {
        throw ShapeError("embedding head must have exactly 4 dense layers, got " +
                         std::to_string(head.layers.size()));
    }
    if (head.input_dim() != provider.dimension) {
        throw ShapeError("embedding head input dim " + std::to_string(head.input_dim()) +
                         " does not match provider dimension " + std::to_string(provider.dimension));
    }
    if (head.output_dim() != kRatingClasses) {
        throw ShapeError("embedding head must end in width " + std::to_string(kRatingClasses));
    }
}

namespace {

const Demographics* lookup_predicted(const PredictedDemographics* predicted,
                                     const std::string& annotator_id) {
    if (!predicted) return nullptr;
    auto it = predicted->find(annotator_id);
    return it == predicted->end() ? nullptr : &it->second;
}

std::string context_for(const AblationSpec& ablation, const Corpus& corpus,
                        const RatingRecord& record, const PredictedDemographics* predicted) {
    const auto& profile = corpus.profile(record.annotator_id);
    const Demographics* pd = lookup_predicted(predicted, record.annotator_id);
    if (ablation.demographics_source == DemoSource::predicted && !pd) {
        throw ConfigError("no predicted demographics for annotator '" + record.annotator_id + "'");
    }
    return render_context(record, profile, ablation, pd).joined;
}

Batch embed_split(const Corpus& corpus, Encoder& encoder, const AblationSpec& ablation,
                  Split split, const PredictedDemographics* predicted) {
    Batch batch;
    auto records = corpus.records_in(split);
    if (records.empty()) return batch;
    std::vector<std::string> contexts;
    contexts.reserve(records.size());
    for (const auto* record : records) {
        contexts.push_back(context_for(ablation, corpus, *record, predicted));
    }
    auto embedded = encoder.embed_batch(contexts);
    batch.inputs.reserve(embedded.size());
    batch.labels.reserve(records.size());
    for (auto& e : embedded) batch.inputs.push_back(std::move(e.values));
    for (const auto* record : records) batch.labels.push_back(record->rating);
    return batch;
}

double batch_mae(const DenseNet& head, const Batch& batch, DecodeMode decode) {
    std::vector<int> predictions;
    std::vector<int> truths;
    predictions.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        predictions.push_back(decode_rating(forward(head, batch.inputs[i]), decode));
        truths.push_back(batch.labels[i]);
    }
    return mae(predictions, truths);
}

}  // namespace

EmbedHeadTrainResult embedhead_train(const Corpus& corpus, Encoder& encoder,
                                     const AblationSpec& ablation, const TrainConfig& cfg,
                                     const PredictedDemographics* predicted,
                                     const EmbedHeadTrainOptions& options) {
    ablation.validate();
    EmbedHeadTrainResult result;
    result.model.provider = encoder.spec();
    result.model.ablation = ablation;
    result.model.head = DenseNet::make(
        {encoder.spec().dimension, kEmbedHeadHidden, kEmbedHeadHidden, kEmbedHeadHidden,
         kRatingClasses},
        mix_seeds(cfg.seed, fnv1a64("raterlens-embed-head")));
    result.model.check_architecture();

    Batch train_batch = embed_split(corpus, encoder, ablation, Split::train, predicted);
    if (train_batch.size() == 0) throw TrainingError("corpus has no train records");

    // Dev embeddings are fetched once; test-split contexts are never requested here.
    Batch dev_batch;
    if (options.log_dev_mae) {
        dev_batch = embed_split(corpus, encoder, ablation, Split::dev, predicted);
    }

    auto callback = [&](int, double loss) {
        if (dev_batch.size() > 0) {
            result.dev_mae.push_back(batch_mae(result.model.head, dev_batch, result.model.decode));
        }
        return !(options.stop_below_loss > 0.0 && loss < options.stop_below_loss);
    };
    auto trace = train(result.model.head, train_batch, cfg, callback);
    result.epoch_loss = std::move(trace.epoch_loss);
    return result;
}

int embedhead_predict(const EmbedHeadModel& model, Encoder& encoder, const RatingRecord& record,
                      const AnnotatorProfile& profile, const Demographics* predicted) {
    if (model.ablation.demographics_source == DemoSource::predicted && !predicted) {
        throw ConfigError("model ablation requires predicted demographics");
    }
    auto context = render_context(record, profile, model.ablation, predicted);
    auto embedding = encoder.embed(context.joined);
    return decode_rating(forward(model.head, embedding.values), model.decode);
}

double embedhead_split_mae(const EmbedHeadModel& model, Encoder& encoder, const Corpus& corpus,
                           Split split, const PredictedDemographics* predicted) {
    std::vector<int> predictions;
    std::vector<int> truths;
    for (const auto* record : corpus.records_in(split)) {
        const auto& profile = corpus.profile(record->annotator_id);
        predictions.push_back(embedhead_predict(model, encoder, *record, profile,
                                                lookup_predicted(predicted, record->annotator_id)));
        truths.push_back(record->rating);
    }
    return mae(predictions, truths);
}

void save_embedhead_checkpoint(const EmbedHeadModel& model, const std::string& path) {
    ordered_json j;
    j["format"] = "raterlens-embedhead";
    j["version"] = 1;
    j["provider"] = detail::provider_to_json(model.provider);
    j["ablation"] = detail::ablation_to_json(model.ablation);
    j["decode"] = to_string(model.decode);
    j["head"] = ordered_json::parse(net_to_json_string(model.head));
    write_file(path, j.dump());
}

EmbedHeadModel load_embedhead_checkpoint(const std::string& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad embed-head checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "raterlens-embedhead") {
        throw ParseError("not an embed-head checkpoint");
    }
    EmbedHeadModel model;
    model.provider = detail::provider_from_json(j.at("provider"));
    model.ablation = detail::ablation_from_json(j.at("ablation"));
    model.decode = decode_from_string(j.value("decode", "argmax"));
    model.head = net_from_json_string(j.at("head").dump());
    model.check_architecture();
    return model;
}

}  // namespace raterlens
