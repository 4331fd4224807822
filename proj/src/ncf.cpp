#include "raterlens/ncf.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "raterlens/errors.hpp"
#include "raterlens/harness.hpp"
#include "raterlens/util.hpp"
#include "serialize.hpp"

namespace raterlens {

using ordered_json = nlohmann::ordered_json;

AnnotatorTable AnnotatorTable::init(const std::vector<std::string>& annotator_ids, std::size_t dim,
                                    std::uint64_t seed) {
    if (dim == 0) throw ConfigError("annotator embedding dimension must be positive");
    AnnotatorTable table;
    table.embedding_dim = dim;
    table.init_seed = seed;
    double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (const auto& id : annotator_ids) {
        Rng rng(mix_seeds(seed, fnv1a64(id)));
        std::vector<double> vec(dim);
        for (double& v : vec) v = rng.normal() * scale;
        table.vectors.emplace(id, std::move(vec));
    }
    return table;
}

const std::vector<double>* AnnotatorTable::find(const std::string& annotator_id) const {
    auto it = vectors.find(annotator_id);
    return it == vectors.end() ? nullptr : &it->second;
}

std::vector<double> cold_start_vector(const AnnotatorTable& table) {
    if (table.vectors.empty()) throw LookupError("cold start on an empty annotator table");
    std::vector<double> mean(table.embedding_dim, 0.0);
    for (const auto& [_, vec] : table.vectors) {
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += vec[i];
    }
    double inv = 1.0 / static_cast<double>(table.vectors.size());
    for (double& v : mean) v *= inv;
    return mean;
}

FusionMode fusion_from_string(const std::string& name) {
    if (name == "concat" || name == "concatenate") return FusionMode::concatenate;
    if (name == "dot" || name == "dot_product") return FusionMode::dot_product;
    throw ConfigError("unknown fusion mode '" + name + "'");
}

std::string to_string(FusionMode mode) {
    return mode == FusionMode::concatenate ? "concat" : "dot";
}

std::size_t NcfModel::fused_dim() const {
    return fusion == FusionMode::concatenate ? text_dim() + table.embedding_dim : text_dim() + 1;
}

namespace {

std::vector<double> project_text(const NcfModel& model, const std::vector<double>& text) {
    // projection is embedding_dim x text_dim, row-major
    std::vector<double> out(model.table.embedding_dim, 0.0);
    for (std::size_t k = 0; k < model.table.embedding_dim; ++k) {
        const double* row = model.projection.data() + k * model.text_dim();
        double acc = 0.0;
        for (std::size_t j = 0; j < model.text_dim(); ++j) acc += row[j] * text[j];
        out[k] = acc;
    }
    return out;
}

}  // namespace

std::vector<double> NcfModel::fuse(const std::vector<double>& text_embedding,
                                   const std::vector<double>& annotator_vector) const {
    if (text_embedding.size() != text_dim()) throw ShapeError("text embedding has wrong dimension");
    if (annotator_vector.size() != table.embedding_dim) {
        throw ShapeError("annotator vector has wrong dimension");
    }
    std::vector<double> fused = text_embedding;
    if (fusion == FusionMode::concatenate) {
        fused.insert(fused.end(), annotator_vector.begin(), annotator_vector.end());
        return fused;
    }
    // dot_product: append the scalar similarity, projecting when dims differ.
    double dot = 0.0;
    if (table.embedding_dim == text_dim() && projection.empty()) {
        for (std::size_t i = 0; i < text_embedding.size(); ++i) {
            dot += text_embedding[i] * annotator_vector[i];
        }
    } else {
        if (projection.size() != table.embedding_dim * text_dim()) {
            throw ShapeError("dot fusion with differing dims requires a projection");
        }
        auto projected = project_text(*this, text_embedding);
        for (std::size_t k = 0; k < projected.size(); ++k) dot += projected[k] * annotator_vector[k];
    }
    fused.push_back(dot);
    return fused;
}

namespace {

std::string ncf_text_input(const NcfModel& model, const RatingRecord& record,
                           const AnnotatorProfile* profile, const Demographics* predicted) {
    if (model.text_ablation == AblationSpec::text_only()) return record.text;
    if (!profile) {
        throw ConfigError("text ablation '" + model.text_ablation.to_csv() +
                          "' needs the annotator profile");
    }
    return render_context(record, *profile, model.text_ablation, predicted).joined;
}

const Demographics* lookup_predicted(const PredictedDemographicsMap* predicted,
                                     const std::string& annotator_id) {
    if (!predicted) return nullptr;
    auto it = predicted->find(annotator_id);
    return it == predicted->end() ? nullptr : &it->second;
}

struct NcfOptimizerState {
    std::vector<AdamState> head_weights;
    std::vector<AdamState> head_bias;
    std::map<std::string, AdamState> annotators;
    AdamState projection;
};

// One mini-batch update. Head, batch annotators, and the projection all move;
// nothing else does.
double ncf_batch_step(NcfModel& model, const std::vector<const RatingRecord*>& records,
                      const std::vector<const std::vector<double>*>& text_embeddings,
                      const TrainConfig& cfg, NcfOptimizerState& state) {
    Batch batch;
    batch.inputs.reserve(records.size());
    batch.labels.reserve(records.size());
    std::vector<const std::vector<double>*> annotator_vecs(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto* vec = model.table.find(records[i]->annotator_id);
        if (!vec) throw LookupError("annotator '" + records[i]->annotator_id + "' missing from table");
        annotator_vecs[i] = vec;
        batch.inputs.push_back(model.fuse(*text_embeddings[i], *vec));
        batch.labels.push_back(records[i]->rating);
    }

    Gradients grads;
    double loss = loss_and_grad(model.head, batch, grads);

    const std::size_t text_dim = model.text_dim();
    const bool projected = !model.projection.empty();
    std::map<std::string, std::vector<double>> annotator_grads;
    std::vector<double> projection_grad;
    if (projected) projection_grad.assign(model.projection.size(), 0.0);

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& input_grad = grads.input_grads[i];
        auto& agrad = annotator_grads
                          .try_emplace(records[i]->annotator_id,
                                       std::vector<double>(model.table.embedding_dim, 0.0))
                          .first->second;
        if (model.fusion == FusionMode::concatenate) {
            for (std::size_t k = 0; k < model.table.embedding_dim; ++k) {
                agrad[k] += input_grad[text_dim + k];
            }
        } else {
            double g_dot = input_grad[text_dim];
            const auto& text = *text_embeddings[i];
            const auto& avec = *annotator_vecs[i];
            if (!projected) {
                for (std::size_t k = 0; k < model.table.embedding_dim; ++k) {
                    agrad[k] += g_dot * text[k];
                }
            } else {
                auto projected_text = project_text(model, text);
                for (std::size_t k = 0; k < model.table.embedding_dim; ++k) {
                    agrad[k] += g_dot * projected_text[k];
                    double coeff = g_dot * avec[k];
                    double* prow = projection_grad.data() + k * text_dim;
                    for (std::size_t j = 0; j < text_dim; ++j) prow[j] += coeff * text[j];
                }
            }
        }
    }

    for (std::size_t l = 0; l < model.head.layers.size(); ++l) {
        optimizer_step(model.head.layers[l].weights, grads.weight_grads[l], state.head_weights[l],
                       cfg, /*apply_decay=*/true);
        optimizer_step(model.head.layers[l].bias, grads.bias_grads[l], state.head_bias[l], cfg,
                       /*apply_decay=*/false);
    }
    for (auto& [id, agrad] : annotator_grads) {
        optimizer_step(model.table.vectors.at(id), agrad, state.annotators[id], cfg,
                       /*apply_decay=*/false);
    }
    if (projected) {
        optimizer_step(model.projection, projection_grad, state.projection, cfg,
                       /*apply_decay=*/true);
    }
    return loss;
}

}  // namespace

NcfModel ncf_train(const Corpus& corpus, Encoder& encoder, const TrainConfig& cfg,
                   const NcfTrainOptions& options, const PredictedDemographicsMap* predicted) {
    auto train_records = corpus.records_in(Split::train);
    if (train_records.empty()) throw TrainingError("corpus has no train records");

    NcfModel model;
    model.text_provider = encoder.spec();
    model.fusion = options.fusion;
    model.text_ablation = options.text_ablation;
    model.cold_start_enabled = options.cold_start_enabled;

    std::set<std::string> annotator_set;
    for (const auto* record : train_records) annotator_set.insert(record->annotator_id);
    std::vector<std::string> annotator_ids(annotator_set.begin(), annotator_set.end());
    model.table = AnnotatorTable::init(annotator_ids, options.embedding_dim, cfg.seed);

    if (model.fusion == FusionMode::dot_product &&
        model.table.embedding_dim != model.text_dim()) {
        Rng rng(mix_seeds(cfg.seed, fnv1a64("raterlens-ncf-projection")));
        double bound = 1.0 / std::sqrt(static_cast<double>(model.text_dim()));
        model.projection.resize(model.table.embedding_dim * model.text_dim());
        for (double& w : model.projection) w = rng.uniform(-bound, bound);
    }

    std::vector<std::size_t> head_dims = {model.fused_dim()};
    head_dims.insert(head_dims.end(), options.hidden_dims.begin(), options.hidden_dims.end());
    head_dims.push_back(kRatingClasses);
    model.head = DenseNet::make(head_dims, mix_seeds(cfg.seed, fnv1a64("raterlens-ncf-head")));

    // Frozen text inputs, fetched once up front through the cache.
    std::vector<std::string> inputs;
    inputs.reserve(train_records.size());
    for (const auto* record : train_records) {
        inputs.push_back(ncf_text_input(model, *record, &corpus.profile(record->annotator_id),
                                        lookup_predicted(predicted, record->annotator_id)));
    }
    auto embedded = encoder.embed_batch(inputs);
    std::vector<std::vector<double>> text_embeddings;
    text_embeddings.reserve(embedded.size());
    for (auto& e : embedded) text_embeddings.push_back(std::move(e.values));

    NcfOptimizerState state;
    state.head_weights.resize(model.head.layers.size());
    state.head_bias.resize(model.head.layers.size());

    std::vector<std::size_t> order(train_records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seeds(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const RatingRecord*> records;
            std::vector<const std::vector<double>*> embeddings;
            for (std::size_t i = start; i < stop; ++i) {
                records.push_back(train_records[order[i]]);
                embeddings.push_back(&text_embeddings[order[i]]);
            }
            double loss = ncf_batch_step(model, records, embeddings, cfg, state);
            if (!std::isfinite(loss)) {
                throw TrainingError("NCF training diverged at epoch " + std::to_string(epoch));
            }
        }
    }
    return model;
}

void ncf_train_step(NcfModel& model, Encoder& encoder, const Corpus& corpus,
                    const RatingRecord& record, const TrainConfig& cfg) {
    NcfOptimizerState state;
    state.head_weights.resize(model.head.layers.size());
    state.head_bias.resize(model.head.layers.size());
    std::string input = ncf_text_input(model, record, &corpus.profile(record.annotator_id), nullptr);
    auto embedding = encoder.embed(input);
    std::vector<const RatingRecord*> records = {&record};
    std::vector<const std::vector<double>*> embeddings = {&embedding.values};
    ncf_batch_step(model, records, embeddings, cfg, state);
}

int ncf_predict(const NcfModel& model, Encoder& encoder, const RatingRecord& record,
                const AnnotatorProfile* profile, const Demographics* predicted) {
    const std::vector<double>* annotator_vec = model.table.find(record.annotator_id);
    std::vector<double> cold;
    if (!annotator_vec) {
        if (!model.cold_start_enabled) {
            throw LookupError("annotator '" + record.annotator_id +
                              "' not in table and cold start is disabled");
        }
        cold = cold_start_vector(model.table);
        annotator_vec = &cold;
    }
    auto embedding = encoder.embed(ncf_text_input(model, record, profile, predicted));
    auto logits = forward(model.head, model.fuse(embedding.values, *annotator_vec));
    return decode_rating(logits, model.decode);
}

double ncf_split_mae(const NcfModel& model, Encoder& encoder, const Corpus& corpus, Split split,
                     const PredictedDemographicsMap* predicted) {
    std::vector<int> predictions;
    std::vector<int> truths;
    for (const auto* record : corpus.records_in(split)) {
        const auto& profile = corpus.profile(record->annotator_id);
        predictions.push_back(ncf_predict(model, encoder, *record, &profile,
                                          lookup_predicted(predicted, record->annotator_id)));
        truths.push_back(record->rating);
    }
    return mae(predictions, truths);
}

void save_ncf_checkpoint(const NcfModel& model, const std::string& path) {
    ordered_json j;
    j["format"] = "raterlens-ncf";
    j["version"] = 1;
    j["fusion"] = to_string(model.fusion);
    j["cold_start_enabled"] = model.cold_start_enabled;
    j["decode"] = to_string(model.decode);
    j["text_ablation"] = detail::ablation_to_json(model.text_ablation);
    j["provider"] = detail::provider_to_json(model.text_provider);
    ordered_json table;
    table["embedding_dim"] = model.table.embedding_dim;
    table["init_seed"] = model.table.init_seed;
    ordered_json vectors;
    for (const auto& [id, vec] : model.table.vectors) vectors[id] = vec;
    table["vectors"] = std::move(vectors);
    j["table"] = std::move(table);
    j["projection"] = model.projection;
    j["head"] = ordered_json::parse(net_to_json_string(model.head));
    write_file(path, j.dump());
}

NcfModel load_ncf_checkpoint(const std::string& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad NCF checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "raterlens-ncf") throw ParseError("not an NCF checkpoint");
    NcfModel model;
    model.fusion = fusion_from_string(j.at("fusion").get<std::string>());
    model.cold_start_enabled = j.value("cold_start_enabled", true);
    model.decode = decode_from_string(j.value("decode", "argmax"));
    model.text_ablation = detail::ablation_from_json(j.at("text_ablation"));
    model.text_provider = detail::provider_from_json(j.at("provider"));
    const auto& table = j.at("table");
    model.table.embedding_dim = table.at("embedding_dim").get<std::size_t>();
    model.table.init_seed = table.at("init_seed").get<std::uint64_t>();
    for (const auto& [id, vec] : table.at("vectors").items()) {
        model.table.vectors[id] = vec.get<std::vector<double>>();
    }
    model.projection = j.value("projection", std::vector<double>{});
    model.head = net_from_json_string(j.at("head").dump());
    return model;
}

}  // namespace raterlens
