#pragma once

#include <map>
#include <string>
#include <vector>

#include "raterlens/contexting.hpp"
#include "raterlens/corpus.hpp"
#include "raterlens/encoder.hpp"
#include "raterlens/neuralcore.hpp"

namespace raterlens {

// Fixed classifier tail: provider_dim -> 1024 -> 1024 -> 1024 -> 5.
inline constexpr std::size_t kEmbedHeadHidden = 1024;

struct EmbedHeadModel {
    ProviderSpec provider;
    AblationSpec ablation;
    DenseNet head;
    DecodeMode decode = DecodeMode::argmax;

    // exactly 4 dense layers ending in width 5, first input = provider dim
    void check_architecture() const;
};

struct EmbedHeadTrainResult {
    EmbedHeadModel model;
    std::vector<double> epoch_loss;
    std::vector<double> dev_mae;  // one entry per epoch when a dev split exists
};

struct EmbedHeadTrainOptions {
    bool log_dev_mae = true;
    // stop early once train loss drops below this (0 disables)
    double stop_below_loss = 0.0;
};

using PredictedDemographics = std::map<std::string, Demographics>;

// Trains on the train split only; contexts are rendered per the ablation and
// embedded through the encoder cache.
EmbedHeadTrainResult embedhead_train(const Corpus& corpus, Encoder& encoder,
                                     const AblationSpec& ablation, const TrainConfig& cfg,
                                     const PredictedDemographics* predicted = nullptr,
                                     const EmbedHeadTrainOptions& options = {});

int embedhead_predict(const EmbedHeadModel& model, Encoder& encoder, const RatingRecord& record,
                      const AnnotatorProfile& profile, const Demographics* predicted = nullptr);

double embedhead_split_mae(const EmbedHeadModel& model, Encoder& encoder, const Corpus& corpus,
                           Split split, const PredictedDemographics* predicted = nullptr);

void save_embedhead_checkpoint(const EmbedHeadModel& model, const std::string& path);
EmbedHeadModel load_embedhead_checkpoint(const std::string& path);

}  // namespace raterlens
