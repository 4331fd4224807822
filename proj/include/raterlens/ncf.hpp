#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "raterlens/contexting.hpp"
#include "raterlens/corpus.hpp"
#include "raterlens/encoder.hpp"
#include "raterlens/neuralcore.hpp"

namespace raterlens {

// Supported embedding-dimension presets; any positive dimension is accepted.
inline constexpr std::size_t kAnnotatorDimSmall = 8;
inline constexpr std::size_t kAnnotatorDimMedium = 512;
inline constexpr std::size_t kAnnotatorDimDefault = 768;

struct AnnotatorTable {
    std::size_t embedding_dim = kAnnotatorDimDefault;
    std::uint64_t init_seed = 0;
    std::map<std::string, std::vector<double>> vectors;

    // Seeded standard normal scaled by 1/sqrt(dim), derived per annotator id
    // so insertion order never matters.
    static AnnotatorTable init(const std::vector<std::string>& annotator_ids, std::size_t dim,
                               std::uint64_t seed);

    const std::vector<double>* find(const std::string& annotator_id) const;
};

// Element-wise mean of all stored vectors; the cold-start representation for
// annotators missing from the table.
std::vector<double> cold_start_vector(const AnnotatorTable& table);

enum class FusionMode { concatenate, dot_product };

FusionMode fusion_from_string(const std::string& name);
std::string to_string(FusionMode mode);

struct NcfModel {
    AnnotatorTable table;
    FusionMode fusion = FusionMode::concatenate;
    // dot_product with text_dim != embedding_dim routes the text through this
    // learned map (embedding_dim x text_dim, row-major) before the dot.
    std::vector<double> projection;
    DenseNet head;
    ProviderSpec text_provider;
    AblationSpec text_ablation;  // context rendered into the text input
    bool cold_start_enabled = true;
    DecodeMode decode = DecodeMode::argmax;

    std::size_t text_dim() const { return text_provider.dimension; }
    // concatenate: text_dim + embedding_dim; dot_product: text_dim + 1.
    std::size_t fused_dim() const;
    std::vector<double> fuse(const std::vector<double>& text_embedding,
                             const std::vector<double>& annotator_vector) const;
};

struct NcfTrainOptions {
    std::size_t embedding_dim = kAnnotatorDimDefault;
    FusionMode fusion = FusionMode::concatenate;
    AblationSpec text_ablation = AblationSpec::text_only();
    std::vector<std::size_t> hidden_dims = {256, 256, 64};  // head ends in 5
    bool cold_start_enabled = true;
};

using PredictedDemographicsMap = std::map<std::string, Demographics>;

// Trains annotator vectors, head, and (for projected dot fusion) the
// projection. Provider embeddings are read through the encoder cache and
// never modified.
NcfModel ncf_train(const Corpus& corpus, Encoder& encoder, const TrainConfig& cfg,
                   const NcfTrainOptions& options = {},
                   const PredictedDemographicsMap* predicted = nullptr);

// One optimizer step on a single record against an existing model; exposed so
// update locality is observable.
void ncf_train_step(NcfModel& model, Encoder& encoder, const Corpus& corpus,
                    const RatingRecord& record, const TrainConfig& cfg);

int ncf_predict(const NcfModel& model, Encoder& encoder, const RatingRecord& record,
                const AnnotatorProfile* profile = nullptr,
                const Demographics* predicted = nullptr);

double ncf_split_mae(const NcfModel& model, Encoder& encoder, const Corpus& corpus, Split split,
                     const PredictedDemographicsMap* predicted = nullptr);

void save_ncf_checkpoint(const NcfModel& model, const std::string& path);
NcfModel load_ncf_checkpoint(const std::string& path);

}  // namespace raterlens
