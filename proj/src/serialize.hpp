#pragma once

// Internal JSON helpers shared by checkpoint writers, the harness config
// reader, and the CLI. Not part of the public headers.

#include <json.hpp>

#include "raterlens/contexting.hpp"
#include "raterlens/encoder.hpp"
#include "raterlens/errors.hpp"
#include "raterlens/neuralcore.hpp"

namespace raterlens::detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json provider_to_json(const ProviderSpec& spec) {
    ordered_json j;
    j["provider_id"] = spec.provider_id;
    j["model_id"] = spec.model_id;
    j["dimension"] = spec.dimension;
    if (!spec.endpoint.empty()) j["endpoint"] = spec.endpoint;
    if (spec.provider_id == "mock") j["seed"] = spec.seed;
    return j;
}

inline ProviderSpec provider_from_json(const ordered_json& j) {
    ProviderSpec spec;
    spec.provider_id = j.at("provider_id").get<std::string>();
    spec.model_id = j.at("model_id").get<std::string>();
    spec.dimension = j.at("dimension").get<std::size_t>();
    spec.endpoint = j.value("endpoint", std::string());
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.validate();
    return spec;
}

inline ordered_json ablation_to_json(const AblationSpec& spec) {
    return ordered_json(spec.to_csv());
}

inline AblationSpec ablation_from_json(const ordered_json& j) {
    return AblationSpec::parse(j.get<std::string>());
}

inline ordered_json train_config_to_json(const TrainConfig& cfg) {
    ordered_json j;
    j["learning_rate"] = cfg.learning_rate;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["optimizer"] = cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd";
    j["l2"] = cfg.l2;
    return j;
}

inline TrainConfig train_config_from_json(const ordered_json& j) {
    TrainConfig cfg;
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.l2 = j.value("l2", cfg.l2);
    std::string opt = j.value("optimizer", std::string("adam"));
    if (opt == "adam") cfg.optimizer = OptimizerKind::adam;
    else if (opt == "sgd") cfg.optimizer = OptimizerKind::sgd;
    else throw ConfigError("unknown optimizer '" + opt + "'");
    if (cfg.learning_rate < 0.0) throw ConfigError("learning rate must be nonnegative");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
    return cfg;
}

}  // namespace raterlens::detail
