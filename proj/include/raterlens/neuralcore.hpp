#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace raterlens {

inline constexpr std::size_t kRatingClasses = 5;

enum class Activation { relu, identity };

struct Layer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;  // row-major, [out][in]
    std::vector<double> bias;
    Activation activation = Activation::relu;
};

struct DenseNet {
    std::vector<Layer> layers;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;
    void check_chain() const;  // adjacent layer dims must agree
    bool all_finite() const;

    // relu on hidden layers, identity on the last; fan-in scaled uniform
    // weights, zero biases.
    static DenseNet make(const std::vector<std::size_t>& dims, std::uint64_t seed);
};

std::vector<double> forward(const DenseNet& net, std::span<const double> input);

std::vector<double> softmax(std::span<const double> logits);

struct Batch {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;  // 0..4

    std::size_t size() const { return inputs.size(); }
};

struct Gradients {
    std::vector<std::vector<double>> weight_grads;  // per layer, row-major
    std::vector<std::vector<double>> bias_grads;
    std::vector<std::vector<double>> input_grads;   // per batch element

    static Gradients zeros_like(const DenseNet& net, std::size_t batch_size);
};

// Mean softmax cross-entropy over the batch plus backprop gradients for every
// parameter and for each input vector.
double loss_and_grad(const DenseNet& net, const Batch& batch, Gradients& out);

double loss_only(const DenseNet& net, const Batch& batch);

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 0;
    int batch_size = 8;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double l2 = 0.0;  // decoupled weight decay on weights (biases exempt)
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
};

// Adam moments for an arbitrary flat parameter block.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    void ensure_size(std::size_t n);
};

// In-place parameter update for one flat block. For SGD the state argument is
// still threaded through so callers keep one code path.
void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    const TrainConfig& cfg, bool apply_decay);

struct TrainResult {
    std::vector<double> epoch_loss;
};

// Returning false from the callback stops training after that epoch.
using EpochCallback = std::function<bool(int epoch, double mean_loss)>;

TrainResult train(DenseNet& net, const Batch& data, const TrainConfig& cfg,
                  const EpochCallback& callback = {});

enum class DecodeMode { argmax, expected_value };

DecodeMode decode_from_string(const std::string& name);
std::string to_string(DecodeMode mode);

// argmax with ties broken toward the lower rating, or round(sum i * p_i).
int decode_rating(std::span<const double> logits, DecodeMode mode = DecodeMode::argmax);

struct GradCheckReport {
    std::size_t coordinates_checked = 0;
    double max_relative_error = 0.0;
    bool passed = false;
};

// Central finite differences against backprop. coords_per_tensor == 0 checks
// every coordinate; a positive value spot-checks that many per weight/bias
// block (seeded), which is how the wide production shapes stay tractable.
GradCheckReport gradient_check(const DenseNet& net, const Batch& batch, double epsilon = 1e-4,
                               double tolerance = 1e-4, std::size_t coords_per_tensor = 0,
                               std::uint64_t sample_seed = 0);

void save_net_json(const DenseNet& net, const std::string& path);
DenseNet load_net_json(const std::string& path);

// nlohmann-compatible helpers used by the model checkpoint formats.
std::string net_to_json_string(const DenseNet& net);
DenseNet net_from_json_string(const std::string& text);

}  // namespace raterlens
