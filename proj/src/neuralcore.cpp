#include "raterlens/neuralcore.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"

namespace raterlens {

using ordered_json = nlohmann::ordered_json;

std::size_t DenseNet::input_dim() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    return layers.front().in_dim;
}

std::size_t DenseNet::output_dim() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    return layers.back().out_dim;
}

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
    return n;
}

void DenseNet::check_chain() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        if (layer.weights.size() != layer.in_dim * layer.out_dim ||
            layer.bias.size() != layer.out_dim) {
            throw ShapeError("layer " + std::to_string(i) + " parameter sizes disagree with dims");
        }
        if (i > 0 && layers[i - 1].out_dim != layer.in_dim) {
            throw ShapeError("layer " + std::to_string(i) + " input dim " +
                             std::to_string(layer.in_dim) + " does not chain from previous out dim " +
                             std::to_string(layers[i - 1].out_dim));
        }
    }
}

bool DenseNet::all_finite() const {
    for (const auto& layer : layers) {
        for (double w : layer.weights) {
            if (!std::isfinite(w)) return false;
        }
        for (double b : layer.bias) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

DenseNet DenseNet::make(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ShapeError("network needs at least input and output dims");
    DenseNet net;
    Rng rng(mix_seeds(seed, fnv1a64("raterlens-net-init")));
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer layer;
        layer.in_dim = dims[i];
        layer.out_dim = dims[i + 1];
        layer.activation = (i + 2 == dims.size()) ? Activation::identity : Activation::relu;
        double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
        layer.weights.resize(layer.in_dim * layer.out_dim);
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        layer.bias.assign(layer.out_dim, 0.0);
        net.layers.push_back(std::move(layer));
    }
    net.check_chain();
    return net;
}

namespace {

void affine(const Layer& layer, std::span<const double> x, std::vector<double>& z) {
    z.assign(layer.out_dim, 0.0);
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
        const double* row = layer.weights.data() + o * layer.in_dim;
        double acc = layer.bias[o];
        for (std::size_t i = 0; i < layer.in_dim; ++i) acc += row[i] * x[i];
        z[o] = acc;
    }
}

void apply_activation(Activation act, std::vector<double>& z) {
    if (act == Activation::relu) {
        for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
}

}  // namespace

std::vector<double> forward(const DenseNet& net, std::span<const double> input) {
    net.check_chain();
    if (input.size() != net.input_dim()) {
        throw ShapeError("forward: input size " + std::to_string(input.size()) +
                         " does not match network input dim " + std::to_string(net.input_dim()));
    }
    std::vector<double> current(input.begin(), input.end());
    std::vector<double> z;
    for (const auto& layer : net.layers) {
        affine(layer, current, z);
        apply_activation(layer.activation, z);
        current = z;
    }
    return current;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ShapeError("softmax of empty vector");
    double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

Gradients Gradients::zeros_like(const DenseNet& net, std::size_t batch_size) {
    Gradients g;
    g.weight_grads.reserve(net.layers.size());
    g.bias_grads.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        g.weight_grads.emplace_back(layer.weights.size(), 0.0);
        g.bias_grads.emplace_back(layer.bias.size(), 0.0);
    }
    g.input_grads.assign(batch_size, std::vector<double>(net.input_dim(), 0.0));
    return g;
}

double loss_and_grad(const DenseNet& net, const Batch& batch, Gradients& out) {
    net.check_chain();
    if (batch.size() == 0) throw TrainingError("loss_and_grad on an empty batch");
    if (batch.labels.size() != batch.inputs.size()) {
        throw ShapeError("batch inputs and labels differ in length");
    }

    out = Gradients::zeros_like(net, batch.size());
    const std::size_t n_layers = net.layers.size();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double total_loss = 0.0;

    std::vector<std::vector<double>> pre(n_layers), post(n_layers);

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& x = batch.inputs[b];
        int label = batch.labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= net.output_dim()) {
            throw ValidationError("label " + std::to_string(label) + " outside the class range");
        }
        if (x.size() != net.input_dim()) {
            throw ShapeError("batch element " + std::to_string(b) + " has wrong input size");
        }

        // Forward with cached pre/post activations.
        for (std::size_t l = 0; l < n_layers; ++l) {
            std::span<const double> in =
                (l == 0) ? std::span<const double>(x) : std::span<const double>(post[l - 1]);
            affine(net.layers[l], in, pre[l]);
            for (double v : pre[l]) {
                if (!std::isfinite(v)) {
                    throw NumericError("non-finite activation at layer " + std::to_string(l));
                }
            }
            post[l] = pre[l];
            apply_activation(net.layers[l].activation, post[l]);
        }

        std::vector<double> probs = softmax(post[n_layers - 1]);
        double p = std::max(probs[static_cast<std::size_t>(label)], 1e-300);
        total_loss += -std::log(p);

        // delta starts as dL/dlogits for the mean loss.
        std::vector<double> delta = probs;
        delta[static_cast<std::size_t>(label)] -= 1.0;
        for (double& d : delta) d *= inv_batch;

        for (std::size_t li = n_layers; li-- > 0;) {
            const Layer& layer = net.layers[li];
            if (layer.activation == Activation::relu) {
                for (std::size_t o = 0; o < layer.out_dim; ++o) {
                    if (pre[li][o] <= 0.0) delta[o] = 0.0;
                }
            }
            std::span<const double> layer_in =
                (li == 0) ? std::span<const double>(x) : std::span<const double>(post[li - 1]);
            auto& wg = out.weight_grads[li];
            auto& bg = out.bias_grads[li];
            for (std::size_t o = 0; o < layer.out_dim; ++o) {
                double d = delta[o];
                if (d == 0.0) continue;
                double* wrow = wg.data() + o * layer.in_dim;
                for (std::size_t i = 0; i < layer.in_dim; ++i) wrow[i] += d * layer_in[i];
                bg[o] += d;
            }
            // Propagate to the layer input.
            std::vector<double> prev_delta(layer.in_dim, 0.0);
            for (std::size_t o = 0; o < layer.out_dim; ++o) {
                double d = delta[o];
                if (d == 0.0) continue;
                const double* wrow = layer.weights.data() + o * layer.in_dim;
                for (std::size_t i = 0; i < layer.in_dim; ++i) prev_delta[i] += d * wrow[i];
            }
            if (li == 0) {
                out.input_grads[b] = std::move(prev_delta);
            } else {
                delta = std::move(prev_delta);
            }
        }
    }
    return total_loss * inv_batch;
}

double loss_only(const DenseNet& net, const Batch& batch) {
    if (batch.size() == 0) throw TrainingError("loss of an empty batch");
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto logits = forward(net, batch.inputs[b]);
        auto probs = softmax(logits);
        double p = std::max(probs[static_cast<std::size_t>(batch.labels[b])], 1e-300);
        total += -std::log(p);
    }
    return total / static_cast<double>(batch.size());
}

void AdamState::ensure_size(std::size_t n) {
    if (m.size() != n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }
}

void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    const TrainConfig& cfg, bool apply_decay) {
    if (params.size() != grads.size()) throw ShapeError("optimizer_step size mismatch");
    if (cfg.optimizer == OptimizerKind::adam) {
        state.ensure_size(params.size());
        state.t += 1;
        double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
        double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            double g = grads[i];
            state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * g;
            state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * g * g;
            double m_hat = state.m[i] / bc1;
            double v_hat = state.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
        }
    } else {
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] -= cfg.learning_rate * grads[i];
        }
    }
    if (apply_decay && cfg.l2 > 0.0) {
        double shrink = 1.0 - cfg.learning_rate * cfg.l2;
        if (shrink < 0.0) shrink = 0.0;
        for (double& p : params) p *= shrink;
    }
}

TrainResult train(DenseNet& net, const Batch& data, const TrainConfig& cfg,
                  const EpochCallback& callback) {
    net.check_chain();
    if (data.size() == 0) throw TrainingError("training data is empty");
    if (cfg.learning_rate < 0.0) throw ConfigError("learning rate must be nonnegative");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");

    std::vector<AdamState> weight_states(net.layers.size());
    std::vector<AdamState> bias_states(net.layers.size());

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    Gradients grads;
    Batch minibatch;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seeds(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            minibatch.inputs.clear();
            minibatch.labels.clear();
            for (std::size_t i = start; i < stop; ++i) {
                minibatch.inputs.push_back(data.inputs[order[i]]);
                minibatch.labels.push_back(data.labels[order[i]]);
            }
            double loss = loss_and_grad(net, minibatch, grads);
            if (!std::isfinite(loss)) {
                throw TrainingError("training diverged at epoch " + std::to_string(epoch));
            }
            epoch_loss += loss;
            ++n_batches;
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                optimizer_step(net.layers[l].weights, grads.weight_grads[l], weight_states[l], cfg,
                               /*apply_decay=*/true);
                optimizer_step(net.layers[l].bias, grads.bias_grads[l], bias_states[l], cfg,
                               /*apply_decay=*/false);
            }
        }
        if (!net.all_finite()) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch));
        }
        double mean_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(1, n_batches));
        result.epoch_loss.push_back(mean_loss);
        if (callback && !callback(epoch, mean_loss)) break;
    }
    return result;
}

DecodeMode decode_from_string(const std::string& name) {
    if (name == "argmax") return DecodeMode::argmax;
    if (name == "expected_value" || name == "ev") return DecodeMode::expected_value;
    throw ConfigError("unknown decode mode '" + name + "'");
}

std::string to_string(DecodeMode mode) {
    return mode == DecodeMode::argmax ? "argmax" : "expected_value";
}

int decode_rating(std::span<const double> logits, DecodeMode mode) {
    if (logits.size() != kRatingClasses) {
        throw ShapeError("decode_rating expects " + std::to_string(kRatingClasses) + " logits");
    }
    if (mode == DecodeMode::argmax) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;  // ties keep the lower rating
        }
        return static_cast<int>(best);
    }
    auto probs = softmax(logits);
    double expectation = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        expectation += static_cast<double>(i) * probs[i];
    }
    long rounded = std::lround(expectation);
    return static_cast<int>(std::clamp<long>(rounded, 0, static_cast<long>(kRatingClasses) - 1));
}

GradCheckReport gradient_check(const DenseNet& net, const Batch& batch, double epsilon,
                               double tolerance, std::size_t coords_per_tensor,
                               std::uint64_t sample_seed) {
    Gradients analytic;
    loss_and_grad(net, batch, analytic);

    DenseNet probe = net;
    GradCheckReport report;
    report.passed = true;
    Rng rng(mix_seeds(sample_seed, fnv1a64("raterlens-gradcheck")));

    auto check_block = [&](std::vector<double>& params, const std::vector<double>& grads) {
        std::vector<std::size_t> coords;
        if (coords_per_tensor == 0 || coords_per_tensor >= params.size()) {
            coords.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) coords[i] = i;
        } else {
            for (std::size_t k = 0; k < coords_per_tensor; ++k) {
                coords.push_back(rng.uniform_index(params.size()));
            }
        }
        for (std::size_t idx : coords) {
            double saved = params[idx];
            params[idx] = saved + epsilon;
            double loss_plus = loss_only(probe, batch);
            params[idx] = saved - epsilon;
            double loss_minus = loss_only(probe, batch);
            params[idx] = saved;
            double fd = (loss_plus - loss_minus) / (2.0 * epsilon);
            double an = grads[idx];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            double rel = std::abs(fd - an) / denom;
            report.coordinates_checked += 1;
            report.max_relative_error = std::max(report.max_relative_error, rel);
            if (rel >= tolerance) report.passed = false;
        }
    };

    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        check_block(probe.layers[l].weights, analytic.weight_grads[l]);
        check_block(probe.layers[l].bias, analytic.bias_grads[l]);
    }
    return report;
}

namespace {

ordered_json net_to_json(const DenseNet& net) {
    ordered_json j;
    j["format"] = "raterlens-net";
    j["version"] = 1;
    ordered_json layers = ordered_json::array();
    for (const auto& layer : net.layers) {
        ordered_json lj;
        lj["in_dim"] = layer.in_dim;
        lj["out_dim"] = layer.out_dim;
        lj["activation"] = layer.activation == Activation::relu ? "relu" : "identity";
        lj["weights"] = layer.weights;
        lj["bias"] = layer.bias;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j;
}

DenseNet net_from_json(const ordered_json& j) {
    if (j.value("format", "") != "raterlens-net") {
        throw ParseError("not a raterlens-net checkpoint");
    }
    DenseNet net;
    for (const auto& lj : j.at("layers")) {
        Layer layer;
        layer.in_dim = lj.at("in_dim").get<std::size_t>();
        layer.out_dim = lj.at("out_dim").get<std::size_t>();
        std::string act = lj.at("activation").get<std::string>();
        if (act == "relu") layer.activation = Activation::relu;
        else if (act == "identity") layer.activation = Activation::identity;
        else throw ParseError("unknown activation '" + act + "'");
        layer.weights = lj.at("weights").get<std::vector<double>>();
        layer.bias = lj.at("bias").get<std::vector<double>>();
        net.layers.push_back(std::move(layer));
    }
    net.check_chain();
    return net;
}

}  // namespace

std::string net_to_json_string(const DenseNet& net) { return net_to_json(net).dump(); }

DenseNet net_from_json_string(const std::string& text) {
    try {
        return net_from_json(ordered_json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad network checkpoint: ") + e.what());
    }
}

void save_net_json(const DenseNet& net, const std::string& path) {
    write_file(path, net_to_json_string(net));
}

DenseNet load_net_json(const std::string& path) {
    return net_from_json_string(read_file(path));
}

}  // namespace raterlens
