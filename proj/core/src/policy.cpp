#include "qpole/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "qpole/errors.hpp"
#include "qpole/rng.hpp"

namespace qpole {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

} // namespace

int PolicyConfig::input_weight_rows() const {
    if (!data_reuploading || !input_weights_per_layer) {
        return 1;
    }
    return n_layers;
}

int PolicyConfig::encoding_layers() const {
    return data_reuploading ? n_layers : 1;
}

void PolicyConfig::validate() const {
    // The full policy uses one qubit per feature; reduced configurations
    // (useful for analytic cross-checks) encode only the leading features.
    if (n_qubits < 1 || n_qubits > FeatureVector::kDim) {
        throw ConfigError("policy qubit count must lie in [1, 8]");
    }
    if (n_layers < 1) {
        throw ConfigError("policy needs at least one layer");
    }
    if (observable_qubits.empty()) {
        throw ConfigError("policy needs at least one observable qubit");
    }
    for (int q : observable_qubits) {
        if (q < 0 || q >= n_qubits) {
            throw ConfigError("observable qubit out of range");
        }
    }
    if (action_clip < 0.0) {
        throw ConfigError("action_clip must be >= 0");
    }
}

std::vector<double> PolicyParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    flat.insert(flat.end(), input_weights.begin(), input_weights.end());
    flat.insert(flat.end(), variational.begin(), variational.end());
    flat.push_back(output_weight);
    return flat;
}

void PolicyParams::unflatten(std::span<const double> flat) {
    if (flat.size() != param_count()) {
        throw ConfigError("parameter vector length mismatch");
    }
    std::copy_n(flat.begin(), input_weights.size(), input_weights.begin());
    std::copy_n(flat.begin() + input_weights.size(), variational.size(),
                variational.begin());
    output_weight = flat.back();
}

bool PolicyParams::all_finite() const {
    auto finite = [](const std::vector<double> &v) {
        return std::all_of(v.begin(), v.end(),
                           [](double x) { return std::isfinite(x); });
    };
    return finite(input_weights) && finite(variational) &&
           std::isfinite(output_weight);
}

PolicyGradient PolicyGradient::zeros_like(const PolicyParams &params) {
    PolicyGradient g;
    g.input_weights.assign(params.input_weights.size(), 0.0);
    g.variational.assign(params.variational.size(), 0.0);
    g.output_weight = 0.0;
    return g;
}

std::vector<double> PolicyGradient::flatten() const {
    std::vector<double> flat;
    flat.reserve(input_weights.size() + variational.size() + 1);
    flat.insert(flat.end(), input_weights.begin(), input_weights.end());
    flat.insert(flat.end(), variational.begin(), variational.end());
    flat.push_back(output_weight);
    return flat;
}

PolicyParams init_policy(const PolicyConfig &config, std::uint64_t seed) {
    config.validate();
    PolicyParams params;
    params.input_weights.assign(
        static_cast<std::size_t>(config.input_weight_rows()) * config.n_qubits,
        1.0);
    params.variational.resize(static_cast<std::size_t>(config.n_layers) *
                              config.n_qubits * 3);
    Rng rng = Rng::derive(seed, /*stream_id=*/0x706f6c69); // "poli"
    for (auto &angle : params.variational) {
        angle = rng.uniform(0.0, kTwoPi);
    }
    params.output_weight = 1.0;
    params.input_weights_trainable = config.trainable_input_weights;
    params.output_weight_trainable = config.trainable_output_weight;
    return params;
}

Circuit build_circuit(const PolicyConfig &config, const FeatureVector &features,
                      const PolicyParams &params) {
    config.validate();
    if (!features.all_finite()) {
        throw NumericError("non-finite feature vector");
    }
    const std::size_t expected_iw =
        static_cast<std::size_t>(config.input_weight_rows()) * config.n_qubits;
    const std::size_t expected_var =
        static_cast<std::size_t>(config.n_layers) * config.n_qubits * 3;
    if (params.input_weights.size() != expected_iw ||
        params.variational.size() != expected_var) {
        throw ConfigError("parameter shapes do not match policy config");
    }

    const int n = config.n_qubits;
    const auto x = features.to_array();
    const int variational_base = static_cast<int>(params.input_weights.size());

    Circuit circuit;
    circuit.n_qubits = n;
    circuit.n_params = static_cast<int>(params.circuit_param_count());
    circuit.observable = config.observable_qubits;
    circuit.ops.reserve(static_cast<std::size_t>(config.n_layers) * n * 5);

    for (int layer = 0; layer < config.n_layers; ++layer) {
        if (layer == 0 || config.data_reuploading) {
            const int row = config.input_weights_per_layer
                                ? std::min(layer, config.input_weight_rows() - 1)
                                : 0;
            for (int q = 0; q < n; ++q) {
                GateOp op;
                op.kind = GateKind::RX;
                op.target = q;
                op.param_id = row * n + q;
                op.param_scale = x[static_cast<std::size_t>(q)];
                circuit.ops.push_back(op);
            }
        }
        for (int q = 0; q < n; ++q) {
            const int base = variational_base + (layer * n + q) * 3;
            for (int j = 0; j < 3; ++j) {
                GateOp op;
                op.kind = (j == 1) ? GateKind::RY : GateKind::RZ;
                op.target = q;
                op.param_id = base + j;
                circuit.ops.push_back(op);
            }
        }
        if (n >= 2) {
            for (int q = 0; q < n; ++q) {
                GateOp op;
                op.kind = GateKind::CNOT;
                op.control = q;
                op.target = (q + 1) % n;
                circuit.ops.push_back(op);
            }
        }
    }
    return circuit;
}

PolicyEval evaluate_policy(const PolicyConfig &config,
                           const PolicyParams &params,
                           const FeatureVector &features,
                           bool with_gradients) {
    const Circuit circuit = build_circuit(config, features, params);
    const std::vector<double> circuit_params = [&] {
        std::vector<double> flat;
        flat.reserve(params.circuit_param_count());
        flat.insert(flat.end(), params.input_weights.begin(),
                    params.input_weights.end());
        flat.insert(flat.end(), params.variational.begin(),
                    params.variational.end());
        return flat;
    }();

    PolicyEval eval;
    if (!with_gradients) {
        eval.expectation = run_circuit(circuit, circuit_params);
    } else {
        const std::vector<double> angle_grads =
            adjoint_angle_gradients(circuit, circuit_params, &eval.expectation);
        eval.d_expectation_d_circuit_params.assign(circuit_params.size(), 0.0);
        const int n_iw = static_cast<int>(params.input_weights.size());
        const int n = config.n_qubits;
        std::size_t slot = 0;
        for (const auto &op : circuit.ops) {
            if (!op.is_trainable()) {
                continue;
            }
            const double g = angle_grads[slot++];
            eval.d_expectation_d_circuit_params[static_cast<std::size_t>(
                op.param_id)] += op.param_scale * g;
            if (op.param_id < n_iw) {
                // Encoding gate RX(w * x): d angle/dx = w.
                const int feature_idx = op.param_id % n;
                eval.d_expectation_d_features[static_cast<std::size_t>(
                    feature_idx)] +=
                    circuit_params[static_cast<std::size_t>(op.param_id)] * g;
            }
        }
    }

    const double unclipped = params.output_weight * eval.expectation;
    if (config.action_clip > 0.0 && std::abs(unclipped) > config.action_clip) {
        eval.action = std::clamp(unclipped, -config.action_clip,
                                 config.action_clip);
        eval.clipped = true;
    } else {
        eval.action = unclipped;
    }
    return eval;
}

double act(const PolicyConfig &config, const PolicyParams &params,
           const FeatureVector &features) {
    return evaluate_policy(config, params, features, /*with_gradients=*/false)
        .action;
}

PolicyGradient policy_gradient(const PolicyConfig &config,
                               const PolicyParams &params,
                               const FeatureVector &features) {
    const PolicyEval eval =
        evaluate_policy(config, params, features, /*with_gradients=*/true);
    PolicyGradient grad = PolicyGradient::zeros_like(params);
    // d action/d(circuit param) = w_out * d<Z>/d(param); the clip makes the
    // action locally constant once saturated.
    const double pass = eval.clipped ? 0.0 : 1.0;
    const std::size_t n_iw = params.input_weights.size();
    if (params.input_weights_trainable) {
        for (std::size_t i = 0; i < n_iw; ++i) {
            grad.input_weights[i] = pass * params.output_weight *
                                    eval.d_expectation_d_circuit_params[i];
        }
    }
    for (std::size_t i = 0; i < params.variational.size(); ++i) {
        grad.variational[i] = pass * params.output_weight *
                              eval.d_expectation_d_circuit_params[n_iw + i];
    }
    if (params.output_weight_trainable) {
        grad.output_weight = pass * eval.expectation;
    }
    return grad;
}

namespace {

nlohmann::json config_to_json(const PolicyConfig &c) {
    return {{"n_qubits", c.n_qubits},
            {"n_layers", c.n_layers},
            {"data_reuploading", c.data_reuploading},
            {"trainable_input_weights", c.trainable_input_weights},
            {"trainable_output_weight", c.trainable_output_weight},
            {"input_weights_per_layer", c.input_weights_per_layer},
            {"observable_qubits", c.observable_qubits},
            {"action_clip", c.action_clip}};
}

PolicyConfig config_from_json(const nlohmann::json &j) {
    PolicyConfig c;
    c.n_qubits = j.at("n_qubits").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.data_reuploading = j.at("data_reuploading").get<bool>();
    c.trainable_input_weights = j.at("trainable_input_weights").get<bool>();
    c.trainable_output_weight = j.at("trainable_output_weight").get<bool>();
    c.input_weights_per_layer = j.at("input_weights_per_layer").get<bool>();
    c.observable_qubits = j.at("observable_qubits").get<std::vector<int>>();
    c.action_clip = j.at("action_clip").get<double>();
    return c;
}

} // namespace

void save_policy_checkpoint(const PolicyCheckpoint &ckpt,
                            const std::string &path) {
    nlohmann::json j;
    j["format"] = "qpole-policy-v1";
    j["config"] = config_to_json(ckpt.config);
    j["normalization"] = {{"bound_p", ckpt.normalization.bound_p},
                          {"bound_p_dot", ckpt.normalization.bound_p_dot},
                          {"bound_theta_dot", ckpt.normalization.bound_theta_dot},
                          {"bound_action", ckpt.normalization.bound_action}};
    j["seed"] = ckpt.seed;
    j["step"] = ckpt.step;
    j["input_weights"] = ckpt.params.input_weights;
    j["variational"] = ckpt.params.variational;
    j["output_weight"] = ckpt.params.output_weight;
    j["input_weights_trainable"] = ckpt.params.input_weights_trainable;
    j["output_weight_trainable"] = ckpt.params.output_weight_trainable;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open checkpoint for writing: " + path);
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw DataError("short write on checkpoint: " + path);
    }
}

PolicyCheckpoint load_policy_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw DataError("malformed checkpoint " + path + ": " + e.what());
    }
    if (j.value("format", "") != "qpole-policy-v1") {
        throw DataError("unknown checkpoint format in " + path);
    }
    PolicyCheckpoint ckpt;
    ckpt.config = config_from_json(j.at("config"));
    const auto &norm = j.at("normalization");
    ckpt.normalization.bound_p = norm.at("bound_p").get<double>();
    ckpt.normalization.bound_p_dot = norm.at("bound_p_dot").get<double>();
    ckpt.normalization.bound_theta_dot = norm.at("bound_theta_dot").get<double>();
    ckpt.normalization.bound_action = norm.at("bound_action").get<double>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.step = j.at("step").get<std::uint64_t>();
    ckpt.params.input_weights = j.at("input_weights").get<std::vector<double>>();
    ckpt.params.variational = j.at("variational").get<std::vector<double>>();
    ckpt.params.output_weight = j.at("output_weight").get<double>();
    ckpt.params.input_weights_trainable =
        j.at("input_weights_trainable").get<bool>();
    ckpt.params.output_weight_trainable =
        j.at("output_weight_trainable").get<bool>();
    if (!ckpt.params.all_finite()) {
        throw DataError("checkpoint contains non-finite parameters: " + path);
    }
    return ckpt;
}

} // namespace qpole
