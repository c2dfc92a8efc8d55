#include "run_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "qpole/errors.hpp"

namespace qpole::cli {

namespace {

using nlohmann::json;

void check_keys(const json &j, const std::set<std::string> &allowed,
                const std::string &section) {
    for (const auto &item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw ConfigError("unknown config key '" + item.key() + "' in " +
                              section);
        }
    }
}

template <typename T>
void maybe(const json &j, const char *key, T &out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

void parse_world(const json &j, WorldConfig &w) {
    check_keys(j,
               {"cart_mass", "pole_mass", "pole_half_length", "gravity",
                "force_scale", "dt", "track_limit", "fail_angle",
                "reward_omega_weight", "reward_omega_ref", "reward_angle_gate"},
               "world");
    maybe(j, "cart_mass", w.cart_mass);
    maybe(j, "pole_mass", w.pole_mass);
    maybe(j, "pole_half_length", w.pole_half_length);
    maybe(j, "gravity", w.gravity);
    maybe(j, "force_scale", w.force_scale);
    maybe(j, "dt", w.dt);
    maybe(j, "track_limit", w.track_limit);
    maybe(j, "fail_angle", w.fail_angle);
    maybe(j, "reward_omega_weight", w.reward_omega_weight);
    maybe(j, "reward_omega_ref", w.reward_omega_ref);
    maybe(j, "reward_angle_gate", w.reward_angle_gate);
}

void parse_normalization(const json &j, NormalizationSpec &n) {
    check_keys(j, {"bound_p", "bound_p_dot", "bound_theta_dot", "bound_action"},
               "normalization");
    maybe(j, "bound_p", n.bound_p);
    maybe(j, "bound_p_dot", n.bound_p_dot);
    maybe(j, "bound_theta_dot", n.bound_theta_dot);
    maybe(j, "bound_action", n.bound_action);
}

void parse_policy(const json &j, PolicyConfig &p) {
    check_keys(j,
               {"n_qubits", "n_layers", "data_reuploading",
                "trainable_input_weights", "trainable_output_weight",
                "input_weights_per_layer", "observable_qubits", "action_clip"},
               "policy");
    maybe(j, "n_qubits", p.n_qubits);
    maybe(j, "n_layers", p.n_layers);
    maybe(j, "data_reuploading", p.data_reuploading);
    maybe(j, "trainable_input_weights", p.trainable_input_weights);
    maybe(j, "trainable_output_weight", p.trainable_output_weight);
    maybe(j, "input_weights_per_layer", p.input_weights_per_layer);
    maybe(j, "observable_qubits", p.observable_qubits);
    maybe(j, "action_clip", p.action_clip);
}

void parse_train(const json &j, TrainConfig &t) {
    check_keys(j,
               {"gamma", "horizon", "n_init", "ensemble_batch", "learning_rate",
                "beta1", "beta2", "epsilon", "epochs", "checkpoint_every",
                "grad_clip_norm", "full_model_average"},
               "train");
    maybe(j, "gamma", t.gamma);
    maybe(j, "horizon", t.horizon);
    maybe(j, "n_init", t.n_init);
    maybe(j, "ensemble_batch", t.ensemble_batch);
    maybe(j, "learning_rate", t.adam.learning_rate);
    maybe(j, "beta1", t.adam.beta1);
    maybe(j, "beta2", t.adam.beta2);
    maybe(j, "epsilon", t.adam.epsilon);
    maybe(j, "epochs", t.epochs);
    maybe(j, "checkpoint_every", t.checkpoint_every);
    maybe(j, "grad_clip_norm", t.grad_clip_norm);
    maybe(j, "full_model_average", t.full_model_average);
}

void parse_dynamics(const json &j, EnsembleTrainConfig &d, int &k) {
    check_keys(j, {"k", "hidden", "learning_rate", "batch_size", "epochs",
                   "init_scale"},
               "dynamics");
    maybe(j, "k", k);
    maybe(j, "hidden", d.hidden);
    maybe(j, "learning_rate", d.learning_rate);
    maybe(j, "batch_size", d.batch_size);
    maybe(j, "epochs", d.epochs);
    maybe(j, "init_scale", d.init_scale);
}

void parse_behavior(const json &j, BehaviorSpec &b) {
    check_keys(j,
               {"random_mix", "k_theta", "k_theta_dot", "k_p", "k_p_dot",
                "action_noise", "max_steps", "start_p_span",
                "start_angle_span"},
               "behavior");
    maybe(j, "random_mix", b.random_mix);
    maybe(j, "k_theta", b.k_theta);
    maybe(j, "k_theta_dot", b.k_theta_dot);
    maybe(j, "k_p", b.k_p);
    maybe(j, "k_p_dot", b.k_p_dot);
    maybe(j, "action_noise", b.action_noise);
    maybe(j, "max_steps", b.max_steps);
    maybe(j, "start_p_span", b.start_p_span);
    maybe(j, "start_angle_span", b.start_angle_span);
}

void parse_latency(const json &j, LatencyModel &l) {
    check_keys(j, {"fixed_delay_ms", "jitter_ms"}, "latency");
    maybe(j, "fixed_delay_ms", l.fixed_delay_ms);
    maybe(j, "jitter_ms", l.jitter_ms);
}

void parse_eval(const json &j, EvalConfig &e) {
    check_keys(j,
               {"episodes", "max_steps", "bin_width", "runs_per_bin",
                "max_start_angle"},
               "eval");
    maybe(j, "episodes", e.episodes);
    maybe(j, "max_steps", e.max_steps);
    maybe(j, "bin_width", e.bin_width);
    maybe(j, "runs_per_bin", e.runs_per_bin);
    maybe(j, "max_start_angle", e.max_start_angle);
}

} // namespace

RunConfig load_run_config(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open config file: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    check_keys(j,
               {"seed", "workers", "world", "normalization", "policy", "train",
                "dynamics", "behavior", "latency", "eval"},
               "top level");

    RunConfig config;
    maybe(j, "seed", config.seed);
    maybe(j, "workers", config.workers);
    if (j.contains("world")) {
        parse_world(j.at("world"), config.world);
    }
    if (j.contains("normalization")) {
        parse_normalization(j.at("normalization"), config.normalization);
    }
    if (j.contains("policy")) {
        parse_policy(j.at("policy"), config.policy);
    }
    if (j.contains("train")) {
        parse_train(j.at("train"), config.train);
    }
    if (j.contains("dynamics")) {
        parse_dynamics(j.at("dynamics"), config.dynamics, config.dynamics_k);
    }
    if (j.contains("behavior")) {
        parse_behavior(j.at("behavior"), config.behavior);
    }
    if (j.contains("latency")) {
        parse_latency(j.at("latency"), config.latency);
    }
    if (j.contains("eval")) {
        parse_eval(j.at("eval"), config.eval);
    }
    return config;
}

} // namespace qpole::cli
