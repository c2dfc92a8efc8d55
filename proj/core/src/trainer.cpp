#include "qpole/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "qpole/dataset.hpp"
#include "qpole/errors.hpp"
#include "qpole/parallel.hpp"

namespace qpole {

void TrainConfig::validate() const {
    if (gamma < 0.0 || gamma > 1.0) {
        throw ConfigError("gamma must lie in [0, 1]");
    }
    if (horizon < 1) {
        throw ConfigError("horizon must be >= 1");
    }
    if (ensemble_batch < 1) {
        throw ConfigError("ensemble_batch must be >= 1");
    }
    if (n_init < 1) {
        throw ConfigError("n_init must be >= 1");
    }
    if (epochs < 0) {
        throw ConfigError("epochs must be >= 0");
    }
}

namespace {

// d reward / d (p, p_dot, cos, sin, theta_dot) of the *next* state. theta
// is recovered via atan2(sin, cos); on the unit circle d theta/d sin = cos
// and d theta/d cos = -sin.
std::array<double, FeatureVector::kDim>
reward_state_gradient(const WorldConfig &world, const FeatureVector &s) {
    const RewardGradient rg =
        reward_gradient(world, s.p, s.theta(), s.theta_dot);
    std::array<double, FeatureVector::kDim> g{};
    g[0] = rg.d_p;
    g[2] = rg.d_theta * (-s.sin_theta);
    g[3] = rg.d_theta * s.cos_theta;
    g[4] = rg.d_theta_dot;
    return g;
}

void accumulate(PolicyGradient &into, const PolicyGradient &from,
                double scale) {
    for (std::size_t i = 0; i < into.input_weights.size(); ++i) {
        into.input_weights[i] += scale * from.input_weights[i];
    }
    for (std::size_t i = 0; i < into.variational.size(); ++i) {
        into.variational[i] += scale * from.variational[i];
    }
    into.output_weight += scale * from.output_weight;
}

} // namespace

RolloutResult rollout(const PolicyConfig &policy_config,
                      const PolicyParams &params,
                      const NormalizationSpec &normalization,
                      const WorldConfig &world, const TransitionNet &model,
                      const FeatureVector &s0, const TrainConfig &config) {
    config.validate();
    const int horizon = config.horizon;

    struct StepCache {
        FeatureVector state;      // s_t
        FeatureVector normalized; // policy input
        double expectation = 0.0;
        double action = 0.0;
        bool clipped = false;
        Delta5 delta{};
    };

    RolloutResult result;
    result.gradient = PolicyGradient::zeros_like(params);
    std::vector<StepCache> steps;
    steps.reserve(static_cast<std::size_t>(horizon));

    // Forward sweep.
    FeatureVector state = s0;
    double discount = 1.0;
    for (int t = 0; t < horizon; ++t) {
        StepCache cache;
        cache.state = state;
        cache.normalized = normalize_features(state, normalization);
        const PolicyEval eval = evaluate_policy(policy_config, params,
                                                cache.normalized,
                                                /*with_gradients=*/false);
        cache.expectation = eval.expectation;
        cache.action = eval.action;
        cache.clipped = eval.clipped;
        cache.delta = net_forward(model, state, cache.action);

        FeatureVector next;
        try {
            next = step_features(state, cache.action, cache.delta);
        } catch (const NumericError &) {
            result.truncated = true;
            break;
        }
        if (!next.all_finite()) {
            result.truncated = true;
            break;
        }
        const double r =
            reward(world, next.p, next.theta(), next.theta_dot);
        if (!std::isfinite(r) ||
            !std::isfinite(result.discounted_return + discount * r)) {
            result.truncated = true;
            break;
        }
        result.discounted_return += discount * r;
        result.trajectory.push_back({state, cache.action, r});
        steps.push_back(cache);
        state = next;
        discount *= config.gamma;
    }

    // A truncated rollout keeps its partial trajectory and return but
    // contributes no gradient; the upstream signal through the diverging
    // tail is meaningless.
    if (result.truncated) {
        return result;
    }

    // Backward sweep: g carries d return / d s_{t+1}.
    std::array<double, FeatureVector::kDim> g{};
    for (std::size_t t = steps.size(); t-- > 0;) {
        const StepCache &cache = steps[t];
        const FeatureVector next =
            step_features(cache.state, cache.action, cache.delta);
        const double gamma_t = std::pow(config.gamma, double(t));
        const auto dr = reward_state_gradient(world, next);
        for (int i = 0; i < FeatureVector::kDim; ++i) {
            g[static_cast<std::size_t>(i)] +=
                gamma_t * dr[static_cast<std::size_t>(i)];
        }

        const StepBackward step_back =
            step_features_backward(cache.state, cache.action, cache.delta, g);
        const NetInputGradient net_back =
            net_backward(model, cache.state, cache.action, step_back.d_delta);

        const double d_action = step_back.d_action + net_back.d_action;
        const double d_unclipped = cache.clipped ? 0.0 : d_action;

        // Through action = w_out * <Z> and the circuit itself.
        std::array<double, FeatureVector::kDim> d_state{};
        for (int i = 0; i < FeatureVector::kDim; ++i) {
            d_state[static_cast<std::size_t>(i)] =
                step_back.d_state[static_cast<std::size_t>(i)] +
                net_back.d_state[static_cast<std::size_t>(i)];
        }
        if (d_unclipped != 0.0) {
            if (params.output_weight_trainable) {
                result.gradient.output_weight += d_unclipped * cache.expectation;
            }
            const double d_expectation = d_unclipped * params.output_weight;
            const PolicyEval eval = evaluate_policy(policy_config, params,
                                                    cache.normalized,
                                                    /*with_gradients=*/true);
            const std::size_t n_iw = params.input_weights.size();
            if (params.input_weights_trainable) {
                for (std::size_t i = 0; i < n_iw; ++i) {
                    result.gradient.input_weights[i] +=
                        d_expectation * eval.d_expectation_d_circuit_params[i];
                }
            }
            for (std::size_t i = 0; i < params.variational.size(); ++i) {
                result.gradient.variational[i] +=
                    d_expectation *
                    eval.d_expectation_d_circuit_params[n_iw + i];
            }
            const auto norm_slopes =
                normalize_features_jacobian_diag(cache.state, normalization);
            for (int i = 0; i < FeatureVector::kDim; ++i) {
                d_state[static_cast<std::size_t>(i)] +=
                    d_expectation *
                    eval.d_expectation_d_features[static_cast<std::size_t>(i)] *
                    norm_slopes[static_cast<std::size_t>(i)];
            }
        }
        g = d_state;
    }

    for (double value : result.gradient.flatten()) {
        if (!std::isfinite(value)) {
            result.gradient = PolicyGradient::zeros_like(params);
            result.truncated = true;
            break;
        }
    }
    return result;
}

LossAndGrad loss_and_grad(const PolicyConfig &policy_config,
                          const PolicyParams &params,
                          const NormalizationSpec &normalization,
                          const WorldConfig &world,
                          const TransitionEnsemble &ensemble,
                          const std::vector<FeatureVector> &init_states,
                          const TrainConfig &config, Rng &rng) {
    config.validate();
    if (init_states.empty()) {
        throw DataError("no initial states to roll out from");
    }
    if (ensemble.models.empty()) {
        throw ConfigError("empty transition ensemble");
    }

    // Sample the (initial state, model) pairs up front so the rng stream is
    // independent of scheduling.
    struct Pair {
        std::size_t state_idx;
        std::size_t model_idx;
    };
    std::vector<Pair> pairs;
    if (config.full_model_average) {
        pairs.reserve(static_cast<std::size_t>(config.ensemble_batch) *
                      ensemble.models.size());
        for (int b = 0; b < config.ensemble_batch; ++b) {
            const std::size_t s_idx = rng.uniform_index(init_states.size());
            for (std::size_t k = 0; k < ensemble.models.size(); ++k) {
                pairs.push_back({s_idx, k});
            }
        }
    } else {
        pairs.reserve(static_cast<std::size_t>(config.ensemble_batch));
        for (int b = 0; b < config.ensemble_batch; ++b) {
            pairs.push_back({rng.uniform_index(init_states.size()),
                             rng.uniform_index(ensemble.models.size())});
        }
    }

    std::vector<double> returns(pairs.size(), 0.0);
    std::vector<PolicyGradient> grads(pairs.size(),
                                      PolicyGradient::zeros_like(params));
    const unsigned workers =
        config.workers == 0 ? default_workers() : config.workers;
    parallel_for(pairs.size(), workers, [&](std::size_t i) {
        const RolloutResult r =
            rollout(policy_config, params, normalization, world,
                    ensemble.models[pairs[i].model_idx],
                    init_states[pairs[i].state_idx], config);
        returns[i] = r.discounted_return;
        grads[i] = r.gradient;
    });

    // Sequential reduction in pair order keeps results bit-identical for
    // any worker count.
    LossAndGrad out;
    out.gradient = PolicyGradient::zeros_like(params);
    const double inv = -1.0 / double(pairs.size());
    double mean_return = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        mean_return += returns[i];
        accumulate(out.gradient, grads[i], inv);
    }
    out.loss = -mean_return / double(pairs.size());
    return out;
}

void adam_step(PolicyParams &params, const PolicyGradient &grad,
               AdamState &state, const AdamConfig &config) {
    std::vector<double> flat_params = params.flatten();
    std::vector<double> flat_grad = grad.flatten();
    if (flat_params.size() != flat_grad.size()) {
        throw ConfigError("gradient and parameter shapes differ");
    }
    // Frozen groups carry zero gradients, so their moments stay at zero and
    // the update is exactly zero; masking again keeps them bit-identical.
    const std::size_t n_iw = params.input_weights.size();
    if (!params.input_weights_trainable) {
        for (std::size_t i = 0; i < n_iw; ++i) {
            flat_grad[i] = 0.0;
        }
    }
    if (!params.output_weight_trainable) {
        flat_grad.back() = 0.0;
    }
    adam_update(flat_params, flat_grad, state, config);
    if (!params.input_weights_trainable) {
        std::vector<double> original = params.flatten();
        for (std::size_t i = 0; i < n_iw; ++i) {
            flat_params[i] = original[i];
        }
    }
    if (!params.output_weight_trainable) {
        flat_params.back() = params.output_weight;
    }
    params.unflatten(flat_params);
}

WeightStats weight_stats(const PolicyParams &params) {
    auto mean_abs = [](const std::vector<double> &v) {
        if (v.empty()) {
            return 0.0;
        }
        double acc = 0.0;
        for (double x : v) {
            acc += std::abs(x);
        }
        return acc / double(v.size());
    };
    WeightStats stats;
    stats.input_weights = mean_abs(params.input_weights);
    stats.variational = mean_abs(params.variational);
    stats.output_weight = std::abs(params.output_weight);
    return stats;
}

void write_train_report_csv(const TrainReport &report,
                            const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open train report for writing: " + path);
    }
    out << "step,loss,mean_abs_input_w,mean_abs_variational,"
           "mean_abs_output_w,wall_ms\n";
    for (const auto &row : report.rows) {
        out << row.step << ',' << format_double(row.loss) << ','
            << format_double(row.stats.input_weights) << ','
            << format_double(row.stats.variational) << ','
            << format_double(row.stats.output_weight) << ','
            << format_double(row.wall_ms) << '\n';
    }
}

TrainResult train_policy(const PolicyConfig &policy_config,
                         const NormalizationSpec &normalization,
                         const WorldConfig &world,
                         const TransitionEnsemble &ensemble,
                         const Dataset &dataset, const TrainConfig &config,
                         const std::string &checkpoint_dir) {
    config.validate();
    policy_config.validate();

    TrainResult result;
    result.init_states =
        sample_initial_states(dataset, config.n_init, config.seed);
    result.params = init_policy(policy_config, config.seed);

    AdamState adam(result.params.param_count());
    Rng rng = Rng::derive(config.seed, /*stream_id=*/0x726f6c6c); // "roll"

    const int checkpoint_every = config.checkpoint_every > 0
                                     ? config.checkpoint_every
                                     : std::max(1, config.epochs / 10);
    const auto t0 = std::chrono::steady_clock::now();

    auto emit_checkpoint = [&](std::uint64_t step, double loss) {
        const double wall_ms =
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - t0)
                .count();
        result.report.rows.push_back(
            {step, loss, weight_stats(result.params), wall_ms});
        if (!checkpoint_dir.empty()) {
            PolicyCheckpoint ckpt;
            ckpt.config = policy_config;
            ckpt.params = result.params;
            ckpt.normalization = normalization;
            ckpt.seed = config.seed;
            ckpt.step = step;
            const auto path = std::filesystem::path(checkpoint_dir) /
                              ("policy_step" + std::to_string(step) + ".json");
            save_policy_checkpoint(ckpt, path.string());
        }
    };

    for (int step = 1; step <= config.epochs; ++step) {
        LossAndGrad lg =
            loss_and_grad(policy_config, result.params, normalization, world,
                          ensemble, result.init_states, config, rng);
        std::vector<double> flat = lg.gradient.flatten();
        clip_global_norm(flat, config.grad_clip_norm);
        PolicyGradient clipped = PolicyGradient::zeros_like(result.params);
        std::copy_n(flat.begin(), clipped.input_weights.size(),
                    clipped.input_weights.begin());
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(
                                       clipped.input_weights.size()),
                    clipped.variational.size(), clipped.variational.begin());
        clipped.output_weight = flat.back();
        adam_step(result.params, clipped, adam, config.adam);

        if (step % checkpoint_every == 0 || step == config.epochs) {
            emit_checkpoint(static_cast<std::uint64_t>(step), lg.loss);
        }
    }
    return result;
}

} // namespace qpole
