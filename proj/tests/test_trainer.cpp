#include <doctest.h>

#include <cmath>

#include "qpole/errors.hpp"
#include "qpole/harness.hpp"
#include "qpole/trainer.hpp"

using namespace qpole;

namespace {

struct Fixture {
    WorldConfig world;
    NormalizationSpec normalization;
    Dataset dataset;
    TransitionEnsemble ensemble;
};

const Fixture &fixture() {
    static const Fixture f = [] {
        Fixture fx;
        BehaviorSpec behavior;
        fx.dataset = clean_dataset(
            generate_dataset(fx.world, behavior, 40, 123), fx.world);
        EnsembleTrainConfig ens;
        ens.hidden = 16;
        ens.epochs = 10;
        fx.ensemble =
            train_ensemble(extract_transitions(fx.dataset), 2, ens, 55);
        return fx;
    }();
    return f;
}

// Zero-delta model with identity standardization: the rollout state stays
// frozen wherever it starts.
TransitionNet frozen_model() { return TransitionNet::zeros(4); }

FeatureVector boundary_state(const WorldConfig &world) {
    FeatureVector s;
    s.p = world.track_limit; // reward is exactly -1 here
    return s;
}

TrainConfig tiny_train_config() {
    TrainConfig config;
    config.horizon = 5;
    config.n_init = 16;
    config.ensemble_batch = 4;
    config.epochs = 0;
    config.checkpoint_every = 1;
    config.workers = 1;
    return config;
}

// Deterministic surrogate-loss estimate: a fixed rng stream and the full
// model average make the result a pure function of the parameters.
double eval_loss(const PolicyConfig &policy_config, const PolicyParams &params,
                 const Fixture &fx, const std::vector<FeatureVector> &states,
                 TrainConfig config) {
    config.full_model_average = true;
    config.ensemble_batch = static_cast<int>(states.size());
    Rng rng = Rng::derive(424242, 0);
    return loss_and_grad(policy_config, params, fx.normalization, fx.world,
                         fx.ensemble, states, config, rng)
        .loss;
}

} // namespace

TEST_SUITE("trainer") {

TEST_CASE("gamma zero return is the first reward") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    const PolicyParams params = init_policy(policy_config, 2);
    TrainConfig config = tiny_train_config();
    config.gamma = 0.0;
    config.horizon = 50;
    const RolloutResult r =
        rollout(policy_config, params, fx.normalization, fx.world,
                frozen_model(), boundary_state(fx.world), config);
    CHECK(r.discounted_return == -1.0);
    REQUIRE(!r.trajectory.empty());
    CHECK(r.discounted_return == r.trajectory.front().reward);
}

TEST_CASE("gamma one return is the plain reward sum") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    const PolicyParams params = init_policy(policy_config, 2);
    TrainConfig config = tiny_train_config();
    config.gamma = 1.0;
    config.horizon = 200;
    const RolloutResult r =
        rollout(policy_config, params, fx.normalization, fx.world,
                frozen_model(), boundary_state(fx.world), config);
    CHECK(r.discounted_return == -200.0);
}

TEST_CASE("constant reward matches the geometric series") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    const PolicyParams params = init_policy(policy_config, 2);
    TrainConfig config = tiny_train_config();
    config.gamma = 0.99;
    config.horizon = 200;
    const RolloutResult r =
        rollout(policy_config, params, fx.normalization, fx.world,
                frozen_model(), boundary_state(fx.world), config);
    const double closed_form = -(1.0 - std::pow(0.99, 200)) / 0.01;
    CHECK(std::abs(r.discounted_return - closed_form) < 1e-9);
    CHECK(r.discounted_return == doctest::Approx(-86.60).epsilon(1e-3));
}

TEST_CASE("single step gradient matches finite differences") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    policy_config.action_clip = 0.0;
    PolicyParams params = init_policy(policy_config, 4);
    TrainConfig config = tiny_train_config();
    config.horizon = 1;
    const TransitionNet &model = fx.ensemble.models[0];
    const FeatureVector s0 = sample_initial_states(fx.dataset, 1, 3)[0];

    const RolloutResult r = rollout(policy_config, params, fx.normalization,
                                    fx.world, model, s0, config);
    const std::vector<double> analytic = r.gradient.flatten();

    const std::vector<double> flat = params.flatten();
    const double h = 1e-6;
    double max_err = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        PolicyParams perturbed = params;
        std::vector<double> tmp = flat;
        tmp[i] += h;
        perturbed.unflatten(tmp);
        const double plus = rollout(policy_config, perturbed, fx.normalization,
                                    fx.world, model, s0, config)
                                .discounted_return;
        tmp[i] = flat[i] - h;
        perturbed.unflatten(tmp);
        const double minus = rollout(policy_config, perturbed,
                                     fx.normalization, fx.world, model, s0,
                                     config)
                                 .discounted_return;
        const double fd = (plus - minus) / (2.0 * h);
        max_err = std::max(max_err, std::abs(fd - analytic[i]));
    }
    CHECK(max_err < 1e-6);
}

TEST_CASE("multi step gradient matches finite differences") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    policy_config.n_qubits = 1;
    policy_config.n_layers = 1;
    policy_config.action_clip = 0.0;
    PolicyParams params = init_policy(policy_config, 5);
    TrainConfig config = tiny_train_config();
    config.horizon = 3;
    config.ensemble_batch = 4;

    const auto init_states = sample_initial_states(fx.dataset, 8, 4);
    Rng rng_a = Rng::derive(77, 1);
    const LossAndGrad lg =
        loss_and_grad(policy_config, params, fx.normalization, fx.world,
                      fx.ensemble, init_states, config, rng_a);
    const std::vector<double> analytic = lg.gradient.flatten();

    const std::vector<double> flat = params.flatten();
    const double h = 1e-5;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        PolicyParams perturbed = params;
        std::vector<double> tmp = flat;
        tmp[i] += h;
        perturbed.unflatten(tmp);
        Rng rng_plus = Rng::derive(77, 1);
        const double plus =
            loss_and_grad(policy_config, perturbed, fx.normalization, fx.world,
                          fx.ensemble, init_states, config, rng_plus)
                .loss;
        tmp[i] = flat[i] - h;
        perturbed.unflatten(tmp);
        Rng rng_minus = Rng::derive(77, 1);
        const double minus =
            loss_and_grad(policy_config, perturbed, fx.normalization, fx.world,
                          fx.ensemble, init_states, config, rng_minus)
                .loss;
        const double fd = (plus - minus) / (2.0 * h);
        const double scale =
            std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
        CHECK(std::abs(fd - analytic[i]) / scale < 1e-4);
    }
}

TEST_CASE("one model step composes into the rollout and surrogate") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    const PolicyParams params = init_policy(policy_config, 3);
    const TransitionNet &model = fx.ensemble.models[0];
    const FeatureVector s0 = sample_initial_states(fx.dataset, 1, 8)[0];

    // Hand-compose one surrogate step.
    const double a0 =
        act(policy_config, params, normalize_features(s0, fx.normalization));
    const FeatureVector s1 = step_features(s0, a0, net_forward(model, s0, a0));

    TrainConfig config = tiny_train_config();
    config.horizon = 2;
    const RolloutResult r = rollout(policy_config, params, fx.normalization,
                                    fx.world, model, s0, config);
    REQUIRE(r.trajectory.size() == 2);
    CHECK(r.trajectory[0].action == a0);
    CHECK(r.trajectory[1].state.p == s1.p);
    CHECK(r.trajectory[1].state.cos_theta == s1.cos_theta);
    CHECK(r.trajectory[1].state.a_prev1 == a0);

    TransitionEnsemble single;
    single.models = {model};
    single.seeds = {0};
    single.final_mse = {0.0};
    const ActionFn policy =
        make_policy_action(policy_config, params, fx.normalization);
    const EpisodeTrace trace =
        surrogate_episode(policy, single, fx.world, s0, 2, 0);
    REQUIRE(trace.steps.size() == 2);
    CHECK(trace.steps[0].action == a0);
    CHECK(trace.steps[1].features.p == s1.p);
    CHECK(trace.steps[1].features.sin_theta == s1.sin_theta);
}

TEST_CASE("identical rollouts give the single rollout loss") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    const PolicyParams params = init_policy(policy_config, 6);
    TrainConfig config = tiny_train_config();
    config.horizon = 10;
    config.ensemble_batch = 7;

    // One initial state and one model: all sampled pairs coincide.
    TransitionEnsemble single;
    single.models = {fx.ensemble.models[0]};
    single.seeds = {fx.ensemble.seeds[0]};
    single.final_mse = {fx.ensemble.final_mse[0]};
    const std::vector<FeatureVector> states{
        sample_initial_states(fx.dataset, 1, 5)[0]};

    Rng rng = Rng::derive(9, 9);
    const LossAndGrad lg =
        loss_and_grad(policy_config, params, fx.normalization, fx.world,
                      single, states, config, rng);
    const RolloutResult single_roll =
        rollout(policy_config, params, fx.normalization, fx.world,
                single.models[0], states[0], config);
    CHECK(lg.loss == doctest::Approx(-single_roll.discounted_return)
                         .epsilon(1e-12));
}

TEST_CASE("adam first step moves by the sign of the gradient") {
    PolicyConfig policy_config;
    PolicyParams params = init_policy(policy_config, 7);
    const std::vector<double> before = params.flatten();
    PolicyGradient grad = PolicyGradient::zeros_like(params);
    grad.variational[0] = 0.5;
    grad.variational[1] = -2.0;
    AdamState state(params.param_count());
    AdamConfig config;
    config.learning_rate = 0.01;
    adam_step(params, grad, state, config);
    const std::vector<double> after = params.flatten();
    const std::size_t base = params.input_weights.size();
    CHECK(after[base] == doctest::Approx(before[base] - 0.01).epsilon(1e-6));
    CHECK(after[base + 1] ==
          doctest::Approx(before[base + 1] + 0.01).epsilon(1e-6));
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    PolicyConfig policy_config;
    PolicyParams params = init_policy(policy_config, 8);
    const std::vector<double> before = params.flatten();
    AdamState state(params.param_count());
    adam_step(params, PolicyGradient::zeros_like(params), state, AdamConfig{});
    CHECK(params.flatten() == before);
    CHECK(state.t == 1);

    // Non-zero moments decay toward zero under further zero gradients.
    std::vector<double> x{1.0};
    AdamState warm(1);
    adam_update(x, std::vector<double>{1.0}, warm, AdamConfig{});
    const double m_after_one = warm.m[0];
    adam_update(x, std::vector<double>{0.0}, warm, AdamConfig{});
    CHECK(std::abs(warm.m[0]) < std::abs(m_after_one));
}

TEST_CASE("adam descends on a quadratic") {
    // f(x) = x^2 from x = 1 with lr 0.1: |x| strictly decreases.
    std::vector<double> x{1.0};
    AdamState state(1);
    AdamConfig config;
    config.learning_rate = 0.1;
    double prev = std::abs(x[0]);
    for (int step = 0; step < 10; ++step) {
        const std::vector<double> grad{2.0 * x[0]};
        adam_update(x, grad, state, config);
        CHECK(std::abs(x[0]) < prev);
        prev = std::abs(x[0]);
    }
}

TEST_CASE("adam shape mismatch is a configuration error") {
    std::vector<double> x{1.0, 2.0};
    AdamState state(1);
    CHECK_THROWS_AS(
        adam_update(x, std::vector<double>{0.1, 0.2}, state, AdamConfig{}),
        ConfigError);
}

TEST_CASE("numeric blowup truncates the rollout and flags it") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    const PolicyParams params = init_policy(policy_config, 12);
    // A model whose output head explodes: tanh keeps h2 in [-1, 1] but the
    // huge head weights push the state out of range within a few steps.
    TransitionNet bomb = TransitionNet::zeros(4);
    Rng rng(1);
    for (auto &w : bomb.w1) {
        w = rng.uniform(-1.0, 1.0);
    }
    for (auto &w : bomb.w2) {
        w = rng.uniform(-1.0, 1.0);
    }
    for (auto &w : bomb.w3) {
        w = 1e154;
    }
    TrainConfig config = tiny_train_config();
    config.horizon = 50;
    const RolloutResult r =
        rollout(policy_config, params, fx.normalization, fx.world, bomb,
                boundary_state(fx.world), config);
    CHECK(r.truncated);
    CHECK(r.trajectory.size() < 50);
    CHECK(std::isfinite(r.discounted_return));
    // Flagged rollouts contribute no gradient.
    for (double g : r.gradient.flatten()) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("weight stats") {
    PolicyConfig policy_config;
    PolicyParams params = init_policy(policy_config, 9);
    std::fill(params.input_weights.begin(), params.input_weights.end(), 1.0);
    CHECK(weight_stats(params).input_weights == 1.0);
    std::fill(params.variational.begin(), params.variational.end(), 0.0);
    CHECK(weight_stats(params).variational == 0.0);
    for (std::size_t i = 0; i < params.input_weights.size(); ++i) {
        params.input_weights[i] = i % 2 == 0 ? -2.0 : 2.0;
    }
    CHECK(weight_stats(params).input_weights == 2.0);
}

TEST_CASE("zero epochs returns the initial parameters and empty report") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    TrainConfig config = tiny_train_config();
    config.seed = 31;
    const TrainResult result =
        train_policy(policy_config, fx.normalization, fx.world, fx.ensemble,
                     fx.dataset, config);
    CHECK(result.report.rows.empty());
    const PolicyParams expected = init_policy(policy_config, 31);
    CHECK(result.params.variational == expected.variational);
    CHECK(result.init_states.size() == 16);
}

TEST_CASE("a few steps of training reduce the loss") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    TrainConfig config = tiny_train_config();
    config.horizon = 20;
    config.ensemble_batch = 8;
    config.epochs = 60;
    config.seed = 2;
    const TrainResult result =
        train_policy(policy_config, fx.normalization, fx.world, fx.ensemble,
                     fx.dataset, config);
    REQUIRE(result.report.rows.size() == 60);
    const PolicyParams initial = init_policy(policy_config, config.seed);
    const double before =
        eval_loss(policy_config, initial, fx, result.init_states, config);
    const double after =
        eval_loss(policy_config, result.params, fx, result.init_states, config);
    CHECK(after < before);
}

TEST_CASE("frozen input weights stay bit identical over 100 steps") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    policy_config.trainable_input_weights = false;
    policy_config.trainable_output_weight = false;
    TrainConfig config = tiny_train_config();
    config.horizon = 5;
    config.ensemble_batch = 2;
    config.epochs = 100;
    config.seed = 13;
    const TrainResult result =
        train_policy(policy_config, fx.normalization, fx.world, fx.ensemble,
                     fx.dataset, config);
    const PolicyParams initial = init_policy(policy_config, 13);
    CHECK(result.params.input_weights == initial.input_weights);
    CHECK(result.params.output_weight == initial.output_weight);
    CHECK(result.params.variational != initial.variational);
}

TEST_CASE("training leaves the ensemble untouched") {
    const auto &fx = fixture();
    const std::string before = ensemble_param_hash(fx.ensemble);
    PolicyConfig policy_config;
    TrainConfig config = tiny_train_config();
    config.epochs = 5;
    config.horizon = 5;
    train_policy(policy_config, fx.normalization, fx.world, fx.ensemble,
                 fx.dataset, config);
    CHECK(ensemble_param_hash(fx.ensemble) == before);
}

TEST_CASE("training is bit reproducible") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    TrainConfig config = tiny_train_config();
    config.epochs = 12;
    config.horizon = 8;
    config.ensemble_batch = 3;
    config.seed = 21;
    config.workers = 1;
    const TrainResult a = train_policy(policy_config, fx.normalization,
                                       fx.world, fx.ensemble, fx.dataset,
                                       config);
    config.workers = 2;
    const TrainResult b = train_policy(policy_config, fx.normalization,
                                       fx.world, fx.ensemble, fx.dataset,
                                       config);
    CHECK(a.params.input_weights == b.params.input_weights);
    CHECK(a.params.variational == b.params.variational);
    CHECK(a.params.output_weight == b.params.output_weight);
    for (std::size_t i = 0; i < a.report.rows.size(); ++i) {
        CHECK(a.report.rows[i].loss == b.report.rows[i].loss);
    }
}

TEST_CASE("report steps increase strictly and wall clock is non-negative") {
    const auto &fx = fixture();
    PolicyConfig policy_config;
    TrainConfig config = tiny_train_config();
    config.epochs = 9;
    config.checkpoint_every = 3;
    const TrainResult result =
        train_policy(policy_config, fx.normalization, fx.world, fx.ensemble,
                     fx.dataset, config);
    REQUIRE(result.report.rows.size() == 3);
    for (std::size_t i = 0; i < result.report.rows.size(); ++i) {
        CHECK(result.report.rows[i].wall_ms >= 0.0);
        if (i > 0) {
            CHECK(result.report.rows[i].step >
                  result.report.rows[i - 1].step);
        }
    }
}

TEST_CASE("gradient steps reduce loss across seeds") {
    const auto &fx = fixture();
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        PolicyConfig policy_config;
        TrainConfig config = tiny_train_config();
        config.horizon = 15;
        config.ensemble_batch = 6;
        config.epochs = 50;
        config.seed = seed;
        const TrainResult result =
            train_policy(policy_config, fx.normalization, fx.world,
                         fx.ensemble, fx.dataset, config);
        const PolicyParams initial = init_policy(policy_config, seed);
        const double before =
            eval_loss(policy_config, initial, fx, result.init_states, config);
        const double after = eval_loss(policy_config, result.params, fx,
                                       result.init_states, config);
        improved += after < before ? 1 : 0;
    }
    CHECK(improved >= 4);
}

} // TEST_SUITE
