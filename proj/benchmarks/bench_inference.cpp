#include <benchmark/benchmark.h>

#include <cmath>

#include "qpole/circuit.hpp"
#include "qpole/policy.hpp"
#include "qpole/rng.hpp"
#include "qpole/trainer.hpp"
#include "qpole/transition.hpp"

using namespace qpole;

namespace {

FeatureVector some_features(std::uint64_t seed) {
    Rng rng(seed);
    FeatureVector f;
    f.p = rng.uniform(-2.0, 2.0);
    f.p_dot = rng.uniform(-2.0, 2.0);
    const double theta = rng.uniform(-0.2, 0.2);
    f.cos_theta = std::cos(theta);
    f.sin_theta = std::sin(theta);
    f.theta_dot = rng.uniform(-2.0, 2.0);
    f.a_prev3 = rng.uniform(-1.0, 1.0);
    f.a_prev2 = rng.uniform(-1.0, 1.0);
    f.a_prev1 = rng.uniform(-1.0, 1.0);
    return f;
}

void BM_PolicyAct(benchmark::State &state) {
    PolicyConfig config;
    config.n_layers = static_cast<int>(state.range(0));
    const PolicyParams params = init_policy(config, 1);
    const NormalizationSpec norm;
    const FeatureVector raw = some_features(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            act(config, params, normalize_features(raw, norm)));
    }
}
BENCHMARK(BM_PolicyAct)->Arg(1)->Arg(2)->Arg(4);

void BM_AdjointGradient(benchmark::State &state) {
    PolicyConfig config;
    config.n_layers = static_cast<int>(state.range(0));
    const PolicyParams params = init_policy(config, 1);
    const FeatureVector f = some_features(8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(policy_gradient(config, params, f));
    }
}
BENCHMARK(BM_AdjointGradient)->Arg(1)->Arg(2);

void BM_ParameterShiftGradient(benchmark::State &state) {
    PolicyConfig config;
    config.n_layers = static_cast<int>(state.range(0));
    const PolicyParams params = init_policy(config, 1);
    const FeatureVector f = some_features(9);
    const Circuit circuit = build_circuit(config, f, params);
    std::vector<double> flat(params.flatten());
    flat.pop_back(); // circuit parameters only
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_parameter_shift(circuit, flat));
    }
}
BENCHMARK(BM_ParameterShiftGradient)->Arg(1)->Arg(2);

void BM_StateVectorGate(benchmark::State &state) {
    StateVector sv(static_cast<int>(state.range(0)));
    double angle = 0.01;
    for (auto _ : state) {
        sv.apply_rotation(StateVector::Axis::Y, 0, angle);
        angle = -angle;
    }
}
BENCHMARK(BM_StateVectorGate)->Arg(8)->Arg(12)->Arg(16);

void BM_TransitionForward(benchmark::State &state) {
    TransitionNet net = TransitionNet::zeros(64);
    Rng rng(3);
    for (auto &w : net.w1) {
        w = rng.uniform(-0.2, 0.2);
    }
    for (auto &w : net.w2) {
        w = rng.uniform(-0.2, 0.2);
    }
    for (auto &w : net.w3) {
        w = rng.uniform(-0.2, 0.2);
    }
    const FeatureVector f = some_features(10);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net_forward(net, f, 0.3));
    }
}
BENCHMARK(BM_TransitionForward);

} // namespace

BENCHMARK_MAIN();
