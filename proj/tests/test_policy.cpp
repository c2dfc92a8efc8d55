#include <doctest.h>

#include <array>
#include <cmath>
#include <complex>
#include <filesystem>

#include "qpole/errors.hpp"
#include "qpole/policy.hpp"
#include "qpole/rng.hpp"
#include "test_util.hpp"

using namespace qpole;
using namespace qpole::test;

namespace {

FeatureVector random_normalized_features(Rng &rng) {
    FeatureVector f;
    f.p = rng.uniform(-M_PI, M_PI);
    f.p_dot = rng.uniform(-M_PI, M_PI);
    const double theta = rng.uniform(-M_PI, M_PI);
    f.cos_theta = std::cos(theta);
    f.sin_theta = std::sin(theta);
    f.theta_dot = rng.uniform(-M_PI, M_PI);
    f.a_prev3 = rng.uniform(-M_PI, M_PI);
    f.a_prev2 = rng.uniform(-M_PI, M_PI);
    f.a_prev1 = rng.uniform(-M_PI, M_PI);
    return f;
}

PolicyParams random_params(const PolicyConfig &config, std::uint64_t seed) {
    PolicyParams params = init_policy(config, seed);
    Rng rng(seed ^ 0xabcdef);
    for (auto &w : params.input_weights) {
        w = rng.uniform(-1.5, 1.5);
    }
    params.output_weight = rng.uniform(-2.0, 2.0);
    return params;
}

// 2x2 matrix-product oracle for a single-qubit circuit.
using Mat2 = std::array<std::array<std::complex<double>, 2>, 2>;

Mat2 matmul(const Mat2 &a, const Mat2 &b) {
    Mat2 c{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    return c;
}

Mat2 rx(double t) {
    const std::complex<double> i{0.0, 1.0};
    return {{{std::cos(t / 2), -i * std::sin(t / 2)},
             {-i * std::sin(t / 2), std::cos(t / 2)}}};
}

Mat2 ry(double t) {
    return {{{std::cos(t / 2), -std::sin(t / 2)},
             {std::sin(t / 2), std::cos(t / 2)}}};
}

Mat2 rz(double t) {
    return {{{std::polar(1.0, -t / 2), 0.0}, {0.0, std::polar(1.0, t / 2)}}};
}

} // namespace

TEST_SUITE("policy") {

TEST_CASE("init is deterministic per seed") {
    PolicyConfig config;
    const PolicyParams a = init_policy(config, 7);
    const PolicyParams b = init_policy(config, 7);
    CHECK(a.input_weights == b.input_weights);
    CHECK(a.variational == b.variational);
    CHECK(a.output_weight == b.output_weight);

    const PolicyParams c = init_policy(config, 8);
    CHECK(a.variational != c.variational);
}

TEST_CASE("init honors freeze flags and starting values") {
    PolicyConfig config;
    config.trainable_input_weights = false;
    const PolicyParams params = init_policy(config, 3);
    CHECK_FALSE(params.input_weights_trainable);
    for (double w : params.input_weights) {
        CHECK(w == 1.0);
    }
    CHECK(params.output_weight == 1.0);
    for (double v : params.variational) {
        CHECK(v >= 0.0);
        CHECK(v < 2.0 * M_PI);
    }
}

TEST_CASE("default parameter count is 65") {
    PolicyConfig config;
    const PolicyParams params = init_policy(config, 1);
    CHECK(params.input_weights.size() == 16);  // 2 layers x 8 qubits
    CHECK(params.variational.size() == 48);    // 2 x 8 x 3
    CHECK(params.param_count() == 65);
}

TEST_CASE("default circuit has 80 gates") {
    PolicyConfig config;
    const PolicyParams params = init_policy(config, 1);
    Rng rng(11);
    const Circuit c = build_circuit(config, random_normalized_features(rng),
                                    params);
    CHECK(c.ops.size() == 80); // 2 * (8 RX + 24 rotations + 8 CNOT)
    std::size_t rx_count = 0, cnot_count = 0;
    for (const auto &op : c.ops) {
        rx_count += op.kind == GateKind::RX ? 1 : 0;
        cnot_count += op.kind == GateKind::CNOT ? 1 : 0;
    }
    CHECK(rx_count == 16);
    CHECK(cnot_count == 16);
}

TEST_CASE("no reuploading drops to 72 gates and one encoding row") {
    PolicyConfig config;
    config.data_reuploading = false;
    const PolicyParams params = init_policy(config, 1);
    CHECK(params.input_weights.size() == 8);
    Rng rng(12);
    const Circuit c = build_circuit(config, random_normalized_features(rng),
                                    params);
    CHECK(c.ops.size() == 72);
    std::size_t rx_count = 0;
    for (const auto &op : c.ops) {
        rx_count += op.kind == GateKind::RX ? 1 : 0;
    }
    CHECK(rx_count == 8);
}

TEST_CASE("single layer circuit structure") {
    PolicyConfig config;
    config.n_layers = 1;
    const PolicyParams params = init_policy(config, 1);
    Rng rng(13);
    const Circuit c = build_circuit(config, random_normalized_features(rng),
                                    params);
    REQUIRE(c.ops.size() == 40);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(c.ops[i].kind == GateKind::RX);
    }
    for (std::size_t i = 32; i < 40; ++i) {
        CHECK(c.ops[i].kind == GateKind::CNOT);
    }
}

TEST_CASE("act with zero weights returns the output weight") {
    PolicyConfig config;
    config.action_clip = 0.0;
    PolicyParams params = init_policy(config, 1);
    std::fill(params.input_weights.begin(), params.input_weights.end(), 0.0);
    std::fill(params.variational.begin(), params.variational.end(), 0.0);
    params.output_weight = 1.7;
    Rng rng(14);
    const FeatureVector f = random_normalized_features(rng);
    CHECK(act(config, params, f) == doctest::Approx(1.7).epsilon(1e-14));
}

TEST_CASE("zero output weight gives zero action") {
    PolicyConfig config;
    PolicyParams params = random_params(config, 21);
    params.output_weight = 0.0;
    Rng rng(15);
    for (int i = 0; i < 5; ++i) {
        CHECK(act(config, params, random_normalized_features(rng)) == 0.0);
    }
}

TEST_CASE("one-qubit policy matches the 2x2 matrix oracle") {
    PolicyConfig config;
    config.n_qubits = 1;
    config.n_layers = 1;
    config.action_clip = 0.0;
    PolicyParams params = random_params(config, 33);
    Rng rng(16);
    FeatureVector f = random_normalized_features(rng);

    // Circuit: RX(w x) RZ(a) RY(b) RZ(c) on |0>, measure Z.
    const double w = params.input_weights[0];
    const double a = params.variational[0];
    const double b = params.variational[1];
    const double c = params.variational[2];
    const Mat2 u =
        matmul(rz(c), matmul(ry(b), matmul(rz(a), rx(w * f.p))));
    const std::complex<double> amp0 = u[0][0];
    const std::complex<double> amp1 = u[1][0];
    const double expected_z = std::norm(amp0) - std::norm(amp1);
    const double expected_action = params.output_weight * expected_z;

    CHECK(act(config, params, f) ==
          doctest::Approx(expected_action).epsilon(1e-10));
}

TEST_CASE("gradient of the output weight is the expectation") {
    PolicyConfig config;
    PolicyParams params = init_policy(config, 4);
    std::fill(params.input_weights.begin(), params.input_weights.end(), 0.0);
    std::fill(params.variational.begin(), params.variational.end(), 0.0);
    Rng rng(17);
    const PolicyGradient g =
        policy_gradient(config, params, random_normalized_features(rng));
    CHECK(g.output_weight == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero feature kills its input-weight gradient") {
    PolicyConfig config;
    config.action_clip = 0.0;
    PolicyParams params = random_params(config, 5);
    Rng rng(18);
    FeatureVector f = random_normalized_features(rng);
    f.p = 0.0; // feature 0 drives input weights w[., 0]
    const PolicyGradient g = policy_gradient(config, params, f);
    CHECK(g.input_weights[0] == 0.0);
    CHECK(g.input_weights[8] == 0.0); // second layer row
}

TEST_CASE("full policy gradient matches finite differences") {
    PolicyConfig config;
    config.action_clip = 0.0;
    PolicyParams params = random_params(config, 3);
    Rng rng(3);
    const FeatureVector f = random_normalized_features(rng);
    const PolicyGradient g = policy_gradient(config, params, f);
    const std::vector<double> analytic = g.flatten();

    std::vector<double> flat = params.flatten();
    std::vector<double> fd(flat.size(), 0.0);
    const double h = 1e-5;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        PolicyParams perturbed = params;
        std::vector<double> tmp = flat;
        tmp[i] += h;
        perturbed.unflatten(tmp);
        const double plus = act(config, perturbed, f);
        tmp[i] = flat[i] - h;
        perturbed.unflatten(tmp);
        const double minus = act(config, perturbed, f);
        fd[i] = (plus - minus) / (2.0 * h);
    }
    CHECK(max_rel_diff(analytic, fd, 1e-3) < 1e-5);
}

TEST_CASE("gradient matches finite differences on random pairs") {
    PolicyConfig config;
    config.action_clip = 0.0;
    Rng rng(50);
    for (int trial = 0; trial < 50; ++trial) {
        PolicyParams params = random_params(config, 1000 + trial);
        const FeatureVector f = random_normalized_features(rng);
        const std::vector<double> analytic =
            policy_gradient(config, params, f).flatten();

        // Spot-check five random coordinates per pair to keep runtime sane.
        std::vector<double> flat = params.flatten();
        for (int probe = 0; probe < 5; ++probe) {
            const std::size_t i = rng.uniform_index(flat.size());
            const double h = 1e-5;
            PolicyParams perturbed = params;
            std::vector<double> tmp = flat;
            tmp[i] += h;
            perturbed.unflatten(tmp);
            const double plus = act(config, perturbed, f);
            tmp[i] = flat[i] - h;
            perturbed.unflatten(tmp);
            const double minus = act(config, perturbed, f);
            const double fd = (plus - minus) / (2.0 * h);
            const double scale =
                std::max({std::abs(analytic[i]), std::abs(fd), 1e-3});
            CHECK(std::abs(analytic[i] - fd) / scale < 1e-5);
        }
    }
}

TEST_CASE("action bound holds for any parameters") {
    PolicyConfig config;
    config.action_clip = 0.0;
    Rng rng(60);
    for (int trial = 0; trial < 25; ++trial) {
        const PolicyParams params = random_params(config, 2000 + trial);
        const FeatureVector f = random_normalized_features(rng);
        const double action = act(config, params, f);
        CHECK(std::abs(action) <= std::abs(params.output_weight) + 1e-12);
    }
}

TEST_CASE("action clip saturates the output") {
    PolicyConfig config;
    config.action_clip = 0.5;
    PolicyParams params = init_policy(config, 9);
    std::fill(params.input_weights.begin(), params.input_weights.end(), 0.0);
    std::fill(params.variational.begin(), params.variational.end(), 0.0);
    params.output_weight = 3.0; // unclipped action would be 3.0
    Rng rng(61);
    CHECK(act(config, params, random_normalized_features(rng)) == 0.5);
}

TEST_CASE("normalize maps bounds onto pi and clamps") {
    NormalizationSpec spec;
    FeatureVector raw;
    raw.p = spec.bound_p;
    FeatureVector n = normalize_features(raw, spec);
    CHECK(n.p == doctest::Approx(M_PI).epsilon(1e-15));

    FeatureVector zero;
    const FeatureVector nz = normalize_features(zero, spec);
    CHECK(nz.p == 0.0);
    CHECK(nz.p_dot == 0.0);
    CHECK(nz.theta_dot == 0.0);
    CHECK(nz.a_prev1 == 0.0);

    raw.p = 2.0 * spec.bound_p;
    CHECK(normalize_features(raw, spec).p == doctest::Approx(M_PI));

    NormalizationSpec bad;
    bad.bound_p_dot = 0.0;
    CHECK_THROWS_AS(normalize_features(raw, bad), ConfigError);
}

TEST_CASE("reuploading changes the function") {
    PolicyConfig with;
    with.action_clip = 0.0;
    PolicyConfig without = with;
    without.data_reuploading = false;

    // Shared variational angles; the no-reuploading circuit sees the first
    // input-weight row.
    bool found = false;
    Rng rng(70);
    for (int trial = 0; trial < 10 && !found; ++trial) {
        PolicyParams pw = random_params(with, 3000 + trial);
        PolicyParams po = init_policy(without, 3000 + trial);
        po.variational = pw.variational;
        std::copy_n(pw.input_weights.begin(), po.input_weights.size(),
                    po.input_weights.begin());
        po.output_weight = pw.output_weight;
        const FeatureVector f = random_normalized_features(rng);
        if (std::abs(act(with, pw, f) - act(without, po, f)) > 1e-3) {
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("circuit is sensitive to feature order") {
    PolicyConfig config;
    config.action_clip = 0.0;
    const PolicyParams params = random_params(config, 4000);
    Rng rng(80);
    FeatureVector f = random_normalized_features(rng);
    FeatureVector permuted = f;
    std::swap(permuted.p, permuted.theta_dot);
    CHECK(std::abs(act(config, params, f) - act(config, params, permuted)) >
          1e-6);
}

TEST_CASE("checkpoint round trip") {
    PolicyCheckpoint ckpt;
    ckpt.config.action_clip = 0.75;
    ckpt.params = random_params(ckpt.config, 5);
    ckpt.normalization.bound_p_dot = 4.5;
    ckpt.seed = 1234;
    ckpt.step = 42;

    const auto path = std::filesystem::temp_directory_path() /
                      "qpole_policy_ckpt_test.json";
    save_policy_checkpoint(ckpt, path.string());
    const PolicyCheckpoint loaded = load_policy_checkpoint(path.string());
    CHECK(loaded.params.input_weights == ckpt.params.input_weights);
    CHECK(loaded.params.variational == ckpt.params.variational);
    CHECK(loaded.params.output_weight == ckpt.params.output_weight);
    CHECK(loaded.config.action_clip == 0.75);
    CHECK(loaded.normalization.bound_p_dot == 4.5);
    CHECK(loaded.seed == 1234);
    CHECK(loaded.step == 42);
    std::filesystem::remove(path);
}

TEST_CASE("non-finite features are a numeric error") {
    PolicyConfig config;
    const PolicyParams params = init_policy(config, 6);
    FeatureVector f;
    f.p_dot = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(act(config, params, f), NumericError);
}

} // TEST_SUITE
