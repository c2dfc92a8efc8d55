#include "qpole/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "qpole/errors.hpp"
#include "qpole/optimizer.hpp"
#include "qpole/parallel.hpp"
#include "qpole/rng.hpp"

namespace qpole {

namespace {

constexpr int kIn = TransitionNet::kInputDim;
constexpr int kOut = TransitionNet::kOutputDim;

struct Standardization {
    std::array<double, kIn> in_mean{}, in_std{};
    std::array<double, kOut> out_mean{}, out_std{};
};

Delta5 raw_delta(const TransitionSample &sample) {
    return {sample.s_next.p - sample.s.p,
            sample.s_next.p_dot - sample.s.p_dot,
            sample.s_next.cos_theta - sample.s.cos_theta,
            sample.s_next.sin_theta - sample.s.sin_theta,
            sample.s_next.theta_dot - sample.s.theta_dot};
}

std::array<double, kIn> raw_input(const TransitionSample &sample) {
    std::array<double, kIn> x{};
    const auto s = sample.s.to_array();
    std::copy(s.begin(), s.end(), x.begin());
    x[kIn - 1] = sample.a;
    return x;
}

Standardization compute_stats(std::span<const TransitionSample> samples) {
    Standardization st;
    const double n = static_cast<double>(samples.size());
    for (const auto &sample : samples) {
        const auto x = raw_input(sample);
        const auto d = raw_delta(sample);
        for (int i = 0; i < kIn; ++i) {
            st.in_mean[i] += x[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < kOut; ++i) {
            st.out_mean[i] += d[static_cast<std::size_t>(i)];
        }
    }
    for (auto &v : st.in_mean) {
        v /= n;
    }
    for (auto &v : st.out_mean) {
        v /= n;
    }
    for (const auto &sample : samples) {
        const auto x = raw_input(sample);
        const auto d = raw_delta(sample);
        for (int i = 0; i < kIn; ++i) {
            const double diff = x[static_cast<std::size_t>(i)] - st.in_mean[i];
            st.in_std[i] += diff * diff;
        }
        for (int i = 0; i < kOut; ++i) {
            const double diff = d[static_cast<std::size_t>(i)] - st.out_mean[i];
            st.out_std[i] += diff * diff;
        }
    }
    for (auto &v : st.in_std) {
        v = std::max(std::sqrt(v / n), 1e-8);
    }
    for (auto &v : st.out_std) {
        v = std::max(std::sqrt(v / n), 1e-8);
    }
    return st;
}

struct NetGradients {
    std::vector<double> w1, b1, w2, b2, w3, b3;

    explicit NetGradients(const TransitionNet &net)
        : w1(net.w1.size(), 0.0), b1(net.b1.size(), 0.0),
          w2(net.w2.size(), 0.0), b2(net.b2.size(), 0.0),
          w3(net.w3.size(), 0.0), b3(net.b3.size(), 0.0) {}

    void clear() {
        auto zero = [](std::vector<double> &v) {
            std::fill(v.begin(), v.end(), 0.0);
        };
        zero(w1);
        zero(b1);
        zero(w2);
        zero(b2);
        zero(w3);
        zero(b3);
    }
};

// Forward + parameter backprop on standardized data. Returns the sample's
// squared-error sum over output dims and accumulates parameter gradients of
// 0.5 * sum (y - t)^2.
double backprop_sample(const TransitionNet &net,
                       const std::array<double, kIn> &z,
                       const std::array<double, kOut> &target,
                       NetGradients &grads) {
    const int h = net.hidden;
    std::vector<double> h1(h), h2(h);
    std::array<double, kOut> y{};
    for (int r = 0; r < h; ++r) {
        double acc = net.b1[static_cast<std::size_t>(r)];
        const double *row = &net.w1[static_cast<std::size_t>(r) * kIn];
        for (int c = 0; c < kIn; ++c) {
            acc += row[c] * z[static_cast<std::size_t>(c)];
        }
        h1[static_cast<std::size_t>(r)] = std::tanh(acc);
    }
    for (int r = 0; r < h; ++r) {
        double acc = net.b2[static_cast<std::size_t>(r)];
        const double *row = &net.w2[static_cast<std::size_t>(r) * h];
        for (int c = 0; c < h; ++c) {
            acc += row[c] * h1[static_cast<std::size_t>(c)];
        }
        h2[static_cast<std::size_t>(r)] = std::tanh(acc);
    }
    double sq_err = 0.0;
    std::array<double, kOut> dy{};
    for (int r = 0; r < kOut; ++r) {
        double acc = net.b3[static_cast<std::size_t>(r)];
        const double *row = &net.w3[static_cast<std::size_t>(r) * h];
        for (int c = 0; c < h; ++c) {
            acc += row[c] * h2[static_cast<std::size_t>(c)];
        }
        y[static_cast<std::size_t>(r)] = acc;
        const double err =
            acc - target[static_cast<std::size_t>(r)];
        sq_err += err * err;
        dy[static_cast<std::size_t>(r)] = err;
    }

    std::vector<double> dh2(h, 0.0), dh1(h, 0.0);
    for (int r = 0; r < kOut; ++r) {
        const double g = dy[static_cast<std::size_t>(r)];
        double *wrow = &grads.w3[static_cast<std::size_t>(r) * h];
        const double *row = &net.w3[static_cast<std::size_t>(r) * h];
        for (int c = 0; c < h; ++c) {
            wrow[c] += g * h2[static_cast<std::size_t>(c)];
            dh2[static_cast<std::size_t>(c)] += row[c] * g;
        }
        grads.b3[static_cast<std::size_t>(r)] += g;
    }
    for (int r = 0; r < h; ++r) {
        dh2[static_cast<std::size_t>(r)] *=
            1.0 - h2[static_cast<std::size_t>(r)] * h2[static_cast<std::size_t>(r)];
    }
    for (int r = 0; r < h; ++r) {
        const double g = dh2[static_cast<std::size_t>(r)];
        double *wrow = &grads.w2[static_cast<std::size_t>(r) * h];
        const double *row = &net.w2[static_cast<std::size_t>(r) * h];
        for (int c = 0; c < h; ++c) {
            wrow[c] += g * h1[static_cast<std::size_t>(c)];
            dh1[static_cast<std::size_t>(c)] += row[c] * g;
        }
        grads.b2[static_cast<std::size_t>(r)] += g;
    }
    for (int r = 0; r < h; ++r) {
        dh1[static_cast<std::size_t>(r)] *=
            1.0 - h1[static_cast<std::size_t>(r)] * h1[static_cast<std::size_t>(r)];
    }
    for (int r = 0; r < h; ++r) {
        const double g = dh1[static_cast<std::size_t>(r)];
        double *wrow = &grads.w1[static_cast<std::size_t>(r) * kIn];
        for (int c = 0; c < kIn; ++c) {
            wrow[c] += g * z[static_cast<std::size_t>(c)];
        }
        grads.b1[static_cast<std::size_t>(r)] += g;
    }
    return sq_err;
}

TransitionNet init_net(int hidden, double init_scale, Rng &rng) {
    TransitionNet net = TransitionNet::zeros(hidden);
    auto xavier = [&](std::vector<double> &w, int fan_in, int fan_out) {
        const double half_width =
            init_scale * std::sqrt(6.0 / double(fan_in + fan_out));
        for (auto &v : w) {
            v = rng.uniform(-half_width, half_width);
        }
    };
    xavier(net.w1, kIn, hidden);
    xavier(net.w2, hidden, hidden);
    xavier(net.w3, hidden, kOut);
    return net;
}

} // namespace

TransitionEnsemble train_ensemble(std::span<const TransitionSample> samples,
                                  int k, const EnsembleTrainConfig &config,
                                  std::uint64_t seed) {
    if (k < 1) {
        throw ConfigError("ensemble size must be >= 1");
    }
    if (samples.empty()) {
        throw DataError("cannot train an ensemble on an empty dataset");
    }
    if (config.hidden < 1 || config.batch_size < 1 || config.epochs < 0) {
        throw ConfigError("bad ensemble training configuration");
    }

    const Standardization stats = compute_stats(samples);
    const std::size_t n = samples.size();

    // Standardize once; every model trains on views of these.
    std::vector<std::array<double, kIn>> inputs(n);
    std::vector<std::array<double, kOut>> targets(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = raw_input(samples[i]);
        const auto d = raw_delta(samples[i]);
        for (int j = 0; j < kIn; ++j) {
            inputs[i][static_cast<std::size_t>(j)] =
                (x[static_cast<std::size_t>(j)] - stats.in_mean[j]) /
                stats.in_std[j];
        }
        for (int j = 0; j < kOut; ++j) {
            targets[i][static_cast<std::size_t>(j)] =
                (d[static_cast<std::size_t>(j)] - stats.out_mean[j]) /
                stats.out_std[j];
        }
    }

    TransitionEnsemble ensemble;
    ensemble.models.resize(static_cast<std::size_t>(k));
    ensemble.seeds.resize(static_cast<std::size_t>(k));
    ensemble.final_mse.resize(static_cast<std::size_t>(k));
    {
        std::uint64_t sm = seed;
        for (int i = 0; i < k; ++i) {
            ensemble.seeds[static_cast<std::size_t>(i)] = splitmix64(sm);
        }
    }

    const unsigned workers =
        config.workers == 0 ? default_workers() : config.workers;
    parallel_for(static_cast<std::size_t>(k), workers, [&](std::size_t model_idx) {
        Rng rng(ensemble.seeds[model_idx]);
        TransitionNet net = init_net(config.hidden, config.init_scale, rng);
        net.in_mean = stats.in_mean;
        net.in_std = stats.in_std;
        net.out_mean = stats.out_mean;
        net.out_std = stats.out_std;

        // Bootstrap resample with replacement.
        std::vector<std::size_t> boot(n);
        for (auto &idx : boot) {
            idx = rng.uniform_index(n);
        }

        AdamConfig adam_config;
        adam_config.learning_rate = config.learning_rate;
        AdamState adam_w1(net.w1.size()), adam_b1(net.b1.size());
        AdamState adam_w2(net.w2.size()), adam_b2(net.b2.size());
        AdamState adam_w3(net.w3.size()), adam_b3(net.b3.size());
        NetGradients grads(net);

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) {
            order[i] = i;
        }
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            // Fisher-Yates shuffle of the bootstrap order.
            for (std::size_t i = n; i > 1; --i) {
                const std::size_t j = rng.uniform_index(i);
                std::swap(order[i - 1], order[j]);
            }
            for (std::size_t start = 0; start < n;
                 start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t stop = std::min(
                    n, start + static_cast<std::size_t>(config.batch_size));
                grads.clear();
                for (std::size_t i = start; i < stop; ++i) {
                    const std::size_t sample_idx = boot[order[i]];
                    backprop_sample(net, inputs[sample_idx],
                                    targets[sample_idx], grads);
                }
                const double inv = 1.0 / double(stop - start);
                auto scale = [&](std::vector<double> &g) {
                    for (auto &v : g) {
                        v *= inv;
                    }
                };
                scale(grads.w1);
                scale(grads.b1);
                scale(grads.w2);
                scale(grads.b2);
                scale(grads.w3);
                scale(grads.b3);
                adam_update(net.w1, grads.w1, adam_w1, adam_config);
                adam_update(net.b1, grads.b1, adam_b1, adam_config);
                adam_update(net.w2, grads.w2, adam_w2, adam_config);
                adam_update(net.b2, grads.b2, adam_b2, adam_config);
                adam_update(net.w3, grads.w3, adam_w3, adam_config);
                adam_update(net.b3, grads.b3, adam_b3, adam_config);
            }
        }

        // Final training MSE over the bootstrap set, per standardized dim.
        NetGradients scratch(net);
        double total_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            scratch.clear();
            total_sq += backprop_sample(net, inputs[boot[i]], targets[boot[i]],
                                        scratch);
        }
        ensemble.final_mse[model_idx] = total_sq / double(n * kOut);
        ensemble.models[model_idx] = std::move(net);
    });
    return ensemble;
}

double ensemble_disagreement(const TransitionEnsemble &ensemble,
                             const FeatureVector &s, double a) {
    const int k = ensemble.size();
    if (k < 2) {
        throw ConfigError("disagreement needs at least two models");
    }
    std::vector<Delta5> preds(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        preds[static_cast<std::size_t>(i)] =
            net_forward(ensemble.models[static_cast<std::size_t>(i)], s, a);
    }
    double acc = 0.0;
    for (int dim = 0; dim < kOut; ++dim) {
        double mean = 0.0;
        for (int i = 0; i < k; ++i) {
            mean += preds[static_cast<std::size_t>(i)]
                         [static_cast<std::size_t>(dim)];
        }
        mean /= k;
        double var = 0.0;
        for (int i = 0; i < k; ++i) {
            const double diff = preds[static_cast<std::size_t>(i)]
                                     [static_cast<std::size_t>(dim)] -
                                mean;
            var += diff * diff;
        }
        acc += std::sqrt(var / k);
    }
    return acc / kOut;
}

namespace {

void hash_doubles(EVP_MD_CTX *ctx, std::span<const double> values) {
    EVP_DigestUpdate(ctx, values.data(), values.size() * sizeof(double));
}

} // namespace

std::string ensemble_param_hash(const TransitionEnsemble &ensemble) {
    EVP_MD_CTX *ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    for (const auto &net : ensemble.models) {
        hash_doubles(ctx, net.w1);
        hash_doubles(ctx, net.b1);
        hash_doubles(ctx, net.w2);
        hash_doubles(ctx, net.b2);
        hash_doubles(ctx, net.w3);
        hash_doubles(ctx, net.b3);
        hash_doubles(ctx, net.in_mean);
        hash_doubles(ctx, net.in_std);
        hash_doubles(ctx, net.out_mean);
        hash_doubles(ctx, net.out_std);
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    static const char *hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {

nlohmann::json net_to_json(const TransitionNet &net, std::uint64_t seed,
                           double final_mse) {
    return {{"format", "qpole-transition-v1"},
            {"seed", seed},
            {"hidden", net.hidden},
            {"input_dim", TransitionNet::kInputDim},
            {"output_dim", TransitionNet::kOutputDim},
            {"w1", net.w1},
            {"b1", net.b1},
            {"w2", net.w2},
            {"b2", net.b2},
            {"w3", net.w3},
            {"b3", net.b3},
            {"in_mean", net.in_mean},
            {"in_std", net.in_std},
            {"out_mean", net.out_mean},
            {"out_std", net.out_std},
            {"final_mse", final_mse}};
}

TransitionNet net_from_json(const nlohmann::json &j) {
    if (j.value("format", "") != "qpole-transition-v1") {
        throw DataError("unknown transition model format");
    }
    TransitionNet net;
    net.hidden = j.at("hidden").get<int>();
    net.w1 = j.at("w1").get<std::vector<double>>();
    net.b1 = j.at("b1").get<std::vector<double>>();
    net.w2 = j.at("w2").get<std::vector<double>>();
    net.b2 = j.at("b2").get<std::vector<double>>();
    net.w3 = j.at("w3").get<std::vector<double>>();
    net.b3 = j.at("b3").get<std::vector<double>>();
    net.in_mean = j.at("in_mean").get<std::array<double, kIn>>();
    net.in_std = j.at("in_std").get<std::array<double, kIn>>();
    net.out_mean = j.at("out_mean").get<std::array<double, kOut>>();
    net.out_std = j.at("out_std").get<std::array<double, kOut>>();
    if (!net.all_finite()) {
        throw DataError("transition model contains non-finite parameters");
    }
    return net;
}

} // namespace

void save_ensemble_checkpoint(const TransitionEnsemble &ensemble,
                              const std::string &path) {
    const std::filesystem::path manifest_path(path);
    const std::filesystem::path dir = manifest_path.parent_path();
    const std::string stem = manifest_path.stem().string();

    nlohmann::json manifest;
    manifest["format"] = "qpole-ensemble-v1";
    manifest["k"] = ensemble.size();
    manifest["seeds"] = ensemble.seeds;
    manifest["final_mse"] = ensemble.final_mse;
    if (!ensemble.models.empty()) {
        manifest["in_mean"] = ensemble.models.front().in_mean;
        manifest["in_std"] = ensemble.models.front().in_std;
        manifest["out_mean"] = ensemble.models.front().out_mean;
        manifest["out_std"] = ensemble.models.front().out_std;
    }
    std::vector<std::string> model_files;
    for (int i = 0; i < ensemble.size(); ++i) {
        model_files.push_back(stem + "_model" + std::to_string(i) + ".json");
    }
    manifest["models"] = model_files;

    for (int i = 0; i < ensemble.size(); ++i) {
        const auto model_path = dir / model_files[static_cast<std::size_t>(i)];
        std::ofstream out(model_path, std::ios::binary);
        if (!out) {
            throw DataError("cannot write model file: " + model_path.string());
        }
        out << net_to_json(ensemble.models[static_cast<std::size_t>(i)],
                           ensemble.seeds[static_cast<std::size_t>(i)],
                           ensemble.final_mse[static_cast<std::size_t>(i)])
                   .dump(2)
            << '\n';
    }
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write ensemble manifest: " + path);
    }
    out << manifest.dump(2) << '\n';
}

TransitionEnsemble load_ensemble_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open ensemble manifest: " + path);
    }
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception &e) {
        throw DataError("malformed ensemble manifest " + path + ": " + e.what());
    }
    if (manifest.value("format", "") != "qpole-ensemble-v1") {
        throw DataError("unknown ensemble manifest format in " + path);
    }
    TransitionEnsemble ensemble;
    ensemble.seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
    ensemble.final_mse = manifest.at("final_mse").get<std::vector<double>>();
    const auto files = manifest.at("models").get<std::vector<std::string>>();
    const std::filesystem::path dir =
        std::filesystem::path(path).parent_path();
    for (const auto &file : files) {
        std::ifstream model_in(dir / file, std::ios::binary);
        if (!model_in) {
            throw DataError("cannot open model file: " + (dir / file).string());
        }
        nlohmann::json j;
        try {
            model_in >> j;
        } catch (const nlohmann::json::exception &e) {
            throw DataError("malformed model file " + file + ": " + e.what());
        }
        ensemble.models.push_back(net_from_json(j));
    }
    if (ensemble.models.size() != ensemble.seeds.size() ||
        static_cast<int>(ensemble.models.size()) !=
            manifest.at("k").get<int>()) {
        throw DataError("ensemble manifest is inconsistent: " + path);
    }
    return ensemble;
}

} // namespace qpole
