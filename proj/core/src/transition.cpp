#include "qpole/transition.hpp"

#include <algorithm>
#include <cmath>

#include "qpole/errors.hpp"

namespace qpole {

namespace {

constexpr int kIn = TransitionNet::kInputDim;
constexpr int kOut = TransitionNet::kOutputDim;

double activate(TransitionNet::Activation act, double x) {
    return act == TransitionNet::Activation::Tanh ? std::tanh(x) : x;
}

double activate_grad(TransitionNet::Activation act, double y) {
    // y is the activation output; tanh' = 1 - tanh^2.
    return act == TransitionNet::Activation::Tanh ? 1.0 - y * y : 1.0;
}

std::array<double, kIn> standardized_input(const TransitionNet &net,
                                           const FeatureVector &s, double a) {
    std::array<double, kIn> z{};
    const auto x = s.to_array();
    for (int i = 0; i < FeatureVector::kDim; ++i) {
        z[i] = (x[static_cast<std::size_t>(i)] - net.in_mean[i]) / net.in_std[i];
    }
    z[kIn - 1] = (a - net.in_mean[kIn - 1]) / net.in_std[kIn - 1];
    return z;
}

} // namespace

TransitionNet TransitionNet::zeros(int hidden) {
    TransitionNet net;
    net.hidden = hidden;
    net.w1.assign(static_cast<std::size_t>(hidden) * kIn, 0.0);
    net.b1.assign(hidden, 0.0);
    net.w2.assign(static_cast<std::size_t>(hidden) * hidden, 0.0);
    net.b2.assign(hidden, 0.0);
    net.w3.assign(static_cast<std::size_t>(kOut) * hidden, 0.0);
    net.b3.assign(kOut, 0.0);
    net.in_mean.fill(0.0);
    net.in_std.fill(1.0);
    net.out_mean.fill(0.0);
    net.out_std.fill(1.0);
    return net;
}

std::size_t TransitionNet::param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() +
           b3.size();
}

bool TransitionNet::all_finite() const {
    auto ok = [](const std::vector<double> &v) {
        return std::all_of(v.begin(), v.end(),
                           [](double x) { return std::isfinite(x); });
    };
    return ok(w1) && ok(b1) && ok(w2) && ok(b2) && ok(w3) && ok(b3);
}

Delta5 net_forward(const TransitionNet &net, const FeatureVector &s, double a) {
    if (!s.all_finite() || !std::isfinite(a)) {
        throw NumericError("non-finite transition-model input");
    }
    const int h = net.hidden;
    const auto z = standardized_input(net, s, a);

    std::vector<double> h1(h), h2(h);
    for (int r = 0; r < h; ++r) {
        double acc = net.b1[static_cast<std::size_t>(r)];
        const double *row = &net.w1[static_cast<std::size_t>(r) * kIn];
        for (int c = 0; c < kIn; ++c) {
            acc += row[c] * z[static_cast<std::size_t>(c)];
        }
        h1[static_cast<std::size_t>(r)] = activate(net.activation, acc);
    }
    for (int r = 0; r < h; ++r) {
        double acc = net.b2[static_cast<std::size_t>(r)];
        const double *row = &net.w2[static_cast<std::size_t>(r) * h];
        for (int c = 0; c < h; ++c) {
            acc += row[c] * h1[static_cast<std::size_t>(c)];
        }
        h2[static_cast<std::size_t>(r)] = activate(net.activation, acc);
    }
    Delta5 delta{};
    for (int r = 0; r < kOut; ++r) {
        double acc = net.b3[static_cast<std::size_t>(r)];
        const double *row = &net.w3[static_cast<std::size_t>(r) * h];
        for (int c = 0; c < h; ++c) {
            acc += row[c] * h2[static_cast<std::size_t>(c)];
        }
        delta[static_cast<std::size_t>(r)] =
            acc * net.out_std[static_cast<std::size_t>(r)] +
            net.out_mean[static_cast<std::size_t>(r)];
    }
    return delta;
}

NetInputGradient net_backward(const TransitionNet &net, const FeatureVector &s,
                              double a, const Delta5 &upstream_delta_grad) {
    const int h = net.hidden;
    const auto z = standardized_input(net, s, a);

    // Forward with cached activations.
    std::vector<double> h1(h), h2(h);
    for (int r = 0; r < h; ++r) {
        double acc = net.b1[static_cast<std::size_t>(r)];
        const double *row = &net.w1[static_cast<std::size_t>(r) * kIn];
        for (int c = 0; c < kIn; ++c) {
            acc += row[c] * z[static_cast<std::size_t>(c)];
        }
        h1[static_cast<std::size_t>(r)] = activate(net.activation, acc);
    }
    for (int r = 0; r < h; ++r) {
        double acc = net.b2[static_cast<std::size_t>(r)];
        const double *row = &net.w2[static_cast<std::size_t>(r) * h];
        for (int c = 0; c < h; ++c) {
            acc += row[c] * h1[static_cast<std::size_t>(c)];
        }
        h2[static_cast<std::size_t>(r)] = activate(net.activation, acc);
    }

    // Upstream through de-standardization, then the linear head.
    std::array<double, kOut> dy{};
    for (int r = 0; r < kOut; ++r) {
        dy[static_cast<std::size_t>(r)] =
            upstream_delta_grad[static_cast<std::size_t>(r)] *
            net.out_std[static_cast<std::size_t>(r)];
    }
    std::vector<double> dh2(h, 0.0), dh1(h, 0.0);
    for (int r = 0; r < kOut; ++r) {
        const double *row = &net.w3[static_cast<std::size_t>(r) * h];
        const double g = dy[static_cast<std::size_t>(r)];
        for (int c = 0; c < h; ++c) {
            dh2[static_cast<std::size_t>(c)] += row[c] * g;
        }
    }
    for (int r = 0; r < h; ++r) {
        dh2[static_cast<std::size_t>(r)] *=
            activate_grad(net.activation, h2[static_cast<std::size_t>(r)]);
    }
    for (int r = 0; r < h; ++r) {
        const double *row = &net.w2[static_cast<std::size_t>(r) * h];
        const double g = dh2[static_cast<std::size_t>(r)];
        for (int c = 0; c < h; ++c) {
            dh1[static_cast<std::size_t>(c)] += row[c] * g;
        }
    }
    for (int r = 0; r < h; ++r) {
        dh1[static_cast<std::size_t>(r)] *=
            activate_grad(net.activation, h1[static_cast<std::size_t>(r)]);
    }
    std::array<double, kIn> dz{};
    for (int r = 0; r < h; ++r) {
        const double *row = &net.w1[static_cast<std::size_t>(r) * kIn];
        const double g = dh1[static_cast<std::size_t>(r)];
        for (int c = 0; c < kIn; ++c) {
            dz[static_cast<std::size_t>(c)] += row[c] * g;
        }
    }

    NetInputGradient grad;
    for (int i = 0; i < FeatureVector::kDim; ++i) {
        grad.d_state[static_cast<std::size_t>(i)] =
            dz[static_cast<std::size_t>(i)] / net.in_std[i];
    }
    grad.d_action = dz[kIn - 1] / net.in_std[kIn - 1];
    return grad;
}

FeatureVector step_features(const FeatureVector &s, double a,
                            const Delta5 &delta) {
    const double c = s.cos_theta + delta[2];
    const double sn = s.sin_theta + delta[3];
    const double norm = std::hypot(c, sn);
    if (!(norm >= 1e-6)) {
        throw NumericError("degenerate (cos, sin) after delta update");
    }
    FeatureVector out;
    out.p = s.p + delta[0];
    out.p_dot = s.p_dot + delta[1];
    out.cos_theta = c / norm;
    out.sin_theta = sn / norm;
    out.theta_dot = s.theta_dot + delta[4];
    out.a_prev3 = s.a_prev2;
    out.a_prev2 = s.a_prev1;
    out.a_prev1 = a;
    return out;
}

StepBackward step_features_backward(
    const FeatureVector &s, double a, const Delta5 &delta,
    const std::array<double, FeatureVector::kDim> &upstream) {
    (void)a;
    const double c = s.cos_theta + delta[2];
    const double sn = s.sin_theta + delta[3];
    const double norm = std::hypot(c, sn);
    if (!(norm >= 1e-6)) {
        throw NumericError("degenerate (cos, sin) after delta update");
    }
    // out = u / |u| has Jacobian (I - out out^T) / |u|.
    const double oc = c / norm;
    const double os = sn / norm;
    const double inv = 1.0 / norm;
    const double d_c = inv * ((1.0 - oc * oc) * upstream[2] - oc * os * upstream[3]);
    const double d_s = inv * ((1.0 - os * os) * upstream[3] - oc * os * upstream[2]);

    StepBackward back;
    back.d_state[0] = upstream[0];
    back.d_state[1] = upstream[1];
    back.d_state[2] = d_c;
    back.d_state[3] = d_s;
    back.d_state[4] = upstream[4];
    // History roll: out.a_prev3 = s.a_prev2, out.a_prev2 = s.a_prev1.
    back.d_state[6] = upstream[5];
    back.d_state[7] = upstream[6];
    back.d_action = upstream[7];
    back.d_delta = {upstream[0], upstream[1], d_c, d_s, upstream[4]};
    return back;
}

} // namespace qpole
