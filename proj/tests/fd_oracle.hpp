#pragma once

// Test-only central finite-difference gradient oracle. Independent of the
// analytic backward pass: it only calls forward().

#include "empowerd/nn.hpp"

namespace empowerd::testing {

// Scalar objective L(theta) = seed . forward(net, input).
inline double probe_loss(const DenseNet& net, const Vec& input, const Vec& seed) {
    return seed.dot(forward(net, input));
}

struct FdCheck {
    double max_rel_err = 0.0;
    long partials = 0;
};

inline double rel_err(double analytic, double fd) {
    const double mag = std::max(std::abs(analytic), std::abs(fd));
    if (mag < 1e-10) return 0.0;
    return std::abs(analytic - fd) / mag;
}

// Compares every analytic partial (weights, biases, input) against a central
// difference with step h.
inline FdCheck finite_difference_check(DenseNet net, const Vec& input, const Vec& seed,
                                       double h = 1e-5) {
    const auto [grads, input_grad] = backward(net, input, seed);
    FdCheck check;

    auto probe_param = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double hi = probe_loss(net, input, seed);
        param = saved - h;
        const double lo = probe_loss(net, input, seed);
        param = saved;
        const double fd = (hi - lo) / (2.0 * h);
        check.max_rel_err = std::max(check.max_rel_err, rel_err(analytic, fd));
        check.partials += 1;
    };

    for (size_t k = 0; k < net.layer_count(); ++k) {
        for (int i = 0; i < net.weights[k].rows(); ++i)
            for (int j = 0; j < net.weights[k].cols(); ++j)
                probe_param(net.weights[k](i, j), grads.weights[k](i, j));
        for (int i = 0; i < net.biases[k].size(); ++i)
            probe_param(net.biases[k][i], grads.biases[k][i]);
    }

    Vec x = input;
    for (int i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double hi = probe_loss(net, x, seed);
        x[i] = saved - h;
        const double lo = probe_loss(net, x, seed);
        x[i] = saved;
        const double fd = (hi - lo) / (2.0 * h);
        check.max_rel_err = std::max(check.max_rel_err, rel_err(input_grad[i], fd));
        check.partials += 1;
    }
    return check;
}

}  // namespace empowerd::testing
