#pragma once

#include "empowerd/common.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

namespace empowerd {

// Fully connected network with relu hidden layers and a linear output layer.
// Parameters are plain values; forward/backward are pure functions so the
// same net can be shared read-only across threads between updates.
struct DenseNet {
    std::vector<int> layer_sizes;
    std::vector<Mat> weights;  // weights[k]: layer_sizes[k+1] x layer_sizes[k]
    std::vector<Vec> biases;   // biases[k]:  layer_sizes[k+1]

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    size_t layer_count() const { return weights.size(); }

    static DenseNet zeros(std::vector<int> sizes) {
        DenseNet net;
        net.layer_sizes = std::move(sizes);
        if (net.layer_sizes.size() < 2)
            throw InvalidInputError("DenseNet: need at least input and output layer");
        for (size_t k = 0; k + 1 < net.layer_sizes.size(); ++k) {
            if (net.layer_sizes[k] <= 0 || net.layer_sizes[k + 1] <= 0)
                throw InvalidInputError("DenseNet: layer sizes must be positive");
            net.weights.emplace_back(Mat::Zero(net.layer_sizes[k + 1], net.layer_sizes[k]));
            net.biases.emplace_back(Vec::Zero(net.layer_sizes[k + 1]));
        }
        return net;
    }

    // Uniform init in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))],
    // zero biases.
    static DenseNet xavier(std::vector<int> sizes, Rng& rng) {
        DenseNet net = zeros(std::move(sizes));
        for (size_t k = 0; k < net.weights.size(); ++k) {
            const double fan_in = static_cast<double>(net.layer_sizes[k]);
            const double fan_out = static_cast<double>(net.layer_sizes[k + 1]);
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (int i = 0; i < net.weights[k].rows(); ++i)
                for (int j = 0; j < net.weights[k].cols(); ++j) net.weights[k](i, j) = dist(rng);
        }
        return net;
    }
};

// Per-parameter gradient arrays, shape-congruent with the owning DenseNet.
struct Gradients {
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    static Gradients zeros_like(const DenseNet& net) {
        Gradients g;
        for (size_t k = 0; k < net.weights.size(); ++k) {
            g.weights.emplace_back(Mat::Zero(net.weights[k].rows(), net.weights[k].cols()));
            g.biases.emplace_back(Vec::Zero(net.biases[k].size()));
        }
        return g;
    }

    bool congruent_with(const DenseNet& net) const {
        if (weights.size() != net.weights.size() || biases.size() != net.biases.size())
            return false;
        for (size_t k = 0; k < weights.size(); ++k) {
            if (weights[k].rows() != net.weights[k].rows() ||
                weights[k].cols() != net.weights[k].cols() ||
                biases[k].size() != net.biases[k].size())
                return false;
        }
        return true;
    }

    bool finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }
};

namespace detail {

// Post-activation values per layer; acts[0] is the input batch (rows = samples).
struct Trace {
    std::vector<Mat> acts;
};

inline Trace forward_trace(const DenseNet& net, const Mat& inputs) {
    if (inputs.cols() != net.input_size())
        throw InvalidInputError("forward: input width " + std::to_string(inputs.cols()) +
                                " != layer size " + std::to_string(net.input_size()));
    Trace tr;
    tr.acts.resize(net.layer_count() + 1);
    tr.acts[0] = inputs;
    for (size_t k = 0; k < net.layer_count(); ++k) {
        Mat z = tr.acts[k] * net.weights[k].transpose();
        z.rowwise() += net.biases[k].transpose();
        if (k + 1 < net.layer_count()) z = z.cwiseMax(0.0);  // relu on hidden layers
        tr.acts[k + 1] = std::move(z);
    }
    return tr;
}

}  // namespace detail

// Batched forward pass: rows are samples.
inline Mat forward_batch(const DenseNet& net, const Mat& inputs) {
    return detail::forward_trace(net, inputs).acts.back();
}

inline Vec forward(const DenseNet& net, const Vec& input) {
    if (input.size() != net.input_size())
        throw InvalidInputError("forward: input length " + std::to_string(input.size()) +
                                " != layer size " + std::to_string(net.input_size()));
    Mat row = input.transpose();
    return forward_batch(net, row).row(0).transpose();
}

// Backpropagates `output_grads` (rows = samples, one seed row per sample)
// through the net. Parameter gradients are summed over the batch; callers
// scale the seeds when a mean is wanted. Returns per-sample input gradients.
inline std::pair<Gradients, Mat> backward_batch(const DenseNet& net, const Mat& inputs,
                                                const Mat& output_grads) {
    if (output_grads.cols() != net.output_size())
        throw InvalidInputError("backward: output gradient width " +
                                std::to_string(output_grads.cols()) + " != layer size " +
                                std::to_string(net.output_size()));
    if (output_grads.rows() != inputs.rows())
        throw InvalidInputError("backward: batch size mismatch between inputs and seeds");

    const detail::Trace tr = detail::forward_trace(net, inputs);
    Gradients grads = Gradients::zeros_like(net);

    // delta: gradient w.r.t. pre-activation of layer k+1 (output layer is
    // linear, so the seed passes straight through).
    Mat delta = output_grads;
    for (size_t k = net.layer_count(); k-- > 0;) {
        grads.weights[k].noalias() = delta.transpose() * tr.acts[k];
        grads.biases[k] = delta.colwise().sum().transpose();
        if (k > 0) {
            Mat prev = delta * net.weights[k];
            // relu derivative: 1 where the post-activation is positive
            prev.array() *= (tr.acts[k].array() > 0.0).cast<double>();
            delta = std::move(prev);
        } else {
            delta = delta * net.weights[0];
        }
    }
    return {std::move(grads), std::move(delta)};
}

inline std::pair<Gradients, Vec> backward(const DenseNet& net, const Vec& input,
                                          const Vec& output_grad) {
    if (input.size() != net.input_size())
        throw InvalidInputError("backward: input length mismatch");
    auto [grads, input_grads] = backward_batch(net, input.transpose(), output_grad.transpose());
    return {std::move(grads), input_grads.row(0).transpose()};
}

// Adam optimizer state, one slot per parameter array of the owning net.
struct AdamState {
    std::vector<Mat> first_moment;
    std::vector<Mat> second_moment;
    std::vector<Vec> first_moment_bias;
    std::vector<Vec> second_moment_bias;
    long step_count = 0;
    double learning_rate;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_stab = 1e-8;

    AdamState() : learning_rate(1e-3) {}

    AdamState(const DenseNet& net, double lr) : learning_rate(lr) {
        if (!(lr > 0.0)) throw InvalidInputError("AdamState: learning rate must be positive");
        for (size_t k = 0; k < net.weights.size(); ++k) {
            first_moment.emplace_back(Mat::Zero(net.weights[k].rows(), net.weights[k].cols()));
            second_moment.emplace_back(Mat::Zero(net.weights[k].rows(), net.weights[k].cols()));
            first_moment_bias.emplace_back(Vec::Zero(net.biases[k].size()));
            second_moment_bias.emplace_back(Vec::Zero(net.biases[k].size()));
        }
    }
};

namespace detail {

template <typename Arr>
void adam_apply(Arr& param, Arr& m, Arr& v, const Arr& grad, const AdamState& st,
                double bias1, double bias2) {
    m = st.beta1 * m + (1.0 - st.beta1) * grad;
    v = st.beta2 * v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
    param.array() -=
        st.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + st.epsilon_stab);
}

}  // namespace detail

// One Adam step with bias correction. Non-finite gradients reject the update
// before any state is touched; parameters are asserted finite afterwards.
inline void adam_step(DenseNet& net, AdamState& state, const Gradients& grads) {
    if (!grads.congruent_with(net))
        throw InvalidInputError("adam_step: gradient shapes do not match the net");
    if (state.first_moment.size() != net.weights.size())
        throw InvalidInputError("adam_step: optimizer state does not match the net");
    if (!grads.finite()) throw NumericFaultError("adam_step: non-finite gradient entries");

    state.step_count += 1;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (size_t k = 0; k < net.weights.size(); ++k) {
        detail::adam_apply(net.weights[k], state.first_moment[k], state.second_moment[k],
                           grads.weights[k], state, bias1, bias2);
        detail::adam_apply(net.biases[k], state.first_moment_bias[k], state.second_moment_bias[k],
                           grads.biases[k], state, bias1, bias2);
    }
    for (size_t k = 0; k < net.weights.size(); ++k)
        if (!net.weights[k].allFinite() || !net.biases[k].allFinite())
            throw NumericFaultError("adam_step: parameters became non-finite");
}

// ---------------------------------------------------------------------------
// Parameter snapshot file format: "EMPW" magic, u32 format version, u32 layer
// count, u32 layer sizes (little-endian), then per weight layer the matrix in
// row-major 64-bit little-endian floats followed by the bias vector.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kSnapshotVersion = 1;

inline void save_net(const DenseNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("save_net: cannot open " + path);
    out.write("EMPW", 4);
    auto put_u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(kSnapshotVersion);
    put_u32(static_cast<uint32_t>(net.layer_sizes.size()));
    for (int s : net.layer_sizes) put_u32(static_cast<uint32_t>(s));
    for (size_t k = 0; k < net.layer_count(); ++k) {
        for (int i = 0; i < net.weights[k].rows(); ++i)
            for (int j = 0; j < net.weights[k].cols(); ++j) {
                double v = net.weights[k](i, j);
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
        for (int i = 0; i < net.biases[k].size(); ++i) {
            double v = net.biases[k][i];
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    }
    if (!out) throw InvalidInputError("save_net: write failed for " + path);
}

inline DenseNet load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("load_net: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EMPW", 4) != 0)
        throw InvalidInputError("load_net: bad magic in " + path);
    auto get_u32 = [&]() {
        uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    const uint32_t version = get_u32();
    if (version != kSnapshotVersion)
        throw InvalidInputError("load_net: unsupported format version " + std::to_string(version));
    const uint32_t n_sizes = get_u32();
    if (n_sizes < 2 || n_sizes > 64) throw InvalidInputError("load_net: bad layer count");
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) s = static_cast<int>(get_u32());
    DenseNet net = DenseNet::zeros(sizes);
    for (size_t k = 0; k < net.layer_count(); ++k) {
        for (int i = 0; i < net.weights[k].rows(); ++i)
            for (int j = 0; j < net.weights[k].cols(); ++j) {
                double v;
                in.read(reinterpret_cast<char*>(&v), 8);
                net.weights[k](i, j) = v;
            }
        for (int i = 0; i < net.biases[k].size(); ++i) {
            double v;
            in.read(reinterpret_cast<char*>(&v), 8);
            net.biases[k][i] = v;
        }
    }
    if (!in) throw InvalidInputError("load_net: truncated file " + path);
    return net;
}

}  // namespace empowerd
