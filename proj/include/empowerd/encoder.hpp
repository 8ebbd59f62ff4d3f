#pragma once

#include "empowerd/common.hpp"
#include "empowerd/nn.hpp"

namespace empowerd {

// Fixed random projection e(.) from raw observations to a feature vector.
// Never trained; identical (seed, obs_dim, out_dim) always yields the same
// projection, so encoders can be rebuilt from a config instead of stored.
class RandomEncoder {
public:
    RandomEncoder(int obs_dim, uint64_t seed, int out_dim = 64)
        : obs_dim_(obs_dim), out_dim_(out_dim), seed_(seed) {
        if (obs_dim <= 0 || out_dim <= 0)
            throw InvalidInputError("RandomEncoder: dimensions must be positive");
        Rng rng(seed);
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(obs_dim)));
        projection_ = Mat(out_dim, obs_dim);
        for (int i = 0; i < out_dim; ++i)
            for (int j = 0; j < obs_dim; ++j) projection_(i, j) = dist(rng);
    }

    Vec encode(const Vec& obs) const {
        if (obs.size() != obs_dim_)
            throw InvalidInputError("encode: observation length " + std::to_string(obs.size()) +
                                    " != obs_dim " + std::to_string(obs_dim_));
        return projection_ * obs;
    }

    // Rows are observations; returns rows of encodings.
    Mat encode_batch(const Mat& obs_rows) const {
        if (obs_rows.cols() != obs_dim_)
            throw InvalidInputError("encode_batch: observation width mismatch");
        return obs_rows * projection_.transpose();
    }

    int obs_dim() const { return obs_dim_; }
    int out_dim() const { return out_dim_; }
    uint64_t seed() const { return seed_; }
    const Mat& projection() const { return projection_; }

    // The projection in the parameter snapshot layout (a single linear layer
    // with zero bias).
    DenseNet as_net() const {
        DenseNet net = DenseNet::zeros({obs_dim_, out_dim_});
        net.weights[0] = projection_;
        return net;
    }

private:
    int obs_dim_;
    int out_dim_;
    uint64_t seed_;
    Mat projection_;
};

}  // namespace empowerd
