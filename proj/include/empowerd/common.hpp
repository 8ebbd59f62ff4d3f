#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace empowerd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Error taxonomy used across the library. CLI exit codes: invalid input -> 1,
// numeric fault -> 2.
struct InvalidInputError : std::runtime_error {
    explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidStateError : std::runtime_error {
    explicit InvalidStateError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidConfigError : std::runtime_error {
    explicit InvalidConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericFaultError : std::runtime_error {
    explicit NumericFaultError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

// Draws an index from a categorical distribution given by `probs`.
// Consumes exactly one uniform double from the rng.
inline int sample_categorical(const Vec& probs, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    double acc = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return static_cast<int>(probs.size()) - 1;
}

inline void check_distribution(const Vec& probs, const std::string& what) {
    if (probs.size() == 0) throw InvalidInputError(what + ": empty distribution");
    double sum = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        if (!(probs[i] >= 0.0))
            throw InvalidInputError(what + ": negative or non-finite mass at index " +
                                    std::to_string(i));
        sum += probs[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidInputError(what + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace empowerd
