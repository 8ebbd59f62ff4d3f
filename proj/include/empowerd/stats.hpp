#pragma once

#include "empowerd/common.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace empowerd {

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw InvalidInputError("mean_of: empty input");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Midranks: tied values share the average of the ranks they span (1-based).
inline std::vector<double> midranks(const std::vector<double>& xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw InvalidInputError("pearson: need two equal-length samples of size >= 2");
    const double mx = mean_of(xs), my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw InvalidInputError("pearson: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

// Spearman rank correlation with midranks for ties.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    return pearson(midranks(xs), midranks(ys));
}

}  // namespace empowerd
