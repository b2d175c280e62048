#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "driftflow/errors.hpp"

namespace driftflow {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_k exp(v_k)) with the max-shift trick. Finite for finite inputs;
// returns -inf when every entry is -inf (an empty log-domain sum).
inline double logsumexp(std::span<const double> v) {
    if (v.empty()) throw ArgumentError("logsumexp: empty input");
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    if (!std::isfinite(m)) return m;  // +inf passes through
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline double logsumexp(const std::vector<double>& v) {
    return logsumexp(std::span<const double>(v.data(), v.size()));
}

// In-place softmax of a log-weight vector; returns the normalizer logsumexp.
inline double softmax_from_log(std::span<double> logw) {
    const double lse = logsumexp(logw);
    if (lse == kNegInf)
        throw SingularityError("softmax: every weight underflowed to zero in log domain");
    for (double& w : logw) w = std::exp(w - lse);
    return lse;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Lower median: for even counts picks the smaller of the two middle values.
inline double lower_median(std::vector<double> v) {
    if (v.empty()) throw ArgumentError("lower_median: empty input");
    const size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

}  // namespace driftflow
