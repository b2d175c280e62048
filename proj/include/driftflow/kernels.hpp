#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "driftflow/batch.hpp"
#include "driftflow/numerics.hpp"

namespace driftflow {

// Two Gaussian kernel conventions, kept strictly apart:
//   parzen_gaussian: k_tau(x,y) = (pi*tau)^(-d/2) exp(-||x-y||^2 / tau),
//                    a probability density in x (equivalently N(y, tau/2 I)).
//   gibbs_gaussian:  k(x,y) = exp(-||x-y||^2 / tau), unnormalized, k(x,x)=1.
// `bandwidths`, when non-empty, replaces `tau` and the kernel becomes the sum
// of the per-bandwidth kernels. All sums and ratios run in log domain; the
// direct-domain entry points exist for tests and small-scale inspection.

enum class KernelFamily { parzen_gaussian, gibbs_gaussian };

struct KernelSpec {
    KernelFamily family = KernelFamily::parzen_gaussian;
    double tau = 1.0;
    std::vector<double> bandwidths;  // empty = single bandwidth `tau`

    std::vector<double> taus() const { return bandwidths.empty() ? std::vector<double>{tau} : bandwidths; }

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("KernelSpec: tau must be > 0");
        for (double b : bandwidths)
            if (!(b > 0.0)) throw ConfigError("KernelSpec: every bandwidth must be > 0");
    }
};

// log k for one bandwidth; the Parzen family carries the (pi*tau)^(-d/2)
// normalizer, the Gibbs family does not.
inline double log_kernel(KernelFamily family, double tau, double sq_distance, int dim) {
    double lk = -sq_distance / tau;
    if (family == KernelFamily::parzen_gaussian) lk -= 0.5 * dim * std::log(M_PI * tau);
    return lk;
}

inline double log_kernel(const KernelSpec& spec, double sq_distance, int dim) {
    const auto taus = spec.taus();
    if (taus.size() == 1) return log_kernel(spec.family, taus[0], sq_distance, dim);
    std::vector<double> terms(taus.size());
    for (size_t b = 0; b < taus.size(); ++b) terms[b] = log_kernel(spec.family, taus[b], sq_distance, dim);
    return logsumexp(terms);
}

inline Matrix log_kernel_matrix(const KernelSpec& spec, const ParticleBatch& a, const ParticleBatch& b) {
    spec.validate();
    Matrix d2 = pairwise_sq_dists(a, b);
    Matrix out(d2.rows(), d2.cols());
    for (int i = 0; i < d2.rows(); ++i)
        for (int j = 0; j < d2.cols(); ++j) out(i, j) = log_kernel(spec, d2(i, j), a.dim());
    return out;
}

inline Matrix kernel_matrix(const KernelSpec& spec, const ParticleBatch& a, const ParticleBatch& b) {
    Matrix out = log_kernel_matrix(spec, a, b);
    for (double& v : out.data()) v = std::exp(v);
    return out;
}

// log of the kernel density estimate (1/N) sum_j k(x, y_j). For the Gibbs
// family this is the log of the unnormalized convolution k * support.
inline double log_parzen_density(const KernelSpec& spec, std::span<const double> x,
                                 const ParticleBatch& support) {
    spec.validate();
    if (support.n() < 1) throw ArgumentError("parzen_density: empty support");
    if (static_cast<int>(x.size()) != support.dim())
        throw ShapeError("parzen_density: query dimension mismatch");
    std::vector<double> terms(static_cast<size_t>(support.n()));
    for (int j = 0; j < support.n(); ++j)
        terms[j] = log_kernel(spec, sq_dist(x, support.point(j)), support.dim());
    return logsumexp(terms) - std::log(static_cast<double>(support.n()));
}

inline double parzen_density(const KernelSpec& spec, std::span<const double> x,
                             const ParticleBatch& support) {
    return std::exp(log_parzen_density(spec, x, support));
}

// Gradient of the log kernel density at x. For a single bandwidth this is
// the mean-shift form (2/tau) * (softmax-weighted support mean - x); a
// bandwidth list mixes the per-bandwidth terms by their density shares.
// Set ignore_index >= 0 to drop one support point from the estimate.
inline std::vector<double> parzen_score(const KernelSpec& spec, std::span<const double> x,
                                        const ParticleBatch& support, int ignore_index = -1) {
    spec.validate();
    if (support.n() < 1) throw ArgumentError("parzen_score: empty support");
    if (static_cast<int>(x.size()) != support.dim())
        throw ShapeError("parzen_score: query dimension mismatch");
    const auto taus = spec.taus();
    const int n = support.n(), d = support.dim();

    // log weights over (bandwidth, support point) pairs
    std::vector<double> logw(taus.size() * static_cast<size_t>(n));
    for (size_t b = 0; b < taus.size(); ++b)
        for (int j = 0; j < n; ++j) {
            double lw = (ignore_index == j)
                            ? kNegInf
                            : log_kernel(spec.family, taus[b], sq_dist(x, support.point(j)), d);
            logw[b * n + j] = lw;
        }
    const double lse = logsumexp(logw);
    if (lse == kNegInf) {
        std::string loc = "(";
        for (size_t k = 0; k < x.size(); ++k) loc += (k ? "," : "") + std::to_string(x[k]);
        throw SingularityError("parzen_score: density underflows to zero at query " + loc + ")");
    }

    std::vector<double> score(d, 0.0);
    for (size_t b = 0; b < taus.size(); ++b) {
        const double two_over_tau = 2.0 / taus[b];
        for (int j = 0; j < n; ++j) {
            const double w = std::exp(logw[b * n + j] - lse);
            if (w == 0.0) continue;
            const auto yj = support.point(j);
            for (int k = 0; k < d; ++k) score[k] += w * two_over_tau * (yj[k] - x[k]);
        }
    }
    return score;
}

}  // namespace driftflow
