#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "driftflow/kernels.hpp"
#include "driftflow/rng.hpp"

namespace driftflow {

// Mean-shift score-difference drift and the smoothed-KL velocity field.
// These are distinct operations: the pointwise drift is (tau/2) times the
// score difference of the kernel-smoothed densities, while the smoothed-KL
// field averages the score difference under the kernel and carries no tau/2
// factor. They do not agree in general.

namespace detail {

inline void require_single_parzen(const KernelSpec& spec, const char* who) {
    spec.validate();
    if (spec.family != KernelFamily::parzen_gaussian)
        throw ConfigError(std::string(who) + ": requires the parzen_gaussian kernel family");
    if (!spec.bandwidths.empty())
        throw ConfigError(std::string(who) + ": bandwidth lists are not supported");
}

// Softmax-weighted barycenter of `support` under kernel weights at x.
// `ignore_index` drops one support point (used for the ignore-self option).
inline std::vector<double> kernel_barycenter(const KernelSpec& spec, std::span<const double> x,
                                             const ParticleBatch& support, int ignore_index) {
    const int n = support.n(), d = support.dim();
    std::vector<double> logw(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        logw[j] = (j == ignore_index) ? kNegInf : -sq_dist(x, support.point(j)) / spec.tau;
    softmax_from_log(logw);
    std::vector<double> bary(d, 0.0);
    for (int j = 0; j < n; ++j) {
        if (logw[j] == 0.0) continue;
        const auto yj = support.point(j);
        for (int k = 0; k < d; ++k) bary[k] += logw[j] * yj[k];
    }
    return bary;
}

}  // namespace detail

// Score-difference field evaluated at arbitrary query points with fixed
// supports. Row i = (barycenter of y_support at q_i) - (barycenter of
// x_support at q_i); the query point cancels between the two terms.
inline Matrix kl_drift_at(const KernelSpec& spec, const ParticleBatch& queries,
                          const ParticleBatch& x_support, const ParticleBatch& y_support) {
    detail::require_single_parzen(spec, "kl_drift");
    if (queries.dim() != x_support.dim() || x_support.dim() != y_support.dim())
        throw ShapeError("kl_drift: dimension mismatch");
    Matrix out(queries.n(), queries.dim());
    for (int i = 0; i < queries.n(); ++i) {
        const auto q = queries.point(i);
        const auto attract = detail::kernel_barycenter(spec, q, y_support, -1);
        const auto repel = detail::kernel_barycenter(spec, q, x_support, -1);
        for (int k = 0; k < queries.dim(); ++k) out(i, k) = attract[k] - repel[k];
    }
    return out;
}

// Drift at the model particles themselves. Each particle's own kernel term
// is part of the repulsion softmax unless ignore_self is set.
inline Matrix kl_drift(const KernelSpec& spec, const ParticleBatch& x_batch,
                       const ParticleBatch& y_batch, bool ignore_self = false) {
    detail::require_single_parzen(spec, "kl_drift");
    if (x_batch.dim() != y_batch.dim()) throw ShapeError("kl_drift: dimension mismatch");
    if (ignore_self && x_batch.n() < 2)
        throw ArgumentError("kl_drift: ignore_self needs at least two model particles");
    Matrix out(x_batch.n(), x_batch.dim());
    for (int i = 0; i < x_batch.n(); ++i) {
        const auto q = x_batch.point(i);
        const auto attract = detail::kernel_barycenter(spec, q, y_batch, -1);
        const auto repel = detail::kernel_barycenter(spec, q, x_batch, ignore_self ? i : -1);
        for (int k = 0; k < x_batch.dim(); ++k) out(i, k) = attract[k] - repel[k];
    }
    return out;
}

// Population form on weighted atoms: (tau/2) * (grad log(k*p) - grad log(k*q))
// evaluated at x. Works for either kernel family (the normalizer cancels).
inline std::vector<double> population_kl_drift(std::span<const double> x,
                                               std::span<const Atom> p_atoms,
                                               std::span<const Atom> q_atoms, double tau) {
    if (!(tau > 0.0)) throw ConfigError("population_kl_drift: tau must be > 0");
    const int d = static_cast<int>(x.size());
    auto score = [&](std::span<const Atom> atoms) {
        std::vector<double> logw(atoms.size());
        for (size_t j = 0; j < atoms.size(); ++j)
            logw[j] = std::log(atoms[j].weight) - sq_dist(x, atoms[j].point) / tau;
        const double lse = logsumexp(logw);
        if (lse == kNegInf) throw SingularityError("population_kl_drift: smoothed density underflow");
        std::vector<double> s(d, 0.0);
        for (size_t j = 0; j < atoms.size(); ++j) {
            const double w = std::exp(logw[j] - lse);
            for (int k = 0; k < d; ++k) s[k] += w * (2.0 / tau) * (atoms[j].point[k] - x[k]);
        }
        return s;
    };
    const auto sp = score(p_atoms);
    const auto sq = score(q_atoms);
    std::vector<double> v(d);
    for (int k = 0; k < d; ++k) v[k] = 0.5 * tau * (sp[k] - sq[k]);
    return v;
}

// Monte Carlo estimate of the smoothed-KL velocity at each query point:
//   V(y) = E_{x ~ N(y, (tau/2) I)} [ grad log p_tau(x) - grad log q_tau(x) ].
// The same draws feed both score terms, so identical supports give an
// exactly-zero estimate. Per-query substreams keep rows independent.
// `stderr_out`, when non-null, receives the per-coordinate standard error.
inline Matrix smoothed_kl_drift(const KernelSpec& spec, const ParticleBatch& x_batch,
                                const ParticleBatch& y_batch, const ParticleBatch& queries,
                                int mc_samples, RngHandle rng, Matrix* stderr_out = nullptr) {
    detail::require_single_parzen(spec, "smoothed_kl_drift");
    if (queries.dim() != x_batch.dim() || x_batch.dim() != y_batch.dim())
        throw ShapeError("smoothed_kl_drift: dimension mismatch");
    if (mc_samples < 1) throw ArgumentError("smoothed_kl_drift: mc_samples must be >= 1");
    const int d = queries.dim();
    const double sigma = std::sqrt(0.5 * spec.tau);
    Matrix out(queries.n(), d);
    if (stderr_out) *stderr_out = Matrix(queries.n(), d);

    std::vector<double> probe(d), sum(d), sum_sq(d);
    for (int i = 0; i < queries.n(); ++i) {
        Rng row_rng = Rng(rng).substream(static_cast<uint64_t>(i));
        const auto q = queries.point(i);
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(sum_sq.begin(), sum_sq.end(), 0.0);
        for (int s = 0; s < mc_samples; ++s) {
            for (int k = 0; k < d; ++k) probe[k] = q[k] + sigma * row_rng.normal();
            std::vector<double> gp, gq;
            try {
                gp = parzen_score(spec, probe, y_batch);
                gq = parzen_score(spec, probe, x_batch);
            } catch (const SingularityError& e) {
                throw SingularityError(std::string("smoothed_kl_drift: query row ") +
                                       std::to_string(i) + ": " + e.what());
            }
            for (int k = 0; k < d; ++k) {
                const double g = gp[k] - gq[k];
                sum[k] += g;
                sum_sq[k] += g * g;
            }
        }
        for (int k = 0; k < d; ++k) {
            const double m = sum[k] / mc_samples;
            out(i, k) = m;
            if (stderr_out) {
                const double var = std::max(0.0, sum_sq[k] / mc_samples - m * m);
                (*stderr_out)(i, k) = std::sqrt(var / mc_samples);
            }
        }
    }
    return out;
}

}  // namespace driftflow
