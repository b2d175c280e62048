#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "driftflow/kernels.hpp"
#include "driftflow/rng.hpp"

namespace driftflow {

namespace detail {

inline void require_gibbs(const KernelSpec& spec, const char* who) {
    spec.validate();
    if (spec.family != KernelFamily::gibbs_gaussian)
        throw ConfigError(std::string(who) + ": requires the gibbs_gaussian kernel family");
}

// Accumulate grad_x k(x, z) = -(2/tau) (x - z) k(x, z) summed over the
// bandwidth list, scaled by `scale`. Pairs with exp(-d2/tau) below ~3e-20
// are skipped; they cannot move an O(1) accumulation at double precision.
inline void add_kernel_grad(const KernelSpec& spec, std::span<const double> x,
                            std::span<const double> z, double scale, std::span<double> acc) {
    const double d2 = sq_dist(x, z);
    for (double tau : spec.taus()) {
        const double arg = d2 / tau;
        if (arg > 45.0) continue;
        const double w = scale * (2.0 / tau) * std::exp(-arg);
        for (size_t k = 0; k < x.size(); ++k) acc[k] += w * (z[k] - x[k]);
    }
}

}  // namespace detail

// MMD flow field at arbitrary query points:
//   V(x) = (1/N+) sum_j grad_x k(x, y_j) - (1/N-) sum_k grad_x k(x, x_k).
// A bandwidth list sums the per-bandwidth fields.
inline Matrix mmd_drift_at(const KernelSpec& spec, const ParticleBatch& queries,
                           const ParticleBatch& x_support, const ParticleBatch& y_support) {
    detail::require_gibbs(spec, "mmd_drift");
    if (queries.dim() != x_support.dim() || x_support.dim() != y_support.dim())
        throw ShapeError("mmd_drift: dimension mismatch");
    const int d = queries.dim();
    Matrix out(queries.n(), d);
    const double wp = 1.0 / y_support.n(), wm = 1.0 / x_support.n();
    // Attraction and repulsion are accumulated separately and subtracted
    // once, so identical supports cancel exactly.
    std::vector<double> attract(d), repel(d);
    for (int i = 0; i < queries.n(); ++i) {
        const auto q = queries.point(i);
        std::fill(attract.begin(), attract.end(), 0.0);
        std::fill(repel.begin(), repel.end(), 0.0);
        for (int j = 0; j < y_support.n(); ++j)
            detail::add_kernel_grad(spec, q, y_support.point(j), wp, attract);
        for (int k = 0; k < x_support.n(); ++k)
            detail::add_kernel_grad(spec, q, x_support.point(k), wm, repel);
        for (int k = 0; k < d; ++k) out(i, k) = attract[k] - repel[k];
    }
    return out;
}

// Drift at the model particles. The self term has zero kernel gradient, so
// including it matches the field evaluated at a member point.
inline Matrix mmd_drift(const KernelSpec& spec, const ParticleBatch& x_batch,
                        const ParticleBatch& y_batch) {
    return mmd_drift_at(spec, x_batch, x_batch, y_batch);
}

// Empirical witness g*(x) = (1/N-) sum_k k(x, x_k) - (1/N+) sum_j k(x, y_j);
// the MMD drift is its negative gradient.
inline double mmd_witness(const KernelSpec& spec, std::span<const double> x,
                          const ParticleBatch& x_support, const ParticleBatch& y_support) {
    detail::require_gibbs(spec, "mmd_witness");
    double g = 0.0;
    for (int k = 0; k < x_support.n(); ++k)
        g += std::exp(log_kernel(spec, sq_dist(x, x_support.point(k)), x_support.dim())) / x_support.n();
    for (int j = 0; j < y_support.n(); ++j)
        g -= std::exp(log_kernel(spec, sq_dist(x, y_support.point(j)), y_support.dim())) / y_support.n();
    return g;
}

namespace detail {

// 1D optimal transport displacement by quantile matching. Both value arrays
// are sorted (stable by value then original index). Equal sizes reduce to
// sorted pairing; otherwise target quantiles are linearly interpolated at
// the midpoint levels (r + 1/2) / N.
inline std::vector<double> sorted_transport_targets(const std::vector<double>& model_sorted,
                                                    const std::vector<double>& data_sorted) {
    const size_t n = model_sorted.size(), m = data_sorted.size();
    std::vector<double> targets(n);
    if (n == m) {
        targets = data_sorted;
        return targets;
    }
    for (size_t r = 0; r < n; ++r) {
        const double u = (static_cast<double>(r) + 0.5) / static_cast<double>(n);
        const double pos = u * static_cast<double>(m) - 0.5;
        if (pos <= 0.0) {
            targets[r] = data_sorted.front();
        } else if (pos >= static_cast<double>(m - 1)) {
            targets[r] = data_sorted.back();
        } else {
            const size_t j = static_cast<size_t>(pos);
            const double frac = pos - static_cast<double>(j);
            targets[r] = (1.0 - frac) * data_sorted[j] + frac * data_sorted[j + 1];
        }
    }
    return targets;
}

inline std::vector<int> stable_order(const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    return idx;
}

}  // namespace detail

// Sliced-Wasserstein drift for an explicit direction set (rows of
// `directions` must be unit vectors). For each direction, both batches are
// projected, the 1D transport map is computed by quantile matching, and the
// displacement is pushed back along the direction; the result is the
// average over directions.
inline Matrix sw_drift_with_directions(const ParticleBatch& x_batch, const ParticleBatch& y_batch,
                                       const Matrix& directions) {
    if (x_batch.dim() != y_batch.dim()) throw ShapeError("sw_drift: dimension mismatch");
    if (directions.cols() != x_batch.dim()) throw ShapeError("sw_drift: direction dimension mismatch");
    if (directions.rows() < 1) throw ArgumentError("sw_drift: need at least one direction");
    const int n = x_batch.n(), d = x_batch.dim(), n_slices = directions.rows();
    Matrix out(n, d);
    std::vector<double> proj_x(n), proj_y(y_batch.n());
    for (int s = 0; s < n_slices; ++s) {
        const auto theta = directions.row(s);
        for (int i = 0; i < n; ++i) proj_x[i] = dot(theta, x_batch.point(i));
        for (int j = 0; j < y_batch.n(); ++j) proj_y[j] = dot(theta, y_batch.point(j));

        const auto order_x = detail::stable_order(proj_x);
        std::vector<double> sorted_x(n), sorted_y(proj_y);
        for (int r = 0; r < n; ++r) sorted_x[r] = proj_x[order_x[r]];
        std::stable_sort(sorted_y.begin(), sorted_y.end());

        const auto targets = detail::sorted_transport_targets(sorted_x, sorted_y);
        for (int r = 0; r < n; ++r) {
            const int i = order_x[r];
            const double disp = targets[r] - sorted_x[r];
            for (int k = 0; k < d; ++k) out(i, k) += disp * theta[k];
        }
    }
    for (double& v : out.data()) v /= n_slices;
    return out;
}

inline Matrix uniform_sphere_directions(int n_slices, int dim, Rng& rng) {
    if (n_slices < 1) throw ArgumentError("sw_drift: n_slices must be >= 1");
    Matrix dirs(n_slices, dim);
    for (int s = 0; s < n_slices; ++s) {
        double norm = 0.0;
        while (norm < 1e-12) {
            for (int k = 0; k < dim; ++k) dirs(s, k) = rng.normal();
            norm = norm2(dirs.row(s));
        }
        for (int k = 0; k < dim; ++k) dirs(s, k) /= norm;
    }
    return dirs;
}

// Directions are drawn fresh from the given stream on every call.
inline Matrix sw_drift(const ParticleBatch& x_batch, const ParticleBatch& y_batch, int n_slices,
                       RngHandle rng) {
    Rng r(rng);
    const Matrix dirs = uniform_sphere_directions(n_slices, x_batch.dim(), r);
    return sw_drift_with_directions(x_batch, y_batch, dirs);
}

}  // namespace driftflow
