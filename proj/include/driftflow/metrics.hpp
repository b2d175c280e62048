#pragma once

#include <cmath>
#include <vector>

#include "driftflow/kernels.hpp"

namespace driftflow {

// V-statistic (biased) squared MMD. All three terms run over full index
// grids in the same order, so identical batches give exactly zero.
inline double mmd2_vstat(const KernelSpec& spec, const ParticleBatch& x_batch,
                         const ParticleBatch& y_batch) {
    spec.validate();
    if (x_batch.dim() != y_batch.dim()) throw ShapeError("mmd2: dimension mismatch");
    const int d = x_batch.dim();
    auto grid_mean = [&](const ParticleBatch& a, const ParticleBatch& b) {
        double s = 0.0;
        for (int i = 0; i < a.n(); ++i)
            for (int j = 0; j < b.n(); ++j)
                s += std::exp(log_kernel(spec, sq_dist(a.point(i), b.point(j)), d));
        return s / (static_cast<double>(a.n()) * static_cast<double>(b.n()));
    };
    return grid_mean(x_batch, x_batch) - 2.0 * grid_mean(x_batch, y_batch) + grid_mean(y_batch, y_batch);
}

// Lower median of the pairwise squared distances of the pooled batches
// (distinct unordered pairs only; self-pairs never enter).
inline double median_heuristic_sq_dist(const ParticleBatch& x_batch, const ParticleBatch& y_batch) {
    if (x_batch.dim() != y_batch.dim()) throw ShapeError("median_heuristic: dimension mismatch");
    const int nx = x_batch.n(), ny = y_batch.n(), n = nx + ny;
    auto point = [&](int i) { return i < nx ? x_batch.point(i) : y_batch.point(i - nx); };
    std::vector<double> d2;
    d2.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d2.push_back(sq_dist(point(i), point(j)));
    if (d2.empty()) throw ArgumentError("median_heuristic: need at least two pooled points");
    return lower_median(std::move(d2));
}

// Evaluation metric: V-statistic MMD^2 under the Gibbs kernel whose
// bandwidth is the pooled median squared distance.
inline double mmd2_median(const ParticleBatch& x_batch, const ParticleBatch& y_batch) {
    const double m = median_heuristic_sq_dist(x_batch, y_batch);
    if (!(m > 0.0))
        throw SingularityError("mmd2_median: degenerate bandwidth (pooled median distance is zero)");
    KernelSpec spec{KernelFamily::gibbs_gaussian, m, {}};
    return mmd2_vstat(spec, x_batch, y_batch);
}

}  // namespace driftflow
