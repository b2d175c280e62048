#pragma once

#include <string>
#include <utility>

#include "driftflow/errors.hpp"
#include "driftflow/matrix.hpp"

namespace driftflow {

enum class Role { model, data };

inline const char* role_name(Role r) { return r == Role::model ? "model" : "data"; }

// A set of N particle positions in R^d with a fixed role. Positions are
// validated once at construction and never mutated afterwards; evolving a
// batch means building a new one.
class ParticleBatch {
public:
    ParticleBatch(Matrix positions, Role role, uint64_t seed_provenance = 0)
        : positions_(std::move(positions)), role_(role), seed_provenance_(seed_provenance) {
        if (positions_.rows() < 1 || positions_.cols() < 1)
            throw ArgumentError("ParticleBatch: need N >= 1 and d >= 1");
        if (!positions_.all_finite())
            throw ArgumentError("ParticleBatch: non-finite position entry");
    }

    int n() const { return positions_.rows(); }
    int dim() const { return positions_.cols(); }
    Role role() const { return role_; }
    uint64_t seed_provenance() const { return seed_provenance_; }

    const Matrix& positions() const { return positions_; }
    std::span<const double> point(int i) const { return positions_.row(i); }

private:
    Matrix positions_;
    Role role_;
    uint64_t seed_provenance_;
};

// A weighted point mass; population-level drift formulas take discrete
// measures as lists of these.
struct Atom {
    double weight = 1.0;
    std::vector<double> point;
};

// Entry (i, j) = ||a_i - b_j||^2. Diagonal is exactly zero when both
// arguments are the same batch (identical doubles subtract to 0).
inline Matrix pairwise_sq_dists(const ParticleBatch& a, const ParticleBatch& b) {
    if (a.dim() != b.dim())
        throw ShapeError("pairwise_sq_dists: dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
    Matrix out(a.n(), b.n());
    for (int i = 0; i < a.n(); ++i) {
        const auto ai = a.point(i);
        for (int j = 0; j < b.n(); ++j) out(i, j) = sq_dist(ai, b.point(j));
    }
    return out;
}

}  // namespace driftflow
