#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "driftflow/batch.hpp"
#include "driftflow/numerics.hpp"

namespace driftflow {

// Entropy-regularized optimal transport between uniform empirical measures,
// the exact debiased-Sinkhorn drift, and the one-shot Sinkhorn Proxy.
//
// Cost conventions: the converged solver defaults to C(x,y) = 1/2 ||x-y||^2,
// while the proxy affinities are z = -||x-y||^2 / tau. The factor of two
// between them is deliberate and ends up absorbed into the step size.

enum class CostConvention { half_sq, sq };

struct SinkhornConfig {
    double tau = 1.0;          // entropic regularization
    int max_iters = 100;
    double marginal_tol = 1e-9;
    CostConvention cost = CostConvention::half_sq;

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("SinkhornConfig: tau must be > 0");
        if (max_iters < 1) throw ConfigError("SinkhornConfig: max_iters must be >= 1");
        if (!(marginal_tol > 0.0)) throw ConfigError("SinkhornConfig: marginal_tol must be > 0");
    }
};

// Joint coupling in log domain plus solve diagnostics. Marginal errors are
// measured on the conditional scale: max_i |N^- sum_j pi_ij - 1| and
// max_j |N^+ sum_i pi_ij - 1|, so `converged` means the conditional plans
// are row-/column-stochastic to `marginal_tol`.
struct TransportPlan {
    Matrix log_plan;
    double row_marginal_err = 0.0;
    double col_marginal_err = 0.0;
    int iterations_used = 0;
    bool converged = false;
    std::vector<double> f;  // potential on the row (model) side
    std::vector<double> g;  // potential on the column side
};

inline TransportPlan sinkhorn_solve(const SinkhornConfig& cfg, const ParticleBatch& x_batch,
                                    const ParticleBatch& y_batch) {
    cfg.validate();
    const int n = x_batch.n(), m = y_batch.n();
    Matrix cost = pairwise_sq_dists(x_batch, y_batch);
    const double factor = cfg.cost == CostConvention::half_sq ? 0.5 : 1.0;
    for (double& c : cost.data()) {
        c *= factor;
        if (!std::isfinite(c)) throw ArgumentError("sinkhorn_solve: non-finite cost entry");
    }

    const double log_n = std::log(static_cast<double>(n));
    const double log_m = std::log(static_cast<double>(m));
    std::vector<double> f(n, 0.0), g(m, 0.0), buf_m(m), buf_n(n);

    TransportPlan plan;
    auto fill_log_plan = [&](Matrix& lp) {
        lp = Matrix(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                lp(i, j) = (f[i] + g[j] - cost(i, j)) / cfg.tau - log_n - log_m;
    };
    auto marginal_errors = [&](const Matrix& lp) -> std::array<double, 2> {
        double row_err = 0.0, col_err = 0.0;
        for (int i = 0; i < n; ++i)
            row_err = std::max(row_err, std::abs(std::exp(logsumexp(lp.row(i)) + log_n) - 1.0));
        Matrix lpt = lp.transposed();
        for (int j = 0; j < m; ++j)
            col_err = std::max(col_err, std::abs(std::exp(logsumexp(lpt.row(j)) + log_m) - 1.0));
        return {row_err, col_err};
    };

    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) buf_m[j] = (g[j] - cost(i, j)) / cfg.tau - log_m;
            f[i] = -cfg.tau * logsumexp(buf_m);
        }
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i) buf_n[i] = (f[i] - cost(i, j)) / cfg.tau - log_n;
            g[j] = -cfg.tau * logsumexp(buf_n);
        }
        // After the g sweep the column marginals are exact; convergence is
        // a question of the row marginals only.
        fill_log_plan(plan.log_plan);
        const auto errs = marginal_errors(plan.log_plan);
        plan.row_marginal_err = errs[0];
        plan.col_marginal_err = errs[1];
        if (std::max(errs[0], errs[1]) <= cfg.marginal_tol) {
            ++it;
            plan.converged = true;
            break;
        }
    }
    plan.iterations_used = it;
    plan.f = std::move(f);
    plan.g = std::move(g);
    return plan;
}

// Dual objective <mu, f> + <nu, g> at the solved potentials; equals the
// entropic OT value once the plan has converged.
inline double sinkhorn_ot_value(const TransportPlan& plan) {
    double v = 0.0;
    for (double fi : plan.f) v += fi / static_cast<double>(plan.f.size());
    for (double gj : plan.g) v += gj / static_cast<double>(plan.g.size());
    return v;
}

// Debiased divergence S_tau(q, p) = OT(q,p) - OT(q,q)/2 - OT(p,p)/2.
inline double sinkhorn_divergence(const SinkhornConfig& cfg, const ParticleBatch& x_batch,
                                  const ParticleBatch& y_batch) {
    const TransportPlan xy = sinkhorn_solve(cfg, x_batch, y_batch);
    const TransportPlan xx = sinkhorn_solve(cfg, x_batch, x_batch);
    const TransportPlan yy = sinkhorn_solve(cfg, y_batch, y_batch);
    if (!xy.converged || !xx.converged || !yy.converged)
        throw ConvergenceError("sinkhorn_divergence: solver did not converge within max_iters");
    return sinkhorn_ot_value(xy) - 0.5 * sinkhorn_ot_value(xx) - 0.5 * sinkhorn_ot_value(yy);
}

// Row-stochastic conditional plan W_ij = N^- pi_ij, in the direct domain.
inline Matrix conditional_plan(const TransportPlan& plan) {
    const int n = plan.log_plan.rows(), m = plan.log_plan.cols();
    const double log_n = std::log(static_cast<double>(n));
    Matrix w(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) w(i, j) = std::exp(plan.log_plan(i, j) + log_n);
    return w;
}

// Exact debiased-Sinkhorn drift: row i = sum_j W+_ij y_j - sum_k W-_ik x_k
// with W+ and W- the converged conditional plans of OT(q,p) and OT(q,q).
// Requires convergence; the optimality of the potentials is what makes this
// the (negative, mass-scaled) gradient of S_tau.
inline Matrix sinkhorn_exact_drift(const SinkhornConfig& cfg, const ParticleBatch& x_batch,
                                   const ParticleBatch& y_batch) {
    const TransportPlan xy = sinkhorn_solve(cfg, x_batch, y_batch);
    if (!xy.converged)
        throw ConvergenceError("sinkhorn_exact_drift: q-p plan not converged after " +
                               std::to_string(xy.iterations_used) + " iterations (row err " +
                               std::to_string(xy.row_marginal_err) + ")");
    const TransportPlan xx = sinkhorn_solve(cfg, x_batch, x_batch);
    if (!xx.converged)
        throw ConvergenceError("sinkhorn_exact_drift: q-q plan not converged after " +
                               std::to_string(xx.iterations_used) + " iterations");
    const Matrix w_plus = conditional_plan(xy);
    const Matrix w_minus = conditional_plan(xx);
    const int n = x_batch.n(), d = x_batch.dim();
    Matrix out(n, d);
    // Separate accumulators so identical batches cancel exactly.
    std::vector<double> attract(d), repel(d);
    for (int i = 0; i < n; ++i) {
        std::fill(attract.begin(), attract.end(), 0.0);
        std::fill(repel.begin(), repel.end(), 0.0);
        for (int j = 0; j < y_batch.n(); ++j) {
            const auto yj = y_batch.point(j);
            for (int k = 0; k < d; ++k) attract[k] += w_plus(i, j) * yj[k];
        }
        for (int j = 0; j < x_batch.n(); ++j) {
            const auto xj = x_batch.point(j);
            for (int k = 0; k < d; ++k) repel[k] += w_minus(i, j) * xj[k];
        }
        for (int k = 0; k < d; ++k) out(i, k) = attract[k] - repel[k];
    }
    return out;
}

enum class ProxyVariant { ours, da2 };

// Intermediates of the proxy computation, exposed for inspection and tests.
struct ProxyDetail {
    Matrix log_a_plus;   // N^- x N^+ geometric-mean pseudo-plan (log)
    Matrix log_a_minus;  // N^- x N^- pseudo-plan (log)
    std::vector<double> s_plus;
    std::vector<double> s_minus;
};

namespace detail {

// log A = z - (row_lse + col_lse) / 2, the geometric mean of the row-wise
// and column-wise softmax normalizations of z.
inline Matrix geometric_mean_normalize(const Matrix& z) {
    const int n = z.rows(), m = z.cols();
    std::vector<double> row_lse(n), col_lse(m);
    for (int i = 0; i < n; ++i) row_lse[i] = logsumexp(z.row(i));
    Matrix zt = z.transposed();
    for (int j = 0; j < m; ++j) col_lse[j] = logsumexp(zt.row(j));
    Matrix log_a(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double v = z(i, j);
            log_a(i, j) = (v == kNegInf) ? kNegInf : v - 0.5 * (row_lse[i] + col_lse[j]);
        }
    return log_a;
}

}  // namespace detail

// One-shot Sinkhorn Proxy drift. Affinities z = -||.||^2 / tau are
// normalized by a simultaneous row/column softmax half-step (geometric
// mean), then cross-weighted: W+_ij = A+_ij s-_i, W-_ik = A-_ik s+_i, where
// s+/- are the row sums of A+/-. Batch-size scalings are omitted throughout
// (they amount to one common factor on the field).
//
// `ours` normalizes z+ and z- separately; `da2` normalizes the row-wise
// softmax over the concatenation [z+ z-] and splits afterwards. ignore_self
// removes the diagonal of z- before any normalization.
inline Matrix sinkhorn_proxy_drift(const SinkhornConfig& cfg, const ParticleBatch& x_batch,
                                   const ParticleBatch& y_batch, ProxyVariant variant,
                                   bool ignore_self = false, ProxyDetail* detail_out = nullptr) {
    cfg.validate();
    if (x_batch.dim() != y_batch.dim()) throw ShapeError("sinkhorn_proxy_drift: dimension mismatch");
    const int n = x_batch.n(), m = y_batch.n(), d = x_batch.dim();
    if (ignore_self && n < 2)
        throw ArgumentError("sinkhorn_proxy_drift: ignore_self needs at least two model particles");

    Matrix z_plus(n, m), z_minus(n, n);
    for (int i = 0; i < n; ++i) {
        const auto xi = x_batch.point(i);
        for (int j = 0; j < m; ++j) z_plus(i, j) = -sq_dist(xi, y_batch.point(j)) / cfg.tau;
        for (int k = 0; k < n; ++k)
            z_minus(i, k) = (ignore_self && k == i) ? kNegInf : -sq_dist(xi, x_batch.point(k)) / cfg.tau;
    }

    Matrix log_a_plus, log_a_minus;
    if (variant == ProxyVariant::ours) {
        log_a_plus = detail::geometric_mean_normalize(z_plus);
        log_a_minus = detail::geometric_mean_normalize(z_minus);
    } else {
        Matrix z(n, m + n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) z(i, j) = z_plus(i, j);
            for (int k = 0; k < n; ++k) z(i, m + k) = z_minus(i, k);
        }
        const Matrix log_a = detail::geometric_mean_normalize(z);
        log_a_plus = Matrix(n, m);
        log_a_minus = Matrix(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) log_a_plus(i, j) = log_a(i, j);
            for (int k = 0; k < n; ++k) log_a_minus(i, k) = log_a(i, m + k);
        }
    }

    std::vector<double> s_plus(n), s_minus(n);
    for (int i = 0; i < n; ++i) {
        s_plus[i] = std::exp(logsumexp(log_a_plus.row(i)));
        s_minus[i] = std::exp(logsumexp(log_a_minus.row(i)));
    }

    Matrix out(n, d);
    // Separate accumulators so identical batches cancel exactly.
    std::vector<double> attract(d), repel(d);
    for (int i = 0; i < n; ++i) {
        std::fill(attract.begin(), attract.end(), 0.0);
        std::fill(repel.begin(), repel.end(), 0.0);
        for (int j = 0; j < m; ++j) {
            const double w = std::exp(log_a_plus(i, j)) * s_minus[i];
            const auto yj = y_batch.point(j);
            for (int k = 0; k < d; ++k) attract[k] += w * yj[k];
        }
        for (int j = 0; j < n; ++j) {
            const double w = std::exp(log_a_minus(i, j)) * s_plus[i];
            const auto xj = x_batch.point(j);
            for (int k = 0; k < d; ++k) repel[k] += w * xj[k];
        }
        for (int k = 0; k < d; ++k) out(i, k) = attract[k] - repel[k];
    }
    if (detail_out)
        *detail_out = ProxyDetail{std::move(log_a_plus), std::move(log_a_minus), std::move(s_plus),
                                  std::move(s_minus)};
    return out;
}

struct PopulationProxyDrift {
    std::vector<double> velocity;
    double preconditioner_z = 0.0;  // Z(x) = s+(x) s-(x)
};

// Population Sinkhorn Proxy on weighted atoms with the Gibbs kernel:
//   V(x) = (tau/2) Z(x) ( grad log(k * p~)(x) - grad log(k * q~)(x) ),
// where p~ and q~ reweight p and q by q_tau^{-1/2}.
inline PopulationProxyDrift population_proxy_drift(std::span<const double> x,
                                                   std::span<const Atom> p_atoms,
                                                   std::span<const Atom> q_atoms, double tau) {
    if (!(tau > 0.0)) throw ConfigError("population_proxy_drift: tau must be > 0");
    if (p_atoms.empty() || q_atoms.empty())
        throw ArgumentError("population_proxy_drift: empty atom list");
    const int d = static_cast<int>(x.size());

    auto log_conv = [&](std::span<const Atom> atoms, std::span<const double> at) {
        std::vector<double> t(atoms.size());
        for (size_t k = 0; k < atoms.size(); ++k)
            t[k] = std::log(atoms[k].weight) - sq_dist(at, atoms[k].point) / tau;
        return logsumexp(t);
    };

    // Reweighted atom log-masses log w_j - log(q_tau(point_j)) / 2.
    auto tilde = [&](std::span<const Atom> atoms) {
        std::vector<double> logw(atoms.size());
        for (size_t j = 0; j < atoms.size(); ++j) {
            const double lq = log_conv(q_atoms, atoms[j].point);
            if (lq == kNegInf)
                throw SingularityError("population_proxy_drift: q_tau underflows at an atom");
            logw[j] = std::log(atoms[j].weight) - 0.5 * lq;
        }
        return logw;
    };

    // Score and log-mass of the kernel convolution of a reweighted measure.
    auto conv_stats = [&](std::span<const Atom> atoms, const std::vector<double>& logw) {
        std::vector<double> terms(atoms.size());
        for (size_t j = 0; j < atoms.size(); ++j)
            terms[j] = logw[j] - sq_dist(x, atoms[j].point) / tau;
        const double lse = logsumexp(terms);
        if (lse == kNegInf)
            throw SingularityError("population_proxy_drift: smoothed reweighted measure underflows");
        std::vector<double> score(d, 0.0);
        for (size_t j = 0; j < atoms.size(); ++j) {
            const double w = std::exp(terms[j] - lse);
            for (int k = 0; k < d; ++k) score[k] += w * (2.0 / tau) * (atoms[j].point[k] - x[k]);
        }
        return std::pair<std::vector<double>, double>(std::move(score), lse);
    };

    const auto logw_p = tilde(p_atoms);
    const auto logw_q = tilde(q_atoms);
    const auto [score_p, log_kp] = conv_stats(p_atoms, logw_p);
    const auto [score_q, log_kq] = conv_stats(q_atoms, logw_q);

    const double log_p_tau = log_conv(p_atoms, x);
    const double log_q_tau = log_conv(q_atoms, x);
    if (log_p_tau == kNegInf || log_q_tau == kNegInf)
        throw SingularityError("population_proxy_drift: smoothed density underflows at query");
    const double log_s_plus = log_kp - 0.5 * log_p_tau;
    const double log_s_minus = log_kq - 0.5 * log_q_tau;
    const double z = std::exp(log_s_plus + log_s_minus);

    PopulationProxyDrift out;
    out.preconditioner_z = z;
    out.velocity.resize(d);
    for (int k = 0; k < d; ++k) out.velocity[k] = 0.5 * tau * z * (score_p[k] - score_q[k]);
    return out;
}

// Repeated simultaneous row/column geometric-mean normalization of a
// positive square matrix. Converges to the doubly stochastic scaling, i.e.
// N times the uniform-marginal entropic plan for the same Gibbs matrix.
// Marginal errors here are |row sum - 1| and |col sum - 1| of the iterate.
inline TransportPlan iterate_symmetric_normalization(
    const Matrix& gibbs, int iters, double tol = 1e-9,
    std::vector<std::array<double, 2>>* err_history = nullptr) {
    if (gibbs.rows() != gibbs.cols())
        throw ShapeError("iterate_symmetric_normalization: matrix must be square");
    if (gibbs.rows() == 0) throw ArgumentError("iterate_symmetric_normalization: empty matrix");
    if (iters < 1) throw ArgumentError("iterate_symmetric_normalization: iters must be >= 1");
    const int n = gibbs.rows();
    Matrix log_a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (!(gibbs(i, j) > 0.0) || !std::isfinite(gibbs(i, j)))
                throw ArgumentError("iterate_symmetric_normalization: entries must be positive finite");
            log_a(i, j) = std::log(gibbs(i, j));
        }

    TransportPlan plan;
    auto errors = [&](const Matrix& la) -> std::array<double, 2> {
        double re = 0.0, ce = 0.0;
        for (int i = 0; i < n; ++i) re = std::max(re, std::abs(std::exp(logsumexp(la.row(i))) - 1.0));
        Matrix lat = la.transposed();
        for (int j = 0; j < n; ++j) ce = std::max(ce, std::abs(std::exp(logsumexp(lat.row(j))) - 1.0));
        return {re, ce};
    };

    for (int t = 0; t < iters; ++t) {
        log_a = detail::geometric_mean_normalize(log_a);
        const auto e = errors(log_a);
        if (err_history) err_history->push_back(e);
        plan.row_marginal_err = e[0];
        plan.col_marginal_err = e[1];
        plan.iterations_used = t + 1;
        if (std::max(e[0], e[1]) <= tol) {
            plan.converged = true;
            break;
        }
    }
    plan.converged = std::max(plan.row_marginal_err, plan.col_marginal_err) <= tol;
    plan.log_plan = std::move(log_a);
    return plan;
}

}  // namespace driftflow
