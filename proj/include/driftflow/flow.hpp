#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "driftflow/drift.hpp"
#include "driftflow/metrics.hpp"

namespace driftflow {

// Euler particle-flow simulator x <- x + eta * V(x) for any drift kind,
// with per-step energy logging and divergence flagging.

struct FlowConfig {
    DriftConfig drift;
    double eta = 0.1;
    int n_steps = 100;
    int snapshot_every = 0;  // 0 = no intermediate snapshots
    uint64_t seed = 0;
    // Resample the target batch every step (mini-batch practice) or keep the
    // initial batch fixed (deterministic property tests).
    bool resample_target = true;

    void validate() const {
        if (!(eta > 0.0)) throw ConfigError("FlowConfig: eta must be > 0");
        if (n_steps < 1) throw ConfigError("FlowConfig: n_steps must be >= 1");
        if (snapshot_every < 0) throw ConfigError("FlowConfig: snapshot_every must be >= 0");
    }
};

struct FlowRecord {
    int step = 0;
    double energy_mmd2 = 0.0;
    double mean_drift_norm = 0.0;
    double max_drift_norm = 0.0;
    bool diverged = false;
};

struct FlowResult {
    ParticleBatch final_particles;
    std::vector<FlowRecord> records;                      // one per step, 0..n_steps
    std::vector<std::pair<int, ParticleBatch>> snapshots; // (step, particles)
    bool diverged = false;
    int diverged_at_step = -1;
};

// Supplies the target batch for a step; step -1 requests the reference batch
// used for energy-bandwidth calibration and fixed-target runs.
using TargetProvider = std::function<ParticleBatch(int step)>;

inline TargetProvider fixed_target(const ParticleBatch& batch) {
    return [batch](int) { return batch; };
}

// The logged energy uses one kernel for the whole run so values are
// comparable across steps: the drift's own kernel when the drift is MMD
// (making the dissipation property exact), otherwise a Gibbs kernel at the
// median heuristic of the pooled initial state, frozen at step 0.
inline KernelSpec flow_energy_kernel(const FlowConfig& cfg, const ParticleBatch& init,
                                     const ParticleBatch& target0) {
    if (cfg.drift.kind == DriftKind::mmd) return cfg.drift.kernel;
    KernelSpec spec{KernelFamily::gibbs_gaussian, 1.0, {}};
    const double m = median_heuristic_sq_dist(init, target0);
    spec.tau = m > 0.0 ? m : 1.0;
    return spec;
}

inline FlowResult run_flow(const FlowConfig& cfg, const ParticleBatch& init,
                           const TargetProvider& target) {
    cfg.validate();
    const ParticleBatch target0 = target(-1);
    if (init.dim() != target0.dim()) throw ShapeError("run_flow: init/target dimension mismatch");
    const KernelSpec energy_kernel = flow_energy_kernel(cfg, init, target0);
    const Rng root(RngHandle{cfg.seed, 0});

    const int n = init.n(), d = init.dim();
    Matrix pos = init.positions();
    FlowResult result{ParticleBatch(pos, Role::model), {}, {}, false, -1};

    auto snapshot_due = [&](int step) {
        if (step == 0 || step == cfg.n_steps) return true;
        return cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0;
    };

    for (int step = 0; step <= cfg.n_steps; ++step) {
        ParticleBatch current(pos, Role::model);
        ParticleBatch batch_y = cfg.resample_target ? target(step) : target0;

        Matrix v;
        try {
            v = compute_drift(cfg.drift, current, batch_y,
                              root.substream(static_cast<uint64_t>(step)).handle());
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("run_flow: step " + std::to_string(step) + ": " + e.what());
        } catch (const SingularityError& e) {
            throw SingularityError("run_flow: step " + std::to_string(step) + ": " + e.what());
        }

        FlowRecord rec;
        rec.step = step;
        rec.energy_mmd2 = mmd2_vstat(energy_kernel, current, batch_y);
        double sum_norm = 0.0, max_norm = 0.0;
        for (int i = 0; i < n; ++i) {
            const double nv = norm2(v.row(i));
            sum_norm += nv;
            max_norm = std::max(max_norm, nv);
        }
        rec.mean_drift_norm = sum_norm / n;
        rec.max_drift_norm = max_norm;
        result.records.push_back(rec);
        if (snapshot_due(step)) result.snapshots.emplace_back(step, current);
        if (step == cfg.n_steps) {
            result.final_particles = std::move(current);
            break;
        }

        bool finite = v.all_finite();
        if (finite) {
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < d; ++k) pos(i, k) += cfg.eta * v(i, k);
            finite = pos.all_finite();
        }
        if (!finite) {
            // Divergence is flagged and reported, never clipped.
            result.records.back().diverged = true;
            result.diverged = true;
            result.diverged_at_step = step;
            result.final_particles = std::move(current);
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Two-delta failure-mode experiment.
//
// p and q are mixtures of point masses at -D and +D with weights alpha and
// beta on the left atom. The exact population drifts at x = +D are evaluated
// in extended precision so that epsilon = exp(-4 D^2 / tau) is representable
// down to the long-double underflow threshold:
//
//   V_KL(D)  = -2D [ a e / (1-a + a e) - b e / (1-b + b e) ]
//   V_SP(D)  = (tau/2) Z(D) (score of k*p~ - score of k*q~) on two atoms
//   V_W2(D)  = -2D (a - b) / (1 - b), independent of tau.

struct TwoDeltaRow {
    double tau = 0.0;
    long double epsilon = 0.0L;
    long double v_kl = 0.0L;
    long double v_sp = 0.0L;
    long double sp_over_kl = 0.0L;
    long double v_w2 = 0.0L;
    bool underflowed = false;  // epsilon below extended-precision range
};

inline std::vector<TwoDeltaRow> two_delta_experiment(double separation, double alpha, double beta,
                                                     const std::vector<double>& tau_grid) {
    if (!(separation > 0.0)) throw ConfigError("two_delta_experiment: D must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
        throw ConfigError("two_delta_experiment: alpha and beta must lie in (0, 1)");
    if (beta > alpha)
        throw ConfigError("two_delta_experiment: requires beta <= alpha (model starved at -D)");
    const long double D = separation, a = alpha, b = beta;

    std::vector<TwoDeltaRow> rows;
    for (double tau : tau_grid) {
        if (!(tau > 0.0)) throw ConfigError("two_delta_experiment: every tau must be > 0");
        TwoDeltaRow row;
        row.tau = tau;
        row.v_w2 = -2.0L * D * (a - b) / (1.0L - b);
        const long double e = std::exp(-4.0L * D * D / static_cast<long double>(tau));
        row.epsilon = e;
        if (e == 0.0L) {
            row.underflowed = true;
            rows.push_back(row);
            continue;
        }

        // KL: scores of the smoothed mixtures at +D.
        const long double score_p = -(4.0L * D / tau) * a * e / ((1.0L - a) + a * e);
        const long double score_q = -(4.0L * D / tau) * b * e / ((1.0L - b) + b * e);
        row.v_kl = 0.5L * tau * (score_p - score_q);

        // Sinkhorn Proxy population form on the two atoms.
        const long double q_tau_plus = (1.0L - b) + b * e;   // q_tau(+D)
        const long double q_tau_minus = b + (1.0L - b) * e;  // q_tau(-D)
        const long double p_tau_plus = (1.0L - a) + a * e;
        const long double wp_minus = a / std::sqrt(q_tau_minus);        // p~ mass at -D
        const long double wp_plus = (1.0L - a) / std::sqrt(q_tau_plus); // p~ mass at +D
        const long double wq_minus = b / std::sqrt(q_tau_minus);
        const long double wq_plus = (1.0L - b) / std::sqrt(q_tau_plus);
        const long double conv_p = wp_minus * e + wp_plus;  // (k*p~)(+D)
        const long double conv_q = wq_minus * e + wq_plus;
        const long double grad_p = -(4.0L * D / tau) * wp_minus * e;
        const long double grad_q = -(4.0L * D / tau) * wq_minus * e;
        const long double s_plus = conv_p / std::sqrt(p_tau_plus);
        const long double s_minus = conv_q / std::sqrt(q_tau_plus);
        const long double z = s_plus * s_minus;
        row.v_sp = 0.5L * tau * z * (grad_p / conv_p - grad_q / conv_q);
        row.sp_over_kl = row.v_kl != 0.0L ? row.v_sp / row.v_kl : 0.0L;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace driftflow
