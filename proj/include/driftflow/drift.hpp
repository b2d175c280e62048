#pragma once

#include <string>

#include "driftflow/drift_kl.hpp"
#include "driftflow/drift_mmd_sw.hpp"
#include "driftflow/sinkhorn.hpp"

namespace driftflow {

enum class DriftKind { kl, smoothed_kl, sinkhorn_exact, sinkhorn_proxy, sinkhorn_proxy_da2, mmd, sw };

inline const char* drift_kind_str(DriftKind k) {
    switch (k) {
        case DriftKind::kl: return "kl";
        case DriftKind::smoothed_kl: return "smoothed_kl";
        case DriftKind::sinkhorn_exact: return "sinkhorn_exact";
        case DriftKind::sinkhorn_proxy: return "sinkhorn_proxy";
        case DriftKind::sinkhorn_proxy_da2: return "sinkhorn_proxy_da2";
        case DriftKind::mmd: return "mmd";
        case DriftKind::sw: return "sw";
    }
    return "?";
}

inline const char* drift_kind_list() {
    return "kl, smoothed_kl, sinkhorn_exact, sinkhorn_proxy, sinkhorn_proxy_da2, mmd, sw";
}

inline DriftKind parse_drift_kind(std::string s) {
    for (char& c : s)
        if (c == '-') c = '_';
    for (DriftKind k : {DriftKind::kl, DriftKind::smoothed_kl, DriftKind::sinkhorn_exact,
                        DriftKind::sinkhorn_proxy, DriftKind::sinkhorn_proxy_da2, DriftKind::mmd,
                        DriftKind::sw}) {
        if (s == drift_kind_str(k)) return k;
    }
    throw ConfigError("unknown drift '" + s + "' (valid: " + drift_kind_list() + ")");
}

// One request = one drift kind plus every hyperparameter any kind needs.
// The kernel spec serves kl/smoothed_kl (parzen) and mmd (gibbs); the
// sinkhorn config serves the three sinkhorn kinds. This is the single entry
// point the flow simulator and the trainer go through.
struct DriftConfig {
    DriftKind kind = DriftKind::mmd;
    KernelSpec kernel{KernelFamily::gibbs_gaussian, 1.0, {}};
    SinkhornConfig sinkhorn;
    int mc_samples = 256;  // smoothed_kl estimator size
    int n_slices = 32;     // sw directions per evaluation
    bool ignore_self = false;

    // Sets tau coherently for whichever sub-config the kind consults and
    // picks the kernel family the kind requires.
    static DriftConfig make(DriftKind kind, double tau) {
        DriftConfig cfg;
        cfg.kind = kind;
        cfg.kernel.tau = tau;
        cfg.sinkhorn.tau = tau;
        cfg.kernel.family = (kind == DriftKind::kl || kind == DriftKind::smoothed_kl)
                                ? KernelFamily::parzen_gaussian
                                : KernelFamily::gibbs_gaussian;
        return cfg;
    }
};

// Velocity of every model particle under the selected drift. `rng` feeds
// only the stochastic kinds (smoothed_kl draws, sw directions).
inline Matrix compute_drift(const DriftConfig& cfg, const ParticleBatch& x_batch,
                            const ParticleBatch& y_batch, RngHandle rng) {
    switch (cfg.kind) {
        case DriftKind::kl:
            return kl_drift(cfg.kernel, x_batch, y_batch, cfg.ignore_self);
        case DriftKind::smoothed_kl:
            return smoothed_kl_drift(cfg.kernel, x_batch, y_batch, x_batch, cfg.mc_samples, rng);
        case DriftKind::sinkhorn_exact:
            return sinkhorn_exact_drift(cfg.sinkhorn, x_batch, y_batch);
        case DriftKind::sinkhorn_proxy:
            return sinkhorn_proxy_drift(cfg.sinkhorn, x_batch, y_batch, ProxyVariant::ours,
                                        cfg.ignore_self);
        case DriftKind::sinkhorn_proxy_da2:
            return sinkhorn_proxy_drift(cfg.sinkhorn, x_batch, y_batch, ProxyVariant::da2,
                                        cfg.ignore_self);
        case DriftKind::mmd:
            return mmd_drift(cfg.kernel, x_batch, y_batch);
        case DriftKind::sw:
            return sw_drift(x_batch, y_batch, cfg.n_slices, rng);
    }
    throw ConfigError("compute_drift: unhandled drift kind");
}

}  // namespace driftflow
