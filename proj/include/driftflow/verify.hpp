#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "driftflow/datasets.hpp"
#include "driftflow/flow.hpp"
#include "driftflow/generator.hpp"

namespace driftflow {

// Numerical verification suite. Each check measures a quantity against an
// independently obtained reference (closed form, finite differences, or an
// exact identity) at a declared tolerance and reports a machine-readable
// record. All checks are deterministic under the master seed.

struct CheckResult {
    std::string name;
    bool passed = false;
    nlohmann::json measured;
    nlohmann::json expected;
    nlohmann::json tolerance;
    std::string provenance;  // what the reference value is
};

struct VerificationReport {
    std::vector<CheckResult> checks;
    uint64_t master_seed = 0;
    bool all_passed = true;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["master_seed"] = master_seed;
        j["all_passed"] = all_passed;
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"check", c.name},
                                   {"status", c.passed ? "pass" : "fail"},
                                   {"measured", c.measured},
                                   {"expected", c.expected},
                                   {"tolerance", c.tolerance},
                                   {"provenance", c.provenance}});
        return j;
    }
};

namespace checks {

inline ParticleBatch gaussian_batch(int n, int d, Rng& rng, Role role, double scale = 1.0) {
    Matrix m(n, d);
    for (double& v : m.data()) v = scale * rng.normal();
    return ParticleBatch(std::move(m), role);
}

// Tweedie identity: parzen_score vs central finite differences of the log
// kernel density over 100 random 2D queries.
inline CheckResult tweedie(Rng rng) {
    const KernelSpec spec{KernelFamily::parzen_gaussian, 0.35, {}};
    Rng r1 = rng.substream(1), r2 = rng.substream(2);
    const ParticleBatch support = gaussian_batch(40, 2, r1, Role::data);
    const double h = 1e-5;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x{1.5 * r2.normal(), 1.5 * r2.normal()};
        const auto score = parzen_score(spec, x, support);
        double err2 = 0.0, score2 = 0.0;
        for (int k = 0; k < 2; ++k) {
            auto xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fd =
                (log_parzen_density(spec, xp, support) - log_parzen_density(spec, xm, support)) /
                (2 * h);
            err2 += (score[k] - fd) * (score[k] - fd);
            score2 += score[k] * score[k];
        }
        worst = std::max(worst, std::sqrt(err2) / (1.0 + std::sqrt(score2)));
    }
    CheckResult res;
    res.name = "tweedie";
    res.measured = worst;
    res.expected = 0.0;
    res.tolerance = 1e-5;
    res.provenance = "central finite differences of log kernel density";
    res.passed = worst < 1e-5;
    return res;
}

// Identical model/data batches are exact fixed points of all seven drifts.
inline CheckResult consistency_identical_batches(Rng rng) {
    Rng r = rng.substream(1);
    DatasetSpec ds;
    ds.name = DatasetName::eight_gaussians;
    ds.noise_scale = 0.1;
    const ParticleBatch data = sample_dataset(ds, 64, r.handle());
    const ParticleBatch model(data.positions(), Role::model);

    CheckResult res;
    res.name = "consistency_identical_batches";
    res.expected = 0.0;
    res.tolerance = 0.0;
    res.provenance = "exact cancellation of attraction and repulsion terms";
    nlohmann::json measured = nlohmann::json::object();
    double worst = 0.0;
    for (DriftKind kind : {DriftKind::kl, DriftKind::smoothed_kl, DriftKind::sinkhorn_exact,
                           DriftKind::sinkhorn_proxy, DriftKind::sinkhorn_proxy_da2, DriftKind::mmd,
                           DriftKind::sw}) {
        DriftConfig cfg = DriftConfig::make(kind, 0.5);
        cfg.mc_samples = 64;
        cfg.sinkhorn.max_iters = 5000;
        const Matrix v = compute_drift(cfg, model, data, rng.substream(7).handle());
        double max_norm = 0.0;
        for (int i = 0; i < v.rows(); ++i) max_norm = std::max(max_norm, norm2(v.row(i)));
        measured[drift_kind_str(kind)] = max_norm;
        worst = std::max(worst, max_norm);
    }
    res.measured = measured;
    res.passed = worst == 0.0;
    return res;
}

namespace detail {

// Antisymmetric Jacobian component d1 V2 - d2 V1 of a planar field by
// central finite differences.
inline double antisymmetric_component(const std::function<std::vector<double>(double, double)>& field,
                                      double x0, double x1, double h) {
    const auto vxp = field(x0 + h, x1), vxm = field(x0 - h, x1);
    const auto vyp = field(x0, x1 + h), vym = field(x0, x1 - h);
    const double d1_v2 = (vxp[1] - vxm[1]) / (2 * h);
    const double d2_v1 = (vyp[0] - vym[0]) / (2 * h);
    return d1_v2 - d2_v1;
}

}  // namespace detail

// Two point masses at (+-1, 0): the population proxy field has curl 4/tau
// at (0, 1) while the KL, MMD and exact-Sinkhorn fields are curl-free.
inline CheckResult curl_toy(Rng) {
    const double tau = 1.0, h = 1e-5;
    const std::vector<Atom> p_atoms{{1.0, {1.0, 0.0}}};
    const std::vector<Atom> q_atoms{{1.0, {-1.0, 0.0}}};
    const double measured = detail::antisymmetric_component(
        [&](double a, double b) {
            return population_proxy_drift(std::vector<double>{a, b}, p_atoms, q_atoms, tau).velocity;
        },
        0.0, 1.0, h);
    CheckResult res;
    res.name = "curl_toy";
    res.measured = measured;
    res.expected = 4.0;
    res.tolerance = 0.01;
    res.provenance = "closed form 4 Z(0,1)/tau with Z(0,1) = 1";
    res.passed = std::abs(measured - 4.0) < 0.01;
    return res;
}

inline CheckResult conservative_fields_toy(Rng) {
    const double tau = 1.0, h = 1e-5;
    const Matrix one_b = Matrix::from_rows({{1.0, 0.0}});
    const Matrix one_a = Matrix::from_rows({{-1.0, 0.0}});
    const ParticleBatch pb(one_b, Role::data), qa(one_a, Role::model);
    const KernelSpec parzen{KernelFamily::parzen_gaussian, tau, {}};
    const KernelSpec gibbs{KernelFamily::gibbs_gaussian, tau, {}};
    SinkhornConfig sk;
    sk.tau = tau;
    sk.max_iters = 500;

    auto query = [](double a, double b) {
        return ParticleBatch(Matrix::from_rows({{a, b}}), Role::model);
    };
    std::map<std::string, std::function<std::vector<double>(double, double)>> fields = {
        {"kl",
         [&](double a, double b) {
             const Matrix v = kl_drift_at(parzen, query(a, b), qa, pb);
             return std::vector<double>{v(0, 0), v(0, 1)};
         }},
        {"mmd",
         [&](double a, double b) {
             const Matrix v = mmd_drift_at(gibbs, query(a, b), qa, pb);
             return std::vector<double>{v(0, 0), v(0, 1)};
         }},
        {"sinkhorn_exact", [&](double a, double b) {
             const Matrix v = sinkhorn_exact_drift(sk, query(a, b), pb);
             return std::vector<double>{v(0, 0), v(0, 1)};
         }}};

    CheckResult res;
    res.name = "conservative_fields_toy";
    res.expected = 0.0;
    res.tolerance = 1e-3;
    res.provenance = "gradient fields have symmetric Jacobians";
    nlohmann::json measured = nlohmann::json::object();
    bool ok = true;
    for (const auto& [name, field] : fields) {
        const double anti = std::abs(detail::antisymmetric_component(field, 0.0, 1.0, h));
        measured[name] = anti;
        ok = ok && anti < 1e-3;
    }
    res.measured = measured;
    res.passed = ok;
    return res;
}

// Two-delta leading-order behaviour at D=1, alpha=0.8, beta=0.4.
inline CheckResult failure_mode_asymptotics(Rng) {
    const double D = 1.0, alpha = 0.8, beta = 0.4;
    const std::vector<double> taus{0.5, 0.4, 0.3};
    const auto rows = two_delta_experiment(D, alpha, beta, taus);

    const double kl_limit = alpha / (1 - alpha) - beta / (1 - beta);  // 10/3
    const double sp_limit = std::sqrt((1 - alpha) / beta);            // sqrt(0.5)
    const double w2_exact = -2.0 * D * (alpha - beta) / (1 - beta);   // -4/3

    double worst_kl = 0.0, worst_sp = 0.0, worst_w2 = 0.0;
    std::vector<double> log_eps, log_vkl;
    for (const auto& row : rows) {
        const double kl_ratio =
            static_cast<double>(row.v_kl / (-2.0L * D * row.epsilon));
        const double sp_ratio = static_cast<double>(row.sp_over_kl);
        worst_kl = std::max(worst_kl, std::abs(kl_ratio / kl_limit - 1.0));
        worst_sp = std::max(worst_sp, std::abs(sp_ratio / sp_limit - 1.0));
        worst_w2 = std::max(worst_w2, std::abs(static_cast<double>(row.v_w2) - w2_exact));
        log_eps.push_back(static_cast<double>(std::log(row.epsilon)));
        log_vkl.push_back(static_cast<double>(std::log(std::abs(row.v_kl))));
    }
    // least-squares slope of log |V_KL| against log epsilon
    const double mx = mean(log_eps), my = mean(log_vkl);
    double sxy = 0.0, sxx = 0.0;
    for (size_t i = 0; i < log_eps.size(); ++i) {
        sxy += (log_eps[i] - mx) * (log_vkl[i] - my);
        sxx += (log_eps[i] - mx) * (log_eps[i] - mx);
    }
    const double slope = sxy / sxx;

    CheckResult res;
    res.name = "failure_mode_asymptotics";
    res.measured = {{"kl_ratio_rel_err", worst_kl},
                    {"sp_ratio_rel_err", worst_sp},
                    {"w2_abs_err", worst_w2},
                    {"loglog_slope", slope}};
    res.expected = {{"kl_ratio", kl_limit}, {"sp_ratio", sp_limit}, {"w2", w2_exact}, {"slope", 1.0}};
    res.tolerance = {{"kl_ratio_rel", 0.01}, {"sp_ratio_rel", 0.01}, {"w2_abs", 1e-12}, {"slope", 0.02}};
    res.provenance = "exact two-atom population drifts in extended precision";
    res.passed = worst_kl < 0.01 && worst_sp < 0.01 && worst_w2 < 1e-12 &&
                 std::abs(slope - 1.0) < 0.02;
    return res;
}

// Exact Sinkhorn drift vs a finite-difference gradient of the empirical
// debiased divergence. The drift is the velocity of the uniform-mass
// particle system, i.e. -N^- times the gradient of S_tau in the coordinates.
inline CheckResult sinkhorn_exact_gradient(Rng) {
    SinkhornConfig cfg;
    cfg.tau = 0.5;
    cfg.max_iters = 5000;
    cfg.marginal_tol = 1e-13;
    const int n = 6;
    Matrix xm = Matrix::from_rows({{-1.5}, {-0.4}, {0.3}, {0.9}, {1.7}, {2.2}});
    const Matrix ym = Matrix::from_rows({{-1.8}, {-0.9}, {-0.1}, {0.6}, {1.2}, {2.5}});
    const ParticleBatch y(ym, Role::data);

    const Matrix v = sinkhorn_exact_drift(cfg, ParticleBatch(xm, Role::model), y);
    const TransportPlan plan = sinkhorn_solve(cfg, ParticleBatch(xm, Role::model), y);

    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        Matrix xp = xm, xq = xm;
        xp(i, 0) += h;
        xq(i, 0) -= h;
        const double sp = sinkhorn_divergence(cfg, ParticleBatch(xp, Role::model), y);
        const double sm = sinkhorn_divergence(cfg, ParticleBatch(xq, Role::model), y);
        const double fd = -(sp - sm) / (2 * h) * n;  // velocity = -N^- * dS/dx_i
        worst = std::max(worst, std::abs(v(i, 0) - fd) / std::max(std::abs(fd), 1e-12));
    }

    CheckResult res;
    res.name = "sinkhorn_exact_gradient";
    res.measured = {{"max_rel_err", worst}, {"row_marginal_err", plan.row_marginal_err}};
    res.expected = {{"max_rel_err", 0.0}, {"row_marginal_err", 0.0}};
    res.tolerance = {{"max_rel_err", 1e-4}, {"row_marginal_err", 1e-9}};
    res.provenance = "finite differences of the converged debiased divergence";
    res.passed = worst < 1e-4 && plan.row_marginal_err < 1e-9;
    return res;
}

// 200 symmetric normalization steps on a random Gibbs matrix must land on
// the converged Sinkhorn plan (scaled to unit marginals).
inline CheckResult symmetric_normalization(Rng rng) {
    Rng r = rng.substream(1);
    const int n = 6;
    const ParticleBatch x = gaussian_batch(n, 2, r, Role::model);
    const ParticleBatch y = gaussian_batch(n, 2, r, Role::data);

    const double tau = 2.0;
    Matrix gibbs = pairwise_sq_dists(x, y);
    for (double& v : gibbs.data()) v = std::exp(-v / tau);

    const TransportPlan sym = iterate_symmetric_normalization(gibbs, 200, 1e-12);

    SinkhornConfig cfg;
    cfg.tau = tau;
    cfg.cost = CostConvention::sq;  // same Gibbs kernel exp(-d^2/tau)
    cfg.max_iters = 5000;
    cfg.marginal_tol = 1e-13;
    const TransportPlan sk = sinkhorn_solve(cfg, x, y);

    // The symmetric iteration converges to the doubly stochastic scaling;
    // with uniform 1/N marginals that is N times the solver's joint plan.
    double worst = 0.0;
    const double log_n = std::log(static_cast<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double sym_entry = std::exp(sym.log_plan(i, j));
            const double sk_entry = std::exp(sk.log_plan(i, j) + log_n);
            worst = std::max(worst, std::abs(sym_entry - sk_entry));
        }

    CheckResult res;
    res.name = "symmetric_normalization";
    res.measured = worst;
    res.expected = 0.0;
    res.tolerance = 1e-8;
    res.provenance = "converged alternating Sinkhorn solver on the same Gibbs matrix";
    res.passed = worst < 1e-8;
    return res;
}

// Gradient of the drifted-target loss vs 2 eta times the gradient of the
// fixed-batch MMD energy F(theta) = MMD^2(data, f_theta(noise)) / 2.
inline CheckResult surrogate_gradient(Rng rng) {
    Rng r = rng.substream(1);
    GeneratorModel model(2, 2, 6, 1, Activation::tanh_act);
    model.init_params(r.substream(0).handle());

    const int n = 32;
    DatasetSpec ds;
    ds.name = DatasetName::moons;
    const ParticleBatch data = sample_dataset(ds, n, r.substream(1).handle());
    Matrix noise(n, 2);
    {
        Rng rn = r.substream(2);
        for (double& v : noise.data()) v = rn.normal();
    }

    const KernelSpec kernel{KernelFamily::gibbs_gaussian, 0.3, {}};
    const double eta = 1.0, h = 1e-5;

    auto energy = [&](const std::vector<double>& params) {
        GeneratorModel m = model;
        m.params = params;
        const Matrix out = m.forward(noise);
        return 0.5 * mmd2_vstat(kernel, ParticleBatch(out, Role::model), data);
    };

    const Matrix outputs = model.forward(noise);
    const ParticleBatch model_batch(outputs, Role::model);
    const Matrix v = mmd_drift(kernel, model_batch, data);
    Matrix targets = outputs;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) targets(i, k) += eta * v(i, k);
    const auto back = model.backward_mse(noise, targets);

    Rng rd = r.substream(3);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        std::vector<double> u(model.param_count());
        double nrm = 0.0;
        for (double& ui : u) {
            ui = rd.normal();
            nrm += ui * ui;
        }
        nrm = std::sqrt(nrm);
        for (double& ui : u) ui /= nrm;

        double gl = 0.0;
        for (size_t i = 0; i < u.size(); ++i) gl += back.grads[i] * u[i];

        auto shifted = [&](double s) {
            std::vector<double> p = model.params;
            for (size_t i = 0; i < p.size(); ++i) p[i] += s * u[i];
            return p;
        };
        const double fd = (energy(shifted(h)) - energy(shifted(-h))) / (2 * h);
        const double rhs = 2.0 * eta * fd;
        worst = std::max(worst, std::abs(gl - rhs) / std::max({std::abs(gl), std::abs(rhs), 1e-10}));
    }

    CheckResult res;
    res.name = "surrogate_gradient";
    res.measured = worst;
    res.expected = 0.0;
    res.tolerance = 1e-3;
    res.provenance = "finite differences of the fixed-batch MMD energy";
    res.passed = worst < 1e-3;
    return res;
}

// Reverse-mode gradients vs central finite differences on 20 parameters.
inline CheckResult backprop_fd(Rng rng) {
    Rng r = rng.substream(1);
    GeneratorModel model(3, 2, 8, 2, Activation::tanh_act);
    model.init_params(r.substream(0).handle());
    const int n = 16;
    Matrix noise(n, 3), targets(n, 2);
    {
        Rng rn = r.substream(1);
        for (double& v : noise.data()) v = rn.normal();
        for (double& v : targets.data()) v = rn.normal();
    }
    const auto back = model.backward_mse(noise, targets);

    auto loss_at = [&](const std::vector<double>& params) {
        GeneratorModel m = model;
        m.params = params;
        const Matrix out = m.forward(noise);
        double l = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 2; ++k) {
                const double d = out(i, k) - targets(i, k);
                l += d * d / n;
            }
        return l;
    };

    Rng rp = r.substream(2);
    const double h = 1e-5;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const size_t idx = rp.uniform_index(model.param_count());
        std::vector<double> pp = model.params, pm = model.params;
        pp[idx] += h;
        pm[idx] -= h;
        const double fd = (loss_at(pp) - loss_at(pm)) / (2 * h);
        const double g = back.grads[idx];
        worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-8}));
    }

    CheckResult res;
    res.name = "backprop_fd";
    res.measured = worst;
    res.expected = 0.0;
    res.tolerance = 1e-4;
    res.provenance = "central finite differences of the regression loss";
    res.passed = worst < 1e-4;
    return res;
}

// The pointwise score-difference drift and the smoothed-KL field disagree:
// on supports p = {0}, q = {0.5} the two differ by 0.5 at the query 0.
inline CheckResult smoothed_kl_distinction(Rng rng) {
    const KernelSpec spec{KernelFamily::parzen_gaussian, 1.0, {}};
    const ParticleBatch x(Matrix::from_rows({{0.5}}), Role::model);
    const ParticleBatch y(Matrix::from_rows({{0.0}}), Role::data);
    const ParticleBatch queries(Matrix::from_rows({{0.0}}), Role::model);

    const Matrix pointwise = kl_drift_at(spec, queries, x, y);
    Matrix se;
    const Matrix smoothed =
        smoothed_kl_drift(spec, x, y, queries, 20000, rng.substream(1).handle(), &se);

    const double diff = std::abs(smoothed(0, 0) - pointwise(0, 0));
    const double threshold = 5.0 * se(0, 0);
    CheckResult res;
    res.name = "smoothed_kl_distinction";
    res.measured = {{"difference", diff},
                    {"mc_stderr", se(0, 0)},
                    {"smoothed", smoothed(0, 0)},
                    {"pointwise", pointwise(0, 0)}};
    res.expected = {{"difference", 0.5}};
    res.tolerance = {{"exceeds_stderr_multiple", 5.0}};
    res.provenance = "single-atom scores are linear; the two forms differ by a closed-form 0.5";
    res.passed = diff > threshold && diff > 0.25;
    return res;
}

}  // namespace checks

inline std::vector<std::string> verification_check_names() {
    return {"tweedie",
            "consistency_identical_batches",
            "curl_toy",
            "conservative_fields_toy",
            "failure_mode_asymptotics",
            "sinkhorn_exact_gradient",
            "symmetric_normalization",
            "surrogate_gradient",
            "backprop_fd",
            "smoothed_kl_distinction"};
}

inline VerificationReport run_verification_suite(const std::set<std::string>& selector,
                                                 uint64_t master_seed = 12345) {
    if (selector.empty()) throw ArgumentError("run_verification_suite: empty selector");
    using CheckFn = std::function<CheckResult(Rng)>;
    const std::vector<std::pair<std::string, CheckFn>> registry = {
        {"tweedie", checks::tweedie},
        {"consistency_identical_batches", checks::consistency_identical_batches},
        {"curl_toy", checks::curl_toy},
        {"conservative_fields_toy", checks::conservative_fields_toy},
        {"failure_mode_asymptotics", checks::failure_mode_asymptotics},
        {"sinkhorn_exact_gradient", checks::sinkhorn_exact_gradient},
        {"symmetric_normalization", checks::symmetric_normalization},
        {"surrogate_gradient", checks::surrogate_gradient},
        {"backprop_fd", checks::backprop_fd},
        {"smoothed_kl_distinction", checks::smoothed_kl_distinction}};

    for (const auto& name : selector) {
        if (name == "all") continue;
        bool known = false;
        for (const auto& [n, fn] : registry) known = known || n == name;
        if (!known) {
            std::string valid;
            for (const auto& [n, fn] : registry) valid += (valid.empty() ? "" : ", ") + n;
            throw ConfigError("unknown check '" + name + "' (valid: all, " + valid + ")");
        }
    }

    VerificationReport report;
    report.master_seed = master_seed;
    const bool run_all = selector.count("all") > 0;
    uint64_t tag = 0;
    for (const auto& [name, fn] : registry) {
        ++tag;
        if (!run_all && selector.count(name) == 0) continue;
        CheckResult c = fn(Rng(RngHandle{master_seed, tag}));
        report.all_passed = report.all_passed && c.passed;
        report.checks.push_back(std::move(c));
    }
    return report;
}

}  // namespace driftflow
