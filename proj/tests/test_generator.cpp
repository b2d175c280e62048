#include "doctest.h"

#include "test_helpers.hpp"

using namespace driftflow;
using testutil::random_batch;

TEST_CASE("zero output layer silences the network") {
    GeneratorModel model(2, 2, 16, 2, Activation::tanh_act);
    model.init_params(RngHandle{1, 0});
    std::fill(model.params.begin() + model.output_layer_offset(), model.params.end(), 0.0);
    Matrix noise(5, 2);
    Rng rng(3);
    for (double& v : noise.data()) v = rng.normal();
    const Matrix out = model.forward(noise);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("identity linear configuration is the identity") {
    GeneratorModel model(2, 2, 0, 0, Activation::relu);
    // layout: W_out (2x2) then b_out
    model.params = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
    Matrix noise(4, 2);
    Rng rng(5);
    for (double& v : noise.data()) v = rng.normal();
    const Matrix out = model.forward(noise);
    CHECK(testutil::max_abs_diff(out, noise) == 0.0);
}

TEST_CASE("forward matches a per-neuron loop oracle") {
    const int c = 3, d = 2, hidden = 5, blocks = 2;
    GeneratorModel model(c, d, hidden, blocks, Activation::tanh_act);
    model.init_params(RngHandle{7, 0});
    Matrix noise(6, c);
    Rng rng(8);
    for (double& v : noise.data()) v = rng.normal();
    const Matrix out = model.forward(noise);

    const auto& p = model.params;
    for (int i = 0; i < noise.rows(); ++i) {
        size_t off = 0;
        std::vector<double> h(hidden);
        for (int a = 0; a < hidden; ++a) {
            double s = 0.0;
            for (int b = 0; b < c; ++b) s += p[off + a * c + b] * noise(i, b);
            h[a] = std::tanh(s + p[off + hidden * c + a]);
        }
        off += static_cast<size_t>(hidden) * c + hidden;
        for (int blk = 0; blk < blocks; ++blk) {
            std::vector<double> t(hidden), delta(hidden);
            for (int a = 0; a < hidden; ++a) {
                double s = 0.0;
                for (int b = 0; b < hidden; ++b) s += p[off + a * hidden + b] * h[b];
                t[a] = std::tanh(s + p[off + static_cast<size_t>(hidden) * hidden + a]);
            }
            off += static_cast<size_t>(hidden) * hidden + hidden;
            for (int a = 0; a < hidden; ++a) {
                double s = 0.0;
                for (int b = 0; b < hidden; ++b) s += p[off + a * hidden + b] * t[b];
                delta[a] = s + p[off + static_cast<size_t>(hidden) * hidden + a];
            }
            off += static_cast<size_t>(hidden) * hidden + hidden;
            for (int a = 0; a < hidden; ++a) h[a] += delta[a];
        }
        for (int k = 0; k < d; ++k) {
            double s = 0.0;
            for (int b = 0; b < hidden; ++b) s += p[off + k * hidden + b] * h[b];
            CHECK(std::abs(out(i, k) - (s + p[off + static_cast<size_t>(d) * hidden + k])) < 1e-12);
        }
    }
}

TEST_CASE("gradients vanish when targets equal the outputs") {
    GeneratorModel model(2, 2, 8, 1, Activation::relu);
    model.init_params(RngHandle{11, 0});
    Matrix noise(7, 2);
    Rng rng(12);
    for (double& v : noise.data()) v = rng.normal();
    const Matrix out = model.forward(noise);
    const auto back = model.backward_mse(noise, out);
    CHECK(back.loss == 0.0);
    for (double g : back.grads) CHECK(g == 0.0);
}

TEST_CASE("single linear neuron gradient by hand") {
    GeneratorModel model(1, 1, 0, 0, Activation::relu);
    const double w = 0.7, b = -0.2, eps = 1.3, target = 0.5;
    model.params = {w, b};
    const Matrix noise = Matrix::from_rows({{eps}});
    const Matrix t = Matrix::from_rows({{target}});
    const auto back = model.backward_mse(noise, t);
    const double resid = w * eps + b - target;
    CHECK(back.grads[0] == doctest::Approx(2.0 * resid * eps).epsilon(1e-14));
    CHECK(back.grads[1] == doctest::Approx(2.0 * resid).epsilon(1e-14));
}

TEST_CASE("backward gradients match finite differences") {
    GeneratorModel model(2, 2, 6, 2, Activation::tanh_act);
    model.init_params(RngHandle{13, 0});
    const int n = 9;
    Matrix noise(n, 2), targets(n, 2);
    Rng rng(14);
    for (double& v : noise.data()) v = rng.normal();
    for (double& v : targets.data()) v = rng.normal();
    const auto back = model.backward_mse(noise, targets);

    auto loss_at = [&](const std::vector<double>& params) {
        GeneratorModel m = model;
        m.params = params;
        const Matrix out = m.forward(noise);
        double l = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 2; ++k) {
                const double diff = out(i, k) - targets(i, k);
                l += diff * diff / n;
            }
        return l;
    };
    Rng pick(15);
    const double h = 1e-5;
    for (int t = 0; t < 20; ++t) {
        const size_t idx = pick.uniform_index(model.param_count());
        auto pp = model.params, pm = model.params;
        pp[idx] += h;
        pm[idx] -= h;
        const double fd = (loss_at(pp) - loss_at(pm)) / (2 * h);
        CHECK(std::abs(back.grads[idx] - fd) <
              1e-4 * std::max({std::abs(fd), std::abs(back.grads[idx]), 1e-6}));
    }
}

TEST_CASE("relu activation backward also matches finite differences") {
    GeneratorModel model(2, 1, 5, 1, Activation::relu);
    model.init_params(RngHandle{17, 0});
    Matrix noise(6, 2), targets(6, 1);
    Rng rng(18);
    for (double& v : noise.data()) v = rng.normal();
    for (double& v : targets.data()) v = rng.normal();
    const auto back = model.backward_mse(noise, targets);
    auto loss_at = [&](const std::vector<double>& params) {
        GeneratorModel m = model;
        m.params = params;
        const Matrix out = m.forward(noise);
        double l = 0.0;
        for (int i = 0; i < 6; ++i) {
            const double diff = out(i, 0) - targets(i, 0);
            l += diff * diff / 6;
        }
        return l;
    };
    const double h = 1e-6;
    for (size_t idx = 0; idx < model.param_count(); idx += 7) {
        auto pp = model.params, pm = model.params;
        pp[idx] += h;
        pm[idx] -= h;
        const double fd = (loss_at(pp) - loss_at(pm)) / (2 * h);
        CHECK(std::abs(back.grads[idx] - fd) < 1e-4 * std::max({std::abs(fd), 1.0}));
    }
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
    GeneratorModel model(1, 1, 0, 0, Activation::relu);
    model.params = {0.4, -0.1};
    AdamState state(2);
    const std::vector<double> zeros(2, 0.0);
    const auto before = model.params;
    for (int t = 0; t < 5; ++t) adam_step(state, model.params, zeros, 1e-3);
    CHECK(model.params == before);
}

TEST_CASE("adam step magnitude approaches lr under a constant gradient") {
    std::vector<double> param{0.0};
    AdamState state(1);
    const std::vector<double> grad{0.37};
    const double lr = 1e-3;
    double last_step = 0.0;
    for (int t = 0; t < 2000; ++t) {
        const double before = param[0];
        adam_step(state, param, grad, lr);
        last_step = std::abs(param[0] - before);
    }
    CHECK(last_step == doctest::Approx(lr).epsilon(0.01));
}

TEST_CASE("adam matches a hand-executed reference trace") {
    // independent scalar re-implementation of the same update rule
    double m = 0.0, v = 0.0, ref_param = 0.5;
    std::vector<double> param{0.5};
    AdamState state(1);
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 10; ++t) {
        const double g = std::sin(static_cast<double>(t)) + 0.3;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        ref_param -= lr * mh / (std::sqrt(vh) + eps);

        adam_step(state, param, {g}, lr);
        CHECK(std::abs(param[0] - ref_param) < 1e-12);
    }
}

TEST_CASE("stop-gradient targets carry no parameter dependence") {
    GeneratorModel model(2, 2, 6, 1, Activation::tanh_act);
    model.init_params(RngHandle{21, 0});
    const int n = 16;
    Matrix noise(n, 2);
    Rng rng(22);
    for (double& v : noise.data()) v = rng.normal();
    const ParticleBatch data = random_batch(n, 2, 23, Role::data);
    const KernelSpec kernel{KernelFamily::gibbs_gaussian, 0.4, {}};
    const double eta = 1.0;

    const Matrix out = model.forward(noise);
    const Matrix drift = mmd_drift(kernel, ParticleBatch(out, Role::model), data);
    Matrix targets = out;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) targets(i, k) += eta * drift(i, k);
    const auto back = model.backward_mse(noise, targets);

    // direction probe: frozen targets reproduce the backward gradient,
    // recomputed (non-frozen) targets do not
    Rng dir_rng(24);
    std::vector<double> u(model.param_count());
    double nrm = 0.0;
    for (double& ui : u) {
        ui = dir_rng.normal();
        nrm += ui * ui;
    }
    nrm = std::sqrt(nrm);
    for (double& ui : u) ui /= nrm;
    double analytic = 0.0;
    for (size_t i = 0; i < u.size(); ++i) analytic += back.grads[i] * u[i];

    auto loss_frozen = [&](double s) {
        GeneratorModel m = model;
        for (size_t i = 0; i < u.size(); ++i) m.params[i] += s * u[i];
        const Matrix o = m.forward(noise);
        double l = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 2; ++k) {
                const double diff = o(i, k) - targets(i, k);
                l += diff * diff / n;
            }
        return l;
    };
    auto loss_recomputed = [&](double s) {
        GeneratorModel m = model;
        for (size_t i = 0; i < u.size(); ++i) m.params[i] += s * u[i];
        const Matrix o = m.forward(noise);
        const Matrix dv = mmd_drift(kernel, ParticleBatch(o, Role::model), data);
        double l = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 2; ++k) {
                const double diff = -eta * dv(i, k);  // o - (o + eta v)
                l += diff * diff / n;
            }
        return l;
    };
    const double h = 1e-5;
    const double fd_frozen = (loss_frozen(h) - loss_frozen(-h)) / (2 * h);
    const double fd_recomputed = (loss_recomputed(h) - loss_recomputed(-h)) / (2 * h);
    CHECK(std::abs(analytic - fd_frozen) < 1e-6 * std::max(1.0, std::abs(analytic)));
    CHECK(std::abs(analytic - fd_recomputed) > 1e-3 * std::abs(analytic));
}

TEST_CASE("training run is deterministic and improves the fit") {
    DatasetSpec ds;
    ds.name = DatasetName::moons;
    DataSampler sampler = [&](int n, RngHandle rng) { return sample_dataset(ds, n, rng); };

    TrainConfig cfg;
    cfg.drift = DriftConfig::make(DriftKind::mmd, 1.0);
    cfg.drift.kernel.bandwidths = {0.05, 0.2, 0.8};
    cfg.n_data = 64;
    cfg.n_model = 64;
    cfg.lr = 1e-3;
    cfg.n_steps = 400;
    cfg.log_every = 100;
    cfg.holdout_n = 128;
    cfg.seed = 31;

    GeneratorModel model(2, 2, 32, 1, Activation::tanh_act);
    model.init_params(RngHandle{cfg.seed, 999});

    const TrainResult a = train(cfg, sampler, model);
    const TrainResult b = train(cfg, sampler, model);
    REQUIRE_FALSE(a.diverged);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].loss == b.records[i].loss);
        CHECK(a.records[i].mmd2_holdout == b.records[i].mmd2_holdout);
    }
    CHECK(a.records.back().mmd2_holdout < a.records.front().mmd2_holdout);
}
