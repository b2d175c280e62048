#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "driftflow/drift.hpp"
#include "driftflow/metrics.hpp"

namespace driftflow {

// Residual MLP generator with hand-written forward/reverse passes over a
// flat parameter vector, plus Adam and the drifted-target training loop.
//
// Architecture (hidden > 0):
//   h = act(W_in e + b_in)
//   h = h + W2 act(W1 h + b1) + b2          (x n_blocks)
//   y = W_out h + b_out
// hidden == 0 degenerates to a single linear map y = W_out e + b_out.
// Parameters are stored flat in that order, each W row-major.

enum class Activation { relu, tanh_act };

inline const char* activation_str(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh_act;
    throw ConfigError("unknown activation '" + s + "' (valid: relu, tanh)");
}

namespace detail {

// Dot product with four independent accumulators; fixed summation tree, so
// results are deterministic while the dependency chain stays short.
inline double dot4(const double* __restrict__ a, const double* __restrict__ b, int n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    int k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for (; k < n; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
}

// y += W x  (W is rows x cols, row-major)
inline void matvec_add(const double* __restrict__ w, const double* __restrict__ x,
                       double* __restrict__ y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) y[r] += dot4(w + static_cast<size_t>(r) * cols, x, cols);
}

// x_grad += W^T delta;  w_grad += delta x^T
inline void matvec_backward(const double* __restrict__ w, const double* __restrict__ x,
                            const double* __restrict__ delta, double* __restrict__ x_grad,
                            double* __restrict__ w_grad, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const double dr = delta[r];
        const double* __restrict__ wr = w + static_cast<size_t>(r) * cols;
        double* __restrict__ gr = w_grad + static_cast<size_t>(r) * cols;
        if (x_grad) {
            for (int c = 0; c < cols; ++c) {
                gr[c] += dr * x[c];
                x_grad[c] += dr * wr[c];
            }
        } else {
            for (int c = 0; c < cols; ++c) gr[c] += dr * x[c];
        }
    }
}

}  // namespace detail

class GeneratorModel {
public:
    GeneratorModel(int noise_dim, int out_dim, int hidden, int n_blocks, Activation act)
        : c_(noise_dim), d_(out_dim), hidden_(hidden), blocks_(hidden > 0 ? n_blocks : 0), act_(act) {
        if (c_ < 1 || d_ < 1) throw ConfigError("GeneratorModel: noise/output dims must be >= 1");
        if (hidden_ < 0 || n_blocks < 0) throw ConfigError("GeneratorModel: negative architecture");
        size_t count = 0;
        if (hidden_ > 0) {
            count += static_cast<size_t>(hidden_) * c_ + hidden_;                    // stem
            count += static_cast<size_t>(blocks_) * (2ull * hidden_ * hidden_ + 2ull * hidden_);
            count += static_cast<size_t>(d_) * hidden_ + d_;                         // head
        } else {
            count += static_cast<size_t>(d_) * c_ + d_;
        }
        params.assign(count, 0.0);
    }

    // Weights ~ N(0, 1/fan_in), biases zero.
    void init_params(RngHandle handle) {
        Rng rng(handle);
        size_t off = 0;
        auto fill_layer = [&](int rows, int cols) {
            const double std = 1.0 / std::sqrt(static_cast<double>(cols));
            for (int i = 0; i < rows * cols; ++i) params[off++] = std * rng.normal();
            for (int i = 0; i < rows; ++i) params[off++] = 0.0;
        };
        if (hidden_ > 0) {
            fill_layer(hidden_, c_);
            for (int b = 0; b < blocks_; ++b) {
                fill_layer(hidden_, hidden_);
                fill_layer(hidden_, hidden_);
            }
            fill_layer(d_, hidden_);
        } else {
            fill_layer(d_, c_);
        }
    }

    int noise_dim() const { return c_; }
    int out_dim() const { return d_; }
    int hidden() const { return hidden_; }
    int n_blocks() const { return blocks_; }
    Activation activation() const { return act_; }
    size_t param_count() const { return params.size(); }

    // Offset of the output layer [W_out | b_out] within `params`.
    size_t output_layer_offset() const {
        return params.size() - (static_cast<size_t>(d_) * (hidden_ > 0 ? hidden_ : c_) + d_);
    }

    // Activations of a whole batch, cached for the reverse pass.
    struct ForwardPass {
        Matrix outputs;  // N x d
        Matrix stem_pre, stem_h, h_final;
        std::vector<Matrix> block_h_in, block_pre, block_t;
    };

    ForwardPass forward_pass(const Matrix& noise) const {
        check_noise(noise);
        const int n = noise.rows();
        ForwardPass fwd;
        fwd.outputs = Matrix(n, d_);
        if (hidden_ > 0) {
            fwd.stem_pre = Matrix(n, hidden_);
            fwd.stem_h = Matrix(n, hidden_);
            fwd.h_final = Matrix(n, hidden_);
            fwd.block_h_in.assign(blocks_, Matrix(n, hidden_));
            fwd.block_pre.assign(blocks_, Matrix(n, hidden_));
            fwd.block_t.assign(blocks_, Matrix(n, hidden_));
        }
        for (int i = 0; i < n; ++i) forward_sample(noise.row(i).data(), fwd, i);
        return fwd;
    }

    Matrix forward(const Matrix& noise) const { return forward_pass(noise).outputs; }

    struct BackwardResult {
        std::vector<double> grads;  // dL/dparams, same layout as params
        double loss = 0.0;          // (1/N) sum_i ||f(e_i) - t_i||^2
        Matrix outputs;
    };

    // Reverse pass over cached activations. Targets are plain numbers;
    // nothing differentiates through whatever produced them.
    BackwardResult backward_from(const Matrix& noise, const ForwardPass& fwd,
                                 const Matrix& targets) const {
        check_noise(noise);
        const int n = noise.rows();
        if (targets.rows() != n || targets.cols() != d_)
            throw ShapeError("backward_mse: target shape mismatch");
        if (fwd.outputs.rows() != n)
            throw ShapeError("backward_mse: forward pass batch mismatch");
        BackwardResult res;
        res.grads.assign(params.size(), 0.0);
        res.outputs = fwd.outputs;

        std::vector<double> dy(d_), dh(hidden_), dt(hidden_), dpre(hidden_), dh_in(hidden_);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < d_; ++k) {
                const double diff = fwd.outputs(i, k) - targets(i, k);
                res.loss += diff * diff / n;
                dy[k] = 2.0 * diff / n;
            }
            backward_sample(noise.row(i).data(), dy, dh, dt, dpre, dh_in, fwd, i, res.grads);
        }
        return res;
    }

    // Exact reverse-mode gradients of the mean squared error against fixed
    // targets (forward and reverse in one call).
    BackwardResult backward_mse(const Matrix& noise, const Matrix& targets) const {
        return backward_from(noise, forward_pass(noise), targets);
    }

    std::vector<double> params;

private:
    int c_;
    int d_;
    int hidden_;
    int blocks_;
    Activation act_;

    void check_noise(const Matrix& noise) const {
        if (noise.cols() != c_) throw ShapeError("GeneratorModel: noise dimension mismatch");
    }

    double act_fwd(double x) const { return act_ == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x); }
    double act_grad_from(double pre, double post) const {
        return act_ == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
    }

    // Parameter slice offsets.
    size_t stem_w() const { return 0; }
    size_t stem_b() const { return static_cast<size_t>(hidden_) * c_; }
    size_t block_off(int b) const {
        return stem_b() + hidden_ + static_cast<size_t>(b) * (2ull * hidden_ * hidden_ + 2ull * hidden_);
    }
    size_t block_w1(int b) const { return block_off(b); }
    size_t block_b1(int b) const { return block_off(b) + static_cast<size_t>(hidden_) * hidden_; }
    size_t block_w2(int b) const { return block_b1(b) + hidden_; }
    size_t block_b2(int b) const { return block_w2(b) + static_cast<size_t>(hidden_) * hidden_; }

    void forward_sample(const double* e, ForwardPass& fwd, int i) const {
        const double* p = params.data();
        double* y = fwd.outputs.row(i).data();
        if (hidden_ == 0) {
            const size_t off = output_layer_offset();
            for (int k = 0; k < d_; ++k) y[k] = p[off + static_cast<size_t>(d_) * c_ + k];
            detail::matvec_add(p + off, e, y, d_, c_);
            return;
        }
        double* pre = fwd.stem_pre.row(i).data();
        double* h = fwd.stem_h.row(i).data();
        for (int a = 0; a < hidden_; ++a) pre[a] = p[stem_b() + a];
        detail::matvec_add(p + stem_w(), e, pre, hidden_, c_);
        for (int a = 0; a < hidden_; ++a) h[a] = act_fwd(pre[a]);
        const double* h_cur = h;
        for (int b = 0; b < blocks_; ++b) {
            double* h_in = fwd.block_h_in[b].row(i).data();
            double* bpre = fwd.block_pre[b].row(i).data();
            double* t = fwd.block_t[b].row(i).data();
            double* h_out = (b + 1 < blocks_) ? fwd.block_h_in[b + 1].row(i).data()
                                              : fwd.h_final.row(i).data();
            if (b == 0)
                for (int a = 0; a < hidden_; ++a) h_in[a] = h_cur[a];
            for (int a = 0; a < hidden_; ++a) bpre[a] = p[block_b1(b) + a];
            detail::matvec_add(p + block_w1(b), h_in, bpre, hidden_, hidden_);
            for (int a = 0; a < hidden_; ++a) t[a] = act_fwd(bpre[a]);
            for (int a = 0; a < hidden_; ++a) h_out[a] = h_in[a] + p[block_b2(b) + a];
            detail::matvec_add(p + block_w2(b), t, h_out, hidden_, hidden_);
            h_cur = h_out;
        }
        if (blocks_ == 0)
            for (int a = 0; a < hidden_; ++a) fwd.h_final.row(i).data()[a] = h_cur[a];
        const size_t off = output_layer_offset();
        for (int k = 0; k < d_; ++k) y[k] = p[off + static_cast<size_t>(d_) * hidden_ + k];
        detail::matvec_add(p + off, fwd.h_final.row(i).data(), y, d_, hidden_);
    }

    void backward_sample(const double* e, const std::vector<double>& dy, std::vector<double>& dh,
                         std::vector<double>& dt, std::vector<double>& dpre,
                         std::vector<double>& dh_in, const ForwardPass& fwd, int i,
                         std::vector<double>& grads) const {
        const double* p = params.data();
        double* g = grads.data();
        const size_t off = output_layer_offset();
        if (hidden_ == 0) {
            for (int k = 0; k < d_; ++k) g[off + static_cast<size_t>(d_) * c_ + k] += dy[k];
            detail::matvec_backward(p + off, e, dy.data(), nullptr, g + off, d_, c_);
            return;
        }

        // head: y = W_out h_final + b_out. The residual stream gradient dh
        // starts at the head and accumulates each block's branch plus the
        // skip path on the way down.
        std::fill(dh.begin(), dh.end(), 0.0);
        for (int k = 0; k < d_; ++k) g[off + static_cast<size_t>(d_) * hidden_ + k] += dy[k];
        detail::matvec_backward(p + off, fwd.h_final.row(i).data(), dy.data(), dh.data(), g + off,
                                d_, hidden_);

        for (int b = blocks_ - 1; b >= 0; --b) {
            const double* h_in = fwd.block_h_in[b].row(i).data();
            const double* pre = fwd.block_pre[b].row(i).data();
            const double* t = fwd.block_t[b].row(i).data();
            // branch: delta = W2 t + b2; h_out = h_in + delta
            for (int a = 0; a < hidden_; ++a) g[block_b2(b) + a] += dh[a];
            std::fill(dt.begin(), dt.end(), 0.0);
            detail::matvec_backward(p + block_w2(b), t, dh.data(), dt.data(), g + block_w2(b),
                                    hidden_, hidden_);
            for (int a = 0; a < hidden_; ++a) dpre[a] = dt[a] * act_grad_from(pre[a], t[a]);
            for (int a = 0; a < hidden_; ++a) g[block_b1(b) + a] += dpre[a];
            std::fill(dh_in.begin(), dh_in.end(), 0.0);
            detail::matvec_backward(p + block_w1(b), h_in, dpre.data(), dh_in.data(),
                                    g + block_w1(b), hidden_, hidden_);
            for (int a = 0; a < hidden_; ++a) dh[a] += dh_in[a];  // skip + branch input paths
        }

        const double* stem_pre = fwd.stem_pre.row(i).data();
        const double* stem_h = fwd.stem_h.row(i).data();
        for (int a = 0; a < hidden_; ++a) dpre[a] = dh[a] * act_grad_from(stem_pre[a], stem_h[a]);
        for (int a = 0; a < hidden_; ++a) g[stem_b() + a] += dpre[a];
        detail::matvec_backward(p + stem_w(), e, dpre.data(), nullptr, g + stem_w(), hidden_, c_);
    }
};

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    std::vector<double> m, v;
    long t = 0;

    explicit AdamState(size_t n_params = 0) : m(n_params, 0.0), v(n_params, 0.0) {}
};

inline void adam_step(AdamState& state, std::vector<double>& params,
                      const std::vector<double>& grads, double lr) {
    if (state.m.size() != params.size() || grads.size() != params.size())
        throw ShapeError("adam_step: state/gradient size mismatch");
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

// ---------------------------------------------------------------------------
// Drifted-target training (stop-gradient targets)

struct TrainConfig {
    DriftConfig drift;
    int n_data = 256;    // N+ per step
    int n_model = 256;   // N- per step
    double eta = 1.0;    // drift step folded into the regression target
    double lr = 1e-4;
    int n_steps = 1000;
    int noise_dim = 2;
    uint64_t seed = 0;
    int log_every = 100;
    int holdout_n = 512;

    void validate() const {
        if (!(eta > 0.0)) throw ConfigError("TrainConfig: eta must be > 0");
        if (n_data < 1 || n_model < 1) throw ConfigError("TrainConfig: batch sizes must be >= 1");
        if (!(lr > 0.0)) throw ConfigError("TrainConfig: lr must be > 0");
        if (n_steps < 1) throw ConfigError("TrainConfig: n_steps must be >= 1");
        if (log_every < 1) throw ConfigError("TrainConfig: log_every must be >= 1");
        if (holdout_n < 2) throw ConfigError("TrainConfig: holdout_n must be >= 2");
    }
};

struct TrainRecord {
    int step = 0;           // records at step s describe the model before update s
    double loss = 0.0;      // regression loss of the logged step (0 at step 0)
    double mmd2_holdout = 0.0;
};

struct TrainResult {
    GeneratorModel model;
    std::vector<TrainRecord> records;
    bool diverged = false;
    int diverged_at_step = -1;
};

using DataSampler = std::function<ParticleBatch(int n, RngHandle rng)>;

// Called at every logged step with the current model (step 0 = initial).
using TrainObserver = std::function<void(int step, const GeneratorModel& model)>;

// Per step: sample a data batch and fresh noise, push the noise through the
// generator, drift the outputs, regress onto the detached drifted targets
// with one Adam step. Held-out MMD^2 is logged on the log_every cadence
// against a fixed data batch using fixed evaluation noise.
inline TrainResult train(const TrainConfig& cfg, const DataSampler& sample_data,
                         GeneratorModel model, const TrainObserver& observer = {}) {
    cfg.validate();
    const Rng root(RngHandle{cfg.seed, 0});
    enum : uint64_t { kData = 1, kNoise = 2, kHoldout = 3, kEvalNoise = 4, kDrift = 5 };

    const ParticleBatch holdout = sample_data(cfg.holdout_n, root.substream(kHoldout).handle());
    Matrix eval_noise(cfg.holdout_n, cfg.noise_dim);
    {
        Rng r = root.substream(kEvalNoise);
        for (double& v : eval_noise.data()) v = r.normal();
    }

    TrainResult result{std::move(model), {}, false, -1};
    AdamState adam(result.model.param_count());

    auto holdout_mmd2 = [&]() {
        const Matrix samples = result.model.forward(eval_noise);
        if (!samples.all_finite()) return std::numeric_limits<double>::quiet_NaN();
        return mmd2_median(ParticleBatch(samples, Role::model), holdout);
    };
    auto log_record = [&](int step, double loss) {
        result.records.push_back(TrainRecord{step, loss, holdout_mmd2()});
        if (observer) observer(step, result.model);
    };

    log_record(0, 0.0);
    for (int step = 0; step < cfg.n_steps; ++step) {
        const ParticleBatch data =
            sample_data(cfg.n_data, root.substream(kData).substream(step).handle());
        Matrix noise(cfg.n_model, cfg.noise_dim);
        {
            Rng r = root.substream(kNoise).substream(step);
            for (double& v : noise.data()) v = r.normal();
        }
        const GeneratorModel::ForwardPass fwd = result.model.forward_pass(noise);
        const Matrix& outputs = fwd.outputs;
        if (!outputs.all_finite()) {
            result.diverged = true;
            result.diverged_at_step = step;
            break;
        }
        const ParticleBatch model_batch(outputs, Role::model);

        Matrix velocity;
        try {
            velocity = compute_drift(cfg.drift, model_batch, data,
                                     root.substream(kDrift).substream(step).handle());
        } catch (const std::runtime_error& e) {
            throw ConvergenceError("train: drift failed at step " + std::to_string(step) + ": " +
                                   e.what());
        }

        // Detached targets t_i = x_i + eta * V(x_i); the drift path carries
        // no parameter dependence from here on.
        Matrix targets = outputs;
        for (int i = 0; i < targets.rows(); ++i)
            for (int k = 0; k < targets.cols(); ++k) targets(i, k) += cfg.eta * velocity(i, k);
        if (!targets.all_finite()) {
            result.diverged = true;
            result.diverged_at_step = step;
            break;
        }

        const auto back = result.model.backward_from(noise, fwd, targets);
        adam_step(adam, result.model.params, back.grads, cfg.lr);

        bool finite = true;
        for (double p : result.model.params)
            if (!std::isfinite(p)) {
                finite = false;
                break;
            }
        if (!finite) {
            result.diverged = true;
            result.diverged_at_step = step;
            break;
        }
        if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.n_steps)
            log_record(step + 1, back.loss);
    }
    return result;
}

}  // namespace driftflow
