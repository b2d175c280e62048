#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "driftflow/batch.hpp"
#include "driftflow/errors.hpp"
#include "driftflow/rng.hpp"

namespace driftflow {

// Synthetic 2D toy datasets (plus the 1D two-delta mixture used by the
// failure-mode experiments). The shape constants below are the usual toy
// parameterizations at unit-order scale; they are fixed here and echoed into
// run manifests:
//   moons         - unit-radius half circles, lower moon shifted by (1, -0.5)
//   circles       - concentric circles, radii 1.0 and 0.5
//   eight_gaussians - centers on a ring of radius 2.0 at 45 degree spacing
//   pinwheel      - 5 blades, radial std 0.3, tangential std 0.1, rate 0.25,
//                   final 2x scaling
//   swiss_roll    - t in [1.5pi, 4.5pi], (t cos t, t sin t) scaled by 0.15
//   two_delta_mixture - d=1 atoms at -D (prob `weight`) and +D
// `noise_scale` adds isotropic Gaussian jitter on top of the skeleton for
// every dataset (for eight_gaussians it doubles as the component std).

enum class DatasetName { moons, circles, eight_gaussians, pinwheel, swiss_roll, two_delta_mixture };

struct TwoDeltaParams {
    double separation = 1.0;  // D: atoms sit at -D and +D
    double weight = 0.5;      // mixture mass at -D
    double jitter = 0.0;      // per-atom Gaussian jitter (0 = exact atoms)
};

struct DatasetSpec {
    DatasetName name = DatasetName::moons;
    double noise_scale = 0.05;
    TwoDeltaParams two_delta;
};

inline const char* dataset_name_str(DatasetName n) {
    switch (n) {
        case DatasetName::moons: return "moons";
        case DatasetName::circles: return "circles";
        case DatasetName::eight_gaussians: return "eight_gaussians";
        case DatasetName::pinwheel: return "pinwheel";
        case DatasetName::swiss_roll: return "swiss_roll";
        case DatasetName::two_delta_mixture: return "two_delta_mixture";
    }
    return "?";
}

inline DatasetName parse_dataset_name(const std::string& s) {
    for (DatasetName n : {DatasetName::moons, DatasetName::circles, DatasetName::eight_gaussians,
                          DatasetName::pinwheel, DatasetName::swiss_roll, DatasetName::two_delta_mixture}) {
        if (s == dataset_name_str(n)) return n;
    }
    throw ConfigError("unknown dataset '" + s +
                      "' (valid: moons, circles, eight_gaussians, pinwheel, swiss_roll, two_delta_mixture)");
}

inline int dataset_dim(DatasetName n) { return n == DatasetName::two_delta_mixture ? 1 : 2; }

namespace detail {

inline void sample_moons(Matrix& out, int n, Rng& rng) {
    const int n_outer = (n + 1) / 2;
    for (int i = 0; i < n; ++i) {
        const double t = M_PI * rng.uniform();
        if (i < n_outer) {
            out(i, 0) = std::cos(t);
            out(i, 1) = std::sin(t);
        } else {
            out(i, 0) = 1.0 - std::cos(t);
            out(i, 1) = 0.5 - std::sin(t);
        }
    }
}

inline void sample_circles(Matrix& out, int n, Rng& rng) {
    const int n_outer = (n + 1) / 2;
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * M_PI * rng.uniform();
        const double r = i < n_outer ? 1.0 : 0.5;
        out(i, 0) = r * std::cos(t);
        out(i, 1) = r * std::sin(t);
    }
}

inline void sample_eight_gaussians(Matrix& out, int n, Rng& rng) {
    const double radius = 2.0;
    for (int i = 0; i < n; ++i) {
        const int k = static_cast<int>(rng.uniform_index(8));
        const double theta = k * (M_PI / 4.0);
        out(i, 0) = radius * std::cos(theta);
        out(i, 1) = radius * std::sin(theta);
    }
}

inline void sample_pinwheel(Matrix& out, int n, Rng& rng) {
    const int blades = 5;
    const double radial_std = 0.3, tangential_std = 0.1, rate = 0.25;
    for (int i = 0; i < n; ++i) {
        const int b = static_cast<int>(rng.uniform_index(blades));
        const double f0 = 1.0 + radial_std * rng.normal();
        const double f1 = tangential_std * rng.normal();
        const double angle = b * (2.0 * M_PI / blades) + rate * std::exp(f0);
        const double c = std::cos(angle), s = std::sin(angle);
        out(i, 0) = 2.0 * (f0 * c + f1 * s);
        out(i, 1) = 2.0 * (-f0 * s + f1 * c);
    }
}

inline void sample_swiss_roll(Matrix& out, int n, Rng& rng) {
    const double scale = 0.15;
    for (int i = 0; i < n; ++i) {
        const double t = 1.5 * M_PI * (1.0 + 2.0 * rng.uniform());
        out(i, 0) = scale * t * std::cos(t);
        out(i, 1) = scale * t * std::sin(t);
    }
}

inline void sample_two_delta(Matrix& out, int n, const TwoDeltaParams& p, Rng& rng) {
    for (int i = 0; i < n; ++i) {
        const bool left = rng.uniform() < p.weight;
        double x = left ? -p.separation : p.separation;
        if (p.jitter > 0.0) x += p.jitter * rng.normal();
        out(i, 0) = x;
    }
}

}  // namespace detail

inline ParticleBatch sample_dataset(const DatasetSpec& spec, int n, RngHandle handle) {
    if (n < 1) throw ArgumentError("sample_dataset: n must be >= 1");
    if (spec.noise_scale < 0.0) throw ConfigError("sample_dataset: noise_scale must be >= 0");
    Rng rng(handle);
    Matrix out(n, dataset_dim(spec.name));
    switch (spec.name) {
        case DatasetName::moons: detail::sample_moons(out, n, rng); break;
        case DatasetName::circles: detail::sample_circles(out, n, rng); break;
        case DatasetName::eight_gaussians: detail::sample_eight_gaussians(out, n, rng); break;
        case DatasetName::pinwheel: detail::sample_pinwheel(out, n, rng); break;
        case DatasetName::swiss_roll: detail::sample_swiss_roll(out, n, rng); break;
        case DatasetName::two_delta_mixture: detail::sample_two_delta(out, n, spec.two_delta, rng); break;
    }
    if (spec.noise_scale > 0.0 && spec.name != DatasetName::two_delta_mixture) {
        for (int i = 0; i < out.rows(); ++i)
            for (int j = 0; j < out.cols(); ++j) out(i, j) += spec.noise_scale * rng.normal();
    }
    return ParticleBatch(std::move(out), Role::data, handle.seed);
}

}  // namespace driftflow
