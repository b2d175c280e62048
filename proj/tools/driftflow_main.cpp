// driftflow command-line driver.
//
// Subcommands:
//   flow      Euler particle flow under a selected drift; CSV + SVG artifacts
//   train     drifted-target generator training
//   verify    numerical verification suite, JSON report
//   sweep     drift x tau x dataset x seed grids, plus the two-delta table
//   datasets  export dataset samples as CSV
//
// Exit codes: 0 success, 1 check failure, 2 configuration error,
// 3 runtime divergence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "driftflow/driftflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace driftflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

std::string build_id() {
    std::ostringstream os;
#if defined(__VERSION__)
    os << "g++ " << __VERSION__;
#else
    os << "unknown compiler";
#endif
    os << ", c++" << (__cplusplus / 100 % 100);
    return os.str();
}

// The manifest is written last; everything it lists already exists.
class Manifest {
public:
    Manifest(int argc, char** argv, fs::path dir) : dir_(std::move(dir)) {
        for (int i = 0; i < argc; ++i) argv_.push_back(argv[i]);
        started_ = iso_timestamp();
    }
    void set_config(json cfg) { config_ = std::move(cfg); }
    void add_output(const fs::path& p) { outputs_.push_back(p); }
    fs::path dir() const { return dir_; }

    fs::path write() {
        json j;
        j["command_line"] = argv_;
        j["config"] = config_;
        j["build"] = build_id();
        j["started"] = started_;
        j["finished"] = iso_timestamp();
        json outs = json::array();
        for (const auto& p : outputs_) {
            if (!fs::exists(p)) throw ConfigError("manifest lists missing output: " + p.string());
            outs.push_back({{"path", fs::relative(p, dir_).string()},
                            {"bytes", static_cast<uint64_t>(fs::file_size(p))}});
        }
        j["outputs"] = outs;
        const fs::path path = dir_ / "manifest.json";
        write_text_file(path, j.dump(2) + "\n");
        return path;
    }

private:
    fs::path dir_;
    std::vector<std::string> argv_;
    std::string started_;
    json config_;
    std::vector<fs::path> outputs_;
};

// Options shared by every drift-driven subcommand.
struct DriftOptions {
    std::string drift = "mmd";
    std::string variant = "ours";
    double tau = 0.5;
    std::vector<double> bandwidths;
    int sinkhorn_iters = 100;
    double sinkhorn_tol = 1e-9;
    int mc_samples = 256;
    int n_slices = 32;
    bool ignore_self = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--drift", drift, "drift kind (" + std::string(drift_kind_list()) + ")");
        cmd->add_option("--variant", variant, "sinkhorn proxy variant: ours | da2")
            ->check(CLI::IsMember({"ours", "da2"}));
        cmd->add_option("--tau", tau, "kernel bandwidth / entropic regularization")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--bandwidths", bandwidths, "bandwidth list for multi-kernel mmd");
        cmd->add_option("--sinkhorn-iters", sinkhorn_iters, "max Sinkhorn iterations")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--sinkhorn-tol", sinkhorn_tol, "Sinkhorn marginal tolerance")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--mc-samples", mc_samples, "smoothed-kl Monte Carlo samples")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--slices", n_slices, "sliced-wasserstein directions")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--ignore-self", ignore_self, "drop self-interactions from repulsion terms");
    }

    DriftConfig resolve() const {
        DriftKind kind = parse_drift_kind(drift);
        if (kind == DriftKind::sinkhorn_proxy && variant == "da2") kind = DriftKind::sinkhorn_proxy_da2;
        DriftConfig cfg = DriftConfig::make(kind, tau);
        if (!bandwidths.empty()) {
            if (kind != DriftKind::mmd)
                throw ConfigError("--bandwidths is only meaningful for the mmd drift");
            cfg.kernel.bandwidths = bandwidths;
        }
        cfg.sinkhorn.max_iters = sinkhorn_iters;
        cfg.sinkhorn.marginal_tol = sinkhorn_tol;
        cfg.mc_samples = mc_samples;
        cfg.n_slices = n_slices;
        cfg.ignore_self = ignore_self;
        return cfg;
    }

    json to_json() const {
        return {{"drift", drift},         {"variant", variant},
                {"tau", tau},             {"bandwidths", bandwidths},
                {"sinkhorn_iters", sinkhorn_iters}, {"sinkhorn_tol", sinkhorn_tol},
                {"mc_samples", mc_samples}, {"slices", n_slices},
                {"ignore_self", ignore_self}};
    }
};

struct DatasetOptions {
    std::string dataset = "moons";
    std::string data_csv;
    double noise = 0.05;
    double delta_d = 1.0;
    double delta_weight = 0.5;
    double delta_jitter = 0.0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--dataset", dataset,
                        "dataset (moons, circles, eight_gaussians, pinwheel, swiss_roll, "
                        "two_delta_mixture)");
        cmd->add_option("--data-csv", data_csv, "reuse a previously exported batch as the target");
        cmd->add_option("--noise", noise, "dataset noise scale")->check(CLI::NonNegativeNumber);
        cmd->add_option("--delta-d", delta_d, "two_delta_mixture: atom separation D");
        cmd->add_option("--delta-weight", delta_weight, "two_delta_mixture: mass at -D");
        cmd->add_option("--delta-jitter", delta_jitter, "two_delta_mixture: atom jitter");
    }

    DatasetSpec resolve() const {
        DatasetSpec spec;
        spec.name = parse_dataset_name(dataset);
        spec.noise_scale = noise;
        spec.two_delta = TwoDeltaParams{delta_d, delta_weight, delta_jitter};
        return spec;
    }

    json to_json() const {
        return {{"dataset", dataset},     {"data_csv", data_csv},
                {"noise", noise},         {"delta_d", delta_d},
                {"delta_weight", delta_weight}, {"delta_jitter", delta_jitter}};
    }
};

ParticleBatch gaussian_init(int n, int d, double scale, RngHandle handle) {
    Rng rng(handle);
    Matrix m(n, d);
    for (double& v : m.data()) v = scale * rng.normal();
    return ParticleBatch(std::move(m), Role::model);
}

std::string step_tag(int step) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", step);
    return buf;
}

// ---------------------------------------------------------------------- flow

int cmd_flow(int argc, char** argv, const DriftOptions& drift_opts,
             const DatasetOptions& data_opts, int n, int n_target, double eta, int steps,
             int snapshot_every, uint64_t seed, double init_scale, bool fixed_target,
             const std::string& out_dir) {
    Manifest manifest(argc, argv, out_dir);
    DriftConfig drift = drift_opts.resolve();

    const bool from_csv = !data_opts.data_csv.empty();
    DatasetSpec ds;
    ParticleBatch csv_target = from_csv ? read_batch_csv(data_opts.data_csv, Role::data)
                                        : ParticleBatch(Matrix(1, 1), Role::data);
    if (!from_csv) ds = data_opts.resolve();
    if (n_target <= 0) n_target = n;

    TargetProvider target = [&](int step) -> ParticleBatch {
        if (from_csv) return csv_target;
        return sample_dataset(ds, n_target,
                              derive_stream(RngHandle{seed, 200}, static_cast<uint64_t>(step + 1)));
    };
    const int dim = target(-1).dim();
    const ParticleBatch init = gaussian_init(n, dim, init_scale, RngHandle{seed, 100});

    FlowConfig cfg;
    cfg.drift = drift;
    cfg.eta = eta;
    cfg.n_steps = steps;
    cfg.snapshot_every = snapshot_every;
    cfg.seed = seed;
    cfg.resample_target = !fixed_target && !from_csv;

    manifest.set_config({{"command", "flow"},
                         {"drift", drift_opts.to_json()},
                         {"data", data_opts.to_json()},
                         {"n", n},
                         {"n_target", n_target},
                         {"eta", eta},
                         {"steps", steps},
                         {"snapshot_every", snapshot_every},
                         {"seed", seed},
                         {"init_scale", init_scale},
                         {"fixed_target", fixed_target}});

    const FlowResult result = run_flow(cfg, init, target);

    const fs::path dir = manifest.dir();
    write_flow_metrics_csv(dir / "metrics.csv", result.records);
    manifest.add_output(dir / "metrics.csv");
    write_batch_csv(dir / "target.csv", target(-1));
    manifest.add_output(dir / "target.csv");
    fs::path last_snapshot;
    for (const auto& [step, batch] : result.snapshots) {
        const fs::path p = dir / ("snapshot_" + step_tag(step) + ".csv");
        write_batch_csv(p, batch);
        manifest.add_output(p);
        last_snapshot = p;
    }
    // Plots are rendered from the CSVs just written, never from live state.
    write_svg_scatter(dir / "particles.svg", "flow: target vs final particles",
                      scatter_series_from_csvs({{dir / "target.csv", "#bbbbbb"},
                                                {last_snapshot, "#1f77b4"}}));
    manifest.add_output(dir / "particles.svg");
    manifest.write();

    if (result.diverged) {
        std::cerr << "flow diverged at step " << result.diverged_at_step << "\n";
        return kExitDivergence;
    }
    std::cout << "flow finished: " << result.records.size() << " records, final energy "
              << format_double(result.records.back().energy_mmd2) << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- train

int cmd_train(int argc, char** argv, const DriftOptions& drift_opts,
              const DatasetOptions& data_opts, TrainConfig cfg, int hidden, int blocks,
              const std::string& activation, int plot_every, const std::string& out_dir) {
    Manifest manifest(argc, argv, out_dir);
    cfg.drift = drift_opts.resolve();

    const bool from_csv = !data_opts.data_csv.empty();
    const DatasetSpec ds = from_csv ? DatasetSpec{} : data_opts.resolve();
    ParticleBatch csv_data = from_csv ? read_batch_csv(data_opts.data_csv, Role::data)
                                      : ParticleBatch(Matrix(1, 1), Role::data);
    DataSampler sampler = [&](int count, RngHandle rng) -> ParticleBatch {
        if (!from_csv) return sample_dataset(ds, count, rng);
        Rng r(rng);
        Matrix m(count, csv_data.dim());
        for (int i = 0; i < count; ++i) {
            const auto p = csv_data.point(static_cast<int>(r.uniform_index(csv_data.n())));
            for (int k = 0; k < csv_data.dim(); ++k) m(i, k) = p[k];
        }
        return ParticleBatch(std::move(m), Role::data);
    };

    const int out_dim = from_csv ? csv_data.dim() : dataset_dim(ds.name);
    GeneratorModel model(cfg.noise_dim, out_dim, hidden, blocks, parse_activation(activation));
    model.init_params(RngHandle{cfg.seed, 999});

    manifest.set_config({{"command", "train"},
                         {"drift", drift_opts.to_json()},
                         {"data", data_opts.to_json()},
                         {"n_data", cfg.n_data},
                         {"n_model", cfg.n_model},
                         {"eta", cfg.eta},
                         {"lr", cfg.lr},
                         {"steps", cfg.n_steps},
                         {"noise_dim", cfg.noise_dim},
                         {"hidden", hidden},
                         {"blocks", blocks},
                         {"activation", activation},
                         {"log_every", cfg.log_every},
                         {"holdout_n", cfg.holdout_n},
                         {"plot_every", plot_every},
                         {"seed", cfg.seed}});

    const fs::path dir = manifest.dir();

    // fixed evaluation noise for the sample grids
    Matrix plot_noise(512, cfg.noise_dim);
    {
        Rng nr = Rng(RngHandle{cfg.seed, 777}).substream(1);
        for (double& v : plot_noise.data()) v = nr.normal();
    }
    std::vector<fs::path> grid_csvs;
    TrainObserver observer = {};
    if (plot_every > 0) {
        observer = [&](int step, const GeneratorModel& m) {
            if (step % plot_every != 0) return;
            const Matrix samples = m.forward(plot_noise);
            if (!samples.all_finite()) return;
            const fs::path p = dir / ("samples_step_" + step_tag(step) + ".csv");
            write_batch_csv(p, ParticleBatch(samples, Role::model));
            grid_csvs.push_back(p);
        };
    }

    TrainResult result = train(cfg, sampler, std::move(model), observer);

    write_train_metrics_csv(dir / "train_metrics.csv", result.records);
    manifest.add_output(dir / "train_metrics.csv");

    // checkpoint: architecture descriptor + flat parameters
    {
        json ckpt;
        ckpt["arch"] = {{"noise_dim", result.model.noise_dim()},
                        {"out_dim", result.model.out_dim()},
                        {"hidden", result.model.hidden()},
                        {"blocks", result.model.n_blocks()},
                        {"activation", activation_str(result.model.activation())}};
        ckpt["params"] = result.model.params;
        write_text_file(dir / "checkpoint.json", ckpt.dump() + "\n");
        manifest.add_output(dir / "checkpoint.json");
    }

    // sample grids: data reference + generated samples, final model always,
    // intermediate checkpoints on the --plot-every cadence; every grid SVG
    // is rendered from its already-written CSV
    {
        const ParticleBatch data_ref = sampler(512, Rng(RngHandle{cfg.seed, 777}).substream(0).handle());
        write_batch_csv(dir / "data_ref.csv", data_ref);
        manifest.add_output(dir / "data_ref.csv");
        const Matrix samples = result.model.forward(plot_noise);
        if (samples.all_finite()) {
            write_batch_csv(dir / "samples_final.csv", ParticleBatch(samples, Role::model));
            grid_csvs.push_back(dir / "samples_final.csv");
        }
        for (const auto& csv : grid_csvs) {
            fs::path svg = csv;
            svg.replace_extension(".svg");
            write_svg_scatter(svg, "train: data vs generated (" + csv.stem().string() + ")",
                              scatter_series_from_csvs({{dir / "data_ref.csv", "#bbbbbb"},
                                                        {csv, "#d62728"}}));
            manifest.add_output(csv);
            manifest.add_output(svg);
        }
    }
    manifest.write();

    if (result.diverged) {
        std::cerr << "train diverged at step " << result.diverged_at_step << "\n";
        return kExitDivergence;
    }
    std::cout << "train finished: " << result.records.size() << " records, final holdout mmd2 "
              << format_double(result.records.back().mmd2_holdout) << "\n";
    return kExitOk;
}

// -------------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, uint64_t seed, const std::string& out_path) {
    std::set<std::string> selector;
    std::stringstream ss(suite);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) selector.insert(item);
    }
    const VerificationReport report = run_verification_suite(selector, seed);
    const json j = report.to_json();
    if (!out_path.empty()) write_text_file(out_path, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return report.all_passed ? kExitOk : kExitCheckFailure;
}

// --------------------------------------------------------------------- sweep

int cmd_sweep(int argc, char** argv, const std::vector<std::string>& drifts,
              const std::vector<double>& taus, const std::vector<std::string>& datasets,
              const std::vector<uint64_t>& seeds, int n, double eta, int steps, double noise,
              bool two_delta, double delta_d, double alpha, double beta,
              const std::string& out_dir) {
    Manifest manifest(argc, argv, out_dir);
    const fs::path dir = manifest.dir();
    manifest.set_config({{"command", "sweep"},
                         {"drifts", drifts},
                         {"taus", taus},
                         {"datasets", datasets},
                         {"seeds", seeds},
                         {"n", n},
                         {"eta", eta},
                         {"steps", steps},
                         {"noise", noise},
                         {"two_delta", two_delta},
                         {"delta_d", delta_d},
                         {"alpha", alpha},
                         {"beta", beta}});

    if (two_delta) {
        const auto rows = two_delta_experiment(delta_d, alpha, beta, taus);
        write_two_delta_csv(dir / "two_delta.csv", rows);
        manifest.add_output(dir / "two_delta.csv");
    }

    std::ostringstream csv;
    csv << "drift,tau,dataset,seed,final_mmd2,diverged\n";
    struct Cell {
        std::string drift, dataset;
        double tau, final_mmd2;
    };
    std::vector<Cell> cells;
    for (const auto& dataset : datasets) {
        DatasetSpec ds;
        ds.name = parse_dataset_name(dataset);
        ds.noise_scale = noise;
        for (const auto& drift_name : drifts) {
            for (double tau : taus) {
                for (uint64_t seed : seeds) {
                    DriftOptions dopt;
                    dopt.drift = drift_name;
                    dopt.tau = tau;
                    DriftConfig drift = dopt.resolve();
                    drift.sinkhorn.max_iters = 2000;

                    FlowConfig cfg;
                    cfg.drift = drift;
                    cfg.eta = eta;
                    cfg.n_steps = steps;
                    cfg.seed = seed;
                    TargetProvider target = [&](int step) {
                        return sample_dataset(
                            ds, n, derive_stream(RngHandle{seed, 200}, static_cast<uint64_t>(step + 1)));
                    };
                    const ParticleBatch init =
                        gaussian_init(n, dataset_dim(ds.name), 1.0, RngHandle{seed, 100});
                    // a failed cell is recorded, never fatal for the grid
                    double final_mmd2 = std::numeric_limits<double>::quiet_NaN();
                    bool diverged = true;
                    try {
                        const FlowResult res = run_flow(cfg, init, target);
                        diverged = res.diverged;
                        if (!diverged)
                            final_mmd2 = mmd2_median(res.final_particles, target(steps + 1));
                    } catch (const std::exception&) {
                        diverged = true;
                    }
                    csv << drift_name << "," << format_double(tau) << "," << dataset << "," << seed
                        << "," << format_double(final_mmd2) << "," << (diverged ? 1 : 0) << "\n";
                    if (!diverged) cells.push_back({drift_name, dataset, tau, final_mmd2});
                }
            }
        }
    }
    write_text_file(dir / "sweep.csv", csv.str());
    manifest.add_output(dir / "sweep.csv");

    // one summary line plot per dataset: mean final mmd2 (log10) vs log10 tau
    static const std::vector<std::string> palette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                  "#ff7f0e", "#8c564b", "#17becf"};
    for (const auto& dataset : datasets) {
        std::vector<SvgSeries> series;
        size_t color_idx = 0;
        for (const auto& drift_name : drifts) {
            SvgSeries s;
            s.color = palette[color_idx++ % palette.size()];
            s.label = drift_name;
            for (double tau : taus) {
                double sum = 0.0;
                int count = 0;
                for (const auto& c : cells)
                    if (c.drift == drift_name && c.dataset == dataset && c.tau == tau) {
                        sum += c.final_mmd2;
                        ++count;
                    }
                if (count > 0) s.points.emplace_back(std::log10(tau), std::log10(sum / count));
            }
            if (!s.points.empty()) series.push_back(std::move(s));
        }
        if (!series.empty()) {
            const fs::path p = dir / ("sweep_" + dataset + ".svg");
            write_svg_lines(p, "sweep " + dataset + ": log10 mmd2 vs log10 tau", series);
            manifest.add_output(p);
        }
    }
    manifest.write();
    std::cout << "sweep finished\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drift fields, particle flows and drifted-target training on 2D toys"};
    app.require_subcommand(1);
    // TOML config file with one flat section per subcommand; command-line
    // flags override file values.
    app.set_config("--config", "", "read options from a TOML config file");

    // flow
    auto* flow = app.add_subcommand("flow", "run an Euler particle flow");
    DriftOptions flow_drift;
    DatasetOptions flow_data;
    flow_drift.add_to(flow);
    flow_data.add_to(flow);
    int flow_n = 256, flow_n_target = 0, flow_steps = 500, flow_snap = 0;
    double flow_eta = 0.1, flow_init_scale = 1.0;
    uint64_t flow_seed = 0;
    bool flow_fixed_target = false;
    std::string flow_out;
    flow->add_option("--n", flow_n, "model particles")->check(CLI::PositiveNumber);
    flow->add_option("--n-target", flow_n_target, "target batch size (default: --n)");
    flow->add_option("--eta", flow_eta, "Euler step size")->check(CLI::PositiveNumber);
    flow->add_option("--steps", flow_steps, "number of Euler steps")->check(CLI::PositiveNumber);
    flow->add_option("--snapshot-every", flow_snap, "snapshot cadence (0: start/end only)")
        ->check(CLI::NonNegativeNumber);
    flow->add_option("--seed", flow_seed, "master seed");
    flow->add_option("--init-scale", flow_init_scale, "std of the Gaussian init cloud")
        ->check(CLI::PositiveNumber);
    flow->add_flag("--fixed-target", flow_fixed_target, "keep one target batch for all steps");
    flow->add_option("--out", flow_out, "output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train a drifted-target generator");
    DriftOptions train_drift;
    DatasetOptions train_data;
    train_drift.add_to(train_cmd);
    train_data.add_to(train_cmd);
    TrainConfig tc;
    int train_hidden = 128, train_blocks = 2, train_plot_every = 0;
    std::string train_activation = "tanh", train_out;
    train_cmd->add_option("--n-data", tc.n_data, "data batch size N+")->check(CLI::PositiveNumber);
    train_cmd->add_option("--n-model", tc.n_model, "model batch size N-")->check(CLI::PositiveNumber);
    train_cmd->add_option("--eta", tc.eta, "drift step folded into targets")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", tc.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--steps", tc.n_steps, "training steps")->check(CLI::PositiveNumber);
    train_cmd->add_option("--noise-dim", tc.noise_dim, "generator input dimension c")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", tc.seed, "master seed");
    train_cmd->add_option("--log-every", tc.log_every, "metrics cadence")->check(CLI::PositiveNumber);
    train_cmd->add_option("--holdout", tc.holdout_n, "held-out batch size for mmd2 logging")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--hidden", train_hidden, "residual block width")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--blocks", train_blocks, "number of residual blocks")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--activation", train_activation, "relu | tanh")
        ->check(CLI::IsMember({"relu", "tanh"}));
    train_cmd->add_option("--plot-every", train_plot_every, "sample grid cadence (0: final only)");
    train_cmd->add_option("--out", train_out, "output directory")->required();

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the verification suite");
    std::string verify_suite = "all", verify_out;
    uint64_t verify_seed = 12345;
    verify_cmd->add_option("--suite", verify_suite, "comma-separated check names or 'all'");
    verify_cmd->add_option("--seed", verify_seed, "master seed");
    verify_cmd->add_option("--out", verify_out, "also write the JSON report here");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "grid of flows and/or the two-delta table");
    std::vector<std::string> sweep_drifts{"kl", "mmd"};
    std::vector<double> sweep_taus{0.1, 0.5};
    std::vector<std::string> sweep_datasets{"moons"};
    std::vector<uint64_t> sweep_seeds{0};
    int sweep_n = 128, sweep_steps = 200;
    double sweep_eta = 0.1, sweep_noise = 0.05, sweep_delta_d = 1.0, sweep_alpha = 0.8,
           sweep_beta = 0.4;
    bool sweep_two_delta = false;
    std::string sweep_out;
    sweep_cmd->add_option("--drifts", sweep_drifts, "drift kinds");
    sweep_cmd->add_option("--taus", sweep_taus, "tau grid");
    sweep_cmd->add_option("--datasets", sweep_datasets, "datasets");
    sweep_cmd->add_option("--seeds", sweep_seeds, "seeds");
    sweep_cmd->add_option("--n", sweep_n, "particles per flow")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--eta", sweep_eta, "Euler step size")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--steps", sweep_steps, "steps per flow")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--noise", sweep_noise, "dataset noise scale");
    sweep_cmd->add_flag("--two-delta", sweep_two_delta, "also emit the two-delta drift table");
    sweep_cmd->add_option("--delta-d", sweep_delta_d, "two-delta: separation D");
    sweep_cmd->add_option("--alpha", sweep_alpha, "two-delta: data mass at -D");
    sweep_cmd->add_option("--beta", sweep_beta, "two-delta: model mass at -D");
    sweep_cmd->add_option("--out", sweep_out, "output directory")->required();

    // datasets
    auto* data_cmd = app.add_subcommand("datasets", "export dataset samples as CSV");
    DatasetOptions ds_opts;
    ds_opts.add_to(data_cmd);
    int ds_n = 1000;
    uint64_t ds_seed = 0;
    std::string ds_out;
    data_cmd->add_option("--n", ds_n, "number of samples")->check(CLI::PositiveNumber);
    data_cmd->add_option("--seed", ds_seed, "seed");
    data_cmd->add_option("--out", ds_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (flow->parsed())
            return cmd_flow(argc, argv, flow_drift, flow_data, flow_n, flow_n_target, flow_eta,
                            flow_steps, flow_snap, flow_seed, flow_init_scale, flow_fixed_target,
                            flow_out);
        if (train_cmd->parsed())
            return cmd_train(argc, argv, train_drift, train_data, tc, train_hidden, train_blocks,
                             train_activation, train_plot_every, train_out);
        if (verify_cmd->parsed()) return cmd_verify(verify_suite, verify_seed, verify_out);
        if (sweep_cmd->parsed())
            return cmd_sweep(argc, argv, sweep_drifts, sweep_taus, sweep_datasets, sweep_seeds,
                             sweep_n, sweep_eta, sweep_steps, sweep_noise, sweep_two_delta,
                             sweep_delta_d, sweep_alpha, sweep_beta, sweep_out);
        if (data_cmd->parsed()) {
            const ParticleBatch batch = sample_dataset(ds_opts.resolve(), ds_n, RngHandle{ds_seed, 0});
            write_batch_csv(ds_out, batch);
            std::cout << "wrote " << ds_out << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ArgumentError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    }
    return kExitConfig;
}
