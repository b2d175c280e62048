#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// End-to-end checks of the command-line driver. The binary path arrives via
// the DRIFTFLOW_CLI environment variable (set by ctest).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("DRIFTFLOW_CLI");
    REQUIRE_MESSAGE(p != nullptr, "DRIFTFLOW_CLI must point at the built binary");
    return p;
}

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "driftflow_cli_test_out.txt";
    const std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::string output((std::istreambuf_iterator<char>(in)), {});
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, output};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

int count_lines(const std::string& s) {
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "driftflow_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("flow run produces the documented artifacts") {
    const fs::path out = fresh_dir("flow_a");
    const std::string cmd = "flow --drift mmd --dataset moons --n 64 --tau 0.2 --eta 0.1 "
                            "--steps 50 --seed 7 --out " + out.string();
    const RunResult res = run_cli(cmd);
    CHECK(res.exit_code == 0);

    const std::string metrics = slurp(out / "metrics.csv");
    CHECK(count_lines(metrics) == 52);  // header + steps 0..50
    CHECK(metrics.rfind("step,energy_mmd2,mean_drift_norm,max_drift_norm,diverged\n", 0) == 0);
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "particles.svg"));

    // manifest lists only files that exist, and is valid JSON
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    for (const auto& o : manifest["outputs"])
        CHECK(fs::exists(out / o["path"].get<std::string>()));

    // byte-identical reproduction
    const fs::path out2 = fresh_dir("flow_b");
    const std::string cmd2 = "flow --drift mmd --dataset moons --n 64 --tau 0.2 --eta 0.1 "
                             "--steps 50 --seed 7 --out " + out2.string();
    REQUIRE(run_cli(cmd2).exit_code == 0);
    CHECK(slurp(out / "metrics.csv") == slurp(out2 / "metrics.csv"));
    CHECK(slurp(out / "target.csv") == slurp(out2 / "target.csv"));
}

TEST_CASE("unknown drift kind is a usage error listing the seven kinds") {
    const fs::path out = fresh_dir("flow_bogus");
    const RunResult res = run_cli("flow --drift bogus --dataset moons --steps 5 --out " + out.string());
    CHECK(res.exit_code == 2);
    for (const char* kind : {"kl", "smoothed_kl", "sinkhorn_exact", "sinkhorn_proxy",
                             "sinkhorn_proxy_da2", "mmd", "sw"})
        CHECK(res.output.find(kind) != std::string::npos);
}

TEST_CASE("train rejects a non-positive step size at parse time") {
    const fs::path out = fresh_dir("train_eta0");
    const RunResult res =
        run_cli("train --drift mmd --dataset moons --eta 0 --steps 10 --out " + out.string());
    CHECK(res.exit_code == 2);
}

TEST_CASE("short training run writes checkpoint and metrics") {
    const fs::path out = fresh_dir("train_a");
    const RunResult res = run_cli(
        "train --drift sinkhorn-proxy --variant ours --dataset circles --steps 60 --seed 1 "
        "--n-data 32 --n-model 32 --hidden 16 --blocks 1 --log-every 20 --holdout 64 --out " +
        out.string());
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(out / "checkpoint.json"));
    CHECK(fs::exists(out / "train_metrics.csv"));
    CHECK(fs::exists(out / "manifest.json"));
    const auto ckpt = nlohmann::json::parse(slurp(out / "checkpoint.json"));
    CHECK(ckpt.contains("arch"));
    CHECK(ckpt["arch"]["hidden"] == 16);
    CHECK(ckpt["params"].is_array());

    const std::string metrics = slurp(out / "train_metrics.csv");
    CHECK(metrics.rfind("step,loss,mmd2_holdout\n", 0) == 0);
    CHECK(count_lines(metrics) == 1 + 1 + 3);  // header + step 0 + logs at 20/40/60
}

TEST_CASE("training reruns reproduce metric bytes") {
    const fs::path a = fresh_dir("train_rep_a"), b = fresh_dir("train_rep_b");
    const std::string base =
        "train --drift mmd --dataset moons --steps 40 --seed 5 --n-data 24 --n-model 24 "
        "--hidden 8 --blocks 1 --log-every 10 --holdout 48 --out ";
    REQUIRE(run_cli(base + a.string()).exit_code == 0);
    REQUIRE(run_cli(base + b.string()).exit_code == 0);
    CHECK(slurp(a / "train_metrics.csv") == slurp(b / "train_metrics.csv"));
    CHECK(slurp(a / "checkpoint.json") == slurp(b / "checkpoint.json"));
}

TEST_CASE("extreme bandwidth stress run never crashes") {
    const fs::path out = fresh_dir("train_stress");
    const RunResult res = run_cli(
        "train --drift kl --tau 1e-9 --dataset moons --steps 30 --seed 2 --n-data 16 "
        "--n-model 16 --hidden 8 --blocks 1 --out " + out.string());
    CHECK((res.exit_code == 0 || res.exit_code == 3));
}

TEST_CASE("verify subcommand exit codes") {
    CHECK(run_cli("verify --suite curl_toy").exit_code == 0);
    const RunResult all = run_cli("verify --suite all");
    CHECK(all.exit_code == 0);
    const auto report = nlohmann::json::parse(all.output);
    CHECK(report["all_passed"].get<bool>());
    CHECK(run_cli("verify --suite nosuch").exit_code == 2);
}

TEST_CASE("sweep grid cardinality and reproducibility") {
    const fs::path out = fresh_dir("sweep_a");
    const std::string cmd =
        "sweep --drifts kl mmd --taus 0.1 0.3 1.0 --datasets moons --seeds 1 2 --n 48 "
        "--steps 40 --two-delta --out " + out.string();
    REQUIRE(run_cli(cmd).exit_code == 0);
    const std::string sweep = slurp(out / "sweep.csv");
    CHECK(count_lines(sweep) == 1 + 2 * 3 * 1 * 2);
    CHECK(sweep.rfind("drift,tau,dataset,seed,final_mmd2,diverged\n", 0) == 0);
    CHECK(fs::exists(out / "two_delta.csv"));
    CHECK(fs::exists(out / "sweep_moons.svg"));

    const fs::path out2 = fresh_dir("sweep_b");
    const std::string cmd2 =
        "sweep --drifts kl mmd --taus 0.1 0.3 1.0 --datasets moons --seeds 1 2 --n 48 "
        "--steps 40 --two-delta --out " + out2.string();
    REQUIRE(run_cli(cmd2).exit_code == 0);
    CHECK(slurp(out / "sweep.csv") == slurp(out2 / "sweep.csv"));
    CHECK(slurp(out / "two_delta.csv") == slurp(out2 / "two_delta.csv"));
}

TEST_CASE("datasets export writes a csv with the standard header") {
    const fs::path out = fresh_dir("datasets");
    const fs::path csv = out / "moons.csv";
    REQUIRE(run_cli("datasets --dataset moons --n 100 --seed 3 --out " + csv.string()).exit_code == 0);
    const std::string text = slurp(csv);
    CHECK(text.rfind("x0,x1\n", 0) == 0);
    CHECK(count_lines(text) == 101);
}

TEST_CASE("config file values are honored and overridden by flags") {
    const fs::path out = fresh_dir("config_file");
    const fs::path cfg = out / "run.toml";
    {
        std::ofstream f(cfg);
        f << "[flow]\n"
          << "drift = \"sw\"\n"
          << "n = 24\n"
          << "steps = 15\n"
          << "seed = 21\n"
          << "dataset = \"circles\"\n"
          << "out = \"" << (out / "from_file").string() << "\"\n";
    }
    REQUIRE(run_cli("--config " + cfg.string() + " flow").exit_code == 0);
    const auto manifest = nlohmann::json::parse(slurp(out / "from_file" / "manifest.json"));
    CHECK(manifest["config"]["steps"] == 15);
    CHECK(manifest["config"]["drift"]["drift"] == "sw");

    // a command-line flag overrides the file value
    REQUIRE(run_cli("--config " + cfg.string() + " flow --steps 7 --out " +
                    (out / "override").string())
                .exit_code == 0);
    const auto manifest2 = nlohmann::json::parse(slurp(out / "override" / "manifest.json"));
    CHECK(manifest2["config"]["steps"] == 7);
}

TEST_CASE("flow accepts a re-imported csv as target") {
    const fs::path out = fresh_dir("flow_csv");
    const fs::path csv = out / "target.csv";
    REQUIRE(run_cli("datasets --dataset circles --n 64 --seed 9 --out " + csv.string()).exit_code == 0);
    const RunResult res = run_cli("flow --drift sw --data-csv " + csv.string() +
                                  " --n 32 --steps 20 --seed 4 --out " + (out / "run").string());
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(out / "run" / "metrics.csv"));
}
