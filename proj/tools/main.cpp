// Command-line front end: run experiments, compare algorithms over seed grids,
// and validate step-size conditions without running.
//
// Exit codes: 0 ok, 1 config/schema/IO error, 2 step-size validation failure,
// 3 probe failure, 4 divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "fedcanon/config.hpp"
#include "fedcanon/errors.hpp"
#include "fedcanon/harness.hpp"

namespace fs = std::filesystem;
using namespace fedcanon;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kValidationFailed = 2, kProbeFailed = 3, kDiverged = 4 };

int log_level() {
    const char* env = std::getenv("FEDCANON_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << msg << "\n";
}

Json load_config_json(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    for (const auto& kv : overrides) apply_override(j, kv);
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json summary_json(const Trajectory& traj, const std::vector<ProbeResult>& probes) {
    Json s;
    s["config"] = config_to_json(traj.cfg);
    Json consts;
    consts["L"] = traj.consts.L;
    consts["rho"] = traj.consts.rho;
    consts["delta"] = traj.consts.delta;
    if (traj.consts.Bh) consts["Bh"] = *traj.consts.Bh;
    if (traj.consts.mu) consts["mu"] = *traj.consts.mu;
    if (traj.consts.phistar) consts["phistar"] = *traj.consts.phistar;
    s["constants"] = consts;

    const auto& last = traj.records.back();
    Json fin;
    fin["rounds"] = traj.cfg.T;
    fin["phi"] = last.phi;
    fin["prox_grad_norm_sq"] = last.prox_grad_norm_sq;
    if (last.test_acc) fin["test_acc"] = *last.test_acc;
    fin["epsilon_t"] = last.epsilon;
    fin["prox_cum"] = last.prox_cum;
    fin["floats_cum"] = last.floats_cum;
    s["final"] = fin;

    Json acc;
    acc["prox_per_round"] =
        expected_prox_per_round(traj.cfg.algorithm, traj.cfg.partition.n_clients, traj.cfg.K);
    acc["floats_per_client_per_round"] = expected_floats_per_client(
        traj.cfg.algorithm, traj.iterates.empty() ? 0 : static_cast<int>(traj.iterates[0].size()));
    s["accounting"] = acc;

    Json pj = Json::array();
    for (const auto& p : probes) {
        Json one;
        one["name"] = p.name;
        one["pass"] = p.pass;
        one["detail"] = p.detail;
        pj.push_back(one);
    }
    s["probes"] = pj;
    s["shard_hash"] = hex64(traj.shard_hash);
    return s;
}

int do_run(const std::string& config_path, const std::string& out_dir,
           const std::vector<std::string>& overrides) {
    const auto cfg = config_from_json(load_config_json(config_path, overrides));
    fs::create_directories(out_dir);

    const auto traj = run_experiment(cfg);
    const auto probes = run_probes(traj);

    write_text(fs::path(out_dir) / "metrics.csv", trajectory_csv(traj));
    write_text(fs::path(out_dir) / "summary.json", summary_json(traj, probes).dump(2) + "\n");
    log_info("run: " + std::to_string(cfg.T) + " rounds in " +
             format_double(traj.total_wall_ms) + " ms, outputs in " + out_dir);

    bool probe_failed = false;
    for (const auto& p : probes) {
        log_info("probe " + p.name + ": " + (p.pass ? "PASS" : "FAIL") + " (" + p.detail + ")");
        probe_failed = probe_failed || !p.pass;
    }
    return probe_failed ? kProbeFailed : kOk;
}

int do_compare(const std::string& config_path, const std::string& out_dir,
               const std::vector<std::string>& algorithms, const std::vector<std::string>& seeds,
               const std::vector<std::string>& overrides) {
    if (algorithms.empty()) throw ConfigError("compare needs --algorithms");
    if (seeds.empty()) throw ConfigError("compare needs --seeds");
    fs::create_directories(out_dir);

    Json cells = Json::array();
    bool probe_failed = false;
    // Cells sharing a seed must see identical shards; the hash in the summary
    // lets callers verify that.
    std::map<std::string, std::string> seed_hash;
    for (const auto& seed : seeds) {
        for (const auto& alg : algorithms) {
            Json j = load_config_json(config_path, overrides);
            apply_override(j, "algorithm=" + alg);
            apply_override(j, "seed=" + seed);
            const auto cfg = config_from_json(j);
            const auto traj = run_experiment(cfg);
            const auto probes = run_probes(traj);
            for (const auto& p : probes) probe_failed = probe_failed || !p.pass;

            const std::string name = alg + "_s" + seed;
            write_text(fs::path(out_dir) / (name + ".csv"), trajectory_csv(traj));

            const auto& last = traj.records.back();
            Json cell;
            cell["algorithm"] = alg;
            cell["seed"] = std::stoull(seed);
            cell["phi"] = last.phi;
            cell["prox_grad_norm_sq"] = last.prox_grad_norm_sq;
            if (last.test_acc) cell["test_acc"] = *last.test_acc;
            cell["prox_cum"] = last.prox_cum;
            cell["floats_cum"] = last.floats_cum;
            cell["prox_per_round"] =
                expected_prox_per_round(cfg.algorithm, cfg.partition.n_clients, cfg.K);
            cell["floats_per_client_per_round"] = expected_floats_per_client(
                cfg.algorithm, static_cast<int>(traj.iterates[0].size()));
            cell["shard_hash"] = hex64(traj.shard_hash);
            cell["csv"] = name + ".csv";
            cells.push_back(cell);

            auto [it, fresh] = seed_hash.emplace(seed, hex64(traj.shard_hash));
            if (!fresh && it->second != hex64(traj.shard_hash))
                throw ConsistencyError("shard hash differs across algorithms for seed " + seed);
            log_info("cell " + name + ": phi=" + format_double(last.phi));
        }
    }
    Json summary;
    summary["cells"] = cells;
    write_text(fs::path(out_dir) / "compare_summary.json", summary.dump(2) + "\n");
    return probe_failed ? kProbeFailed : kOk;
}

int do_validate(const std::string& config_path, const std::vector<std::string>& overrides) {
    const auto cfg = config_from_json(load_config_json(config_path, overrides));

    // Constants come from the problem the config describes; no rounds run.
    const auto consts = resolve_constants(cfg);
    const auto rep =
        validate_stepsizes(cfg.alpha, cfg.beta, cfg.K, consts.L, consts.rho, consts.mu);
    std::printf("L=%s rho=%s delta=%s\n", format_double(consts.L).c_str(),
                format_double(consts.rho).c_str(), format_double(rep.delta).c_str());
    bool all = true;
    for (const auto& c : rep.checks) {
        std::printf("%-18s %-60s lhs=%-22s rhs=%-22s %s\n", c.name.c_str(), c.expr.c_str(),
                    format_double(c.lhs).c_str(), format_double(c.rhs).c_str(),
                    c.pass ? "PASS" : "FAIL");
        all = all && c.pass;
    }
    return all ? kOk : kValidationFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Composite federated optimization simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::vector<std::string> overrides, algorithms, seeds;

    auto* run = app.add_subcommand("run", "Run one experiment and write CSV + JSON summary");
    run->add_option("--config", config_path, "Config JSON path")->required();
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--override", overrides, "key.path=value overrides");

    auto* cmp = app.add_subcommand("compare", "Run an algorithm x seed grid on a shared problem");
    cmp->add_option("--config", config_path, "Config JSON path")->required();
    cmp->add_option("--out", out_dir, "Output directory");
    cmp->add_option("--algorithms", algorithms, "Algorithms to compare")
        ->delimiter(',')
        ->required();
    cmp->add_option("--seeds", seeds, "Seeds, one run per (algorithm, seed)")
        ->delimiter(',')
        ->required();
    cmp->add_option("--override", overrides, "key.path=value overrides");

    auto* val = app.add_subcommand("validate", "Print the step-size report without running");
    val->add_option("--config", config_path, "Config JSON path")->required();
    val->add_option("--override", overrides, "key.path=value overrides");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return do_run(config_path, out_dir, overrides);
        if (cmp->parsed()) return do_compare(config_path, out_dir, algorithms, seeds, overrides);
        if (val->parsed()) return do_validate(config_path, overrides);
    } catch (const DivergedError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return kDiverged;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kOk;
}
