#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedcanon/fedalgos.hpp"
#include "fedcanon/problems.hpp"

namespace fedcanon {

struct ProblemConfig {
    enum class Type { Quadratic, Blobs, Libsvm };
    Type type = Type::Quadratic;

    // quadratic; explicit per-client curvature/theta lists override the
    // random generator when present
    int d = 10;
    double condition_number = 10.0;
    double curvature_spread = 0.5;
    double theta_scale = 1.0;
    std::vector<Vec> curvature;
    std::vector<Vec> theta;

    // blobs
    BlobsSpec blobs;

    // libsvm
    std::string train_path;
    std::string test_path;
    std::optional<int> dim_override;

    // dataset model (blobs / libsvm)
    ModelKind model = ModelKind::Logistic;
    std::vector<int> hidden;
};

// Probe names accepted in config: descent (per-round descent inequality),
// sublinear (averaged proximal-gradient bound), linear_rate (PL contraction),
// accounting (cost-table exactness).
struct ExperimentConfig {
    std::uint64_t seed = 0;
    Algorithm algorithm = Algorithm::FedCanon;
    double alpha = 0.1;
    double beta = 0.01;
    int K = 1;
    int T = 10;
    int B = 1;
    double p = 0.5;  // scaffnew communication probability
    GradMode grad_mode = GradMode::Exact;
    ProblemConfig problem;
    PartitionSpec partition;
    Regularizer reg;
    std::set<std::string> probes;
    Vec z0;              // explicit initial point; empty = fill
    double z0_fill = 0.0;
    int threads = 1;     // 0 = hardware concurrency
    bool record_wall_ms = false;

    void validate() const;  // throws ConfigError on schema violations
};

struct RoundRecord {
    int t = 0;
    double phi = 0.0;
    double prox_grad_norm_sq = 0.0;     // ||G^alpha(z^t)||^2 with the exact full gradient
    std::optional<double> test_acc;
    double epsilon = 0.0;               // gradient-tracking error term E^t (E^0 uses v^{-1}=0)
    std::int64_t prox_cum = 0;
    std::int64_t floats_cum = 0;        // per-client floats, cost-table units
    double wall_ms = 0.0;
};

// Internals of the transition z^t -> z^{t+1}, recorded for the probes.
struct StepStats {
    double gbar_norm_sq = 0.0;   // ||G^alpha(z^t, delta_bar^{t+1})||^2
    double gradf_norm_sq = 0.0;  // ||grad f(z^t)||^2
    std::int64_t prox_evals = 0;
    std::int64_t floats_per_client = 0;
    bool communicated = true;
};

struct Constants {
    double L = 0.0;
    double rho = 0.0;
    double delta = 1.0;  // 1/(1 - alpha*rho)^2
    std::optional<double> Bh;
    std::optional<double> mu;
    std::optional<double> fstar_smooth;
    std::optional<double> phistar;
};

struct Trajectory {
    ExperimentConfig cfg;
    Constants consts;
    std::vector<RoundRecord> records;  // T+1 rows, round 0 included
    std::vector<StepStats> steps;      // T transitions
    std::vector<Vec> iterates;         // z^0 .. z^T
    std::uint64_t shard_hash = 0;
    double total_wall_ms = 0.0;
};

Trajectory run_experiment(const ExperimentConfig& cfg);

// Builds the problem the config describes and resolves its constants without
// executing any round (phistar is left unset).
Constants resolve_constants(const ExperimentConfig& cfg);

// E^t of the tracking term: mean over clients of
// || grad f_i(z) - v_i - grad f(z) + v_bar ||^2 with the recorded averages v.
double epsilon_term(const std::vector<Vec>& client_grads, const Vec& grad_f,
                    const std::vector<Vec>& v_prev);

struct StepSizeCheck {
    std::string name;
    std::string expr;  // the inequality, printable
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

struct StepSizeReport {
    double delta = 1.0;
    std::vector<StepSizeCheck> checks;
    bool all_pass = true;
};

// Numerical evaluation of the analysis' step-size prerequisites; report-only.
StepSizeReport validate_stepsizes(double alpha, double beta, int K, double L, double rho,
                                  std::optional<double> mu = std::nullopt);

struct ProbeResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

ProbeResult descent_probe(const Trajectory& traj);
ProbeResult sublinear_check(const Trajectory& traj);
ProbeResult linear_rate_check(const Trajectory& traj);
ProbeResult accounting_check(const Trajectory& traj);

// Runs every probe enabled in the trajectory's config.
std::vector<ProbeResult> run_probes(const Trajectory& traj);

// CSV with header round,phi,prox_grad_norm_sq,test_acc,epsilon_t,prox_cum,
// floats_cum,wall_ms; byte-deterministic for a fixed trajectory.
std::string trajectory_csv(const Trajectory& traj);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace fedcanon
