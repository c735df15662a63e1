#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include "fedcanon/problems.hpp"
#include "fedcanon/regularizers.hpp"
#include "fedcanon/rng.hpp"
#include "fedcanon/vec.hpp"

namespace fedcanon {

enum class Algorithm { FedCanon, FedCanon2, FedPgd, FedAvg, Scaffold, Scaffnew, Pgd };
enum class GradMode { Exact, Minibatch };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

// Global model plus the server step size.
struct ServerState {
    Vec z;
    int round = 0;
};

// Per-client persistent state. c is the drift-correction control variable
// (sums to zero across clients); v records the average stochastic gradient of
// the last completed round (zero before the first round).
struct ClientState {
    int id = 0;
    Vec c;
    Vec v;
    Rng rng;

    ClientState(int id_, int dim, std::uint64_t seed)
        : id(id_), c(dim, 0.0), v(dim, 0.0), rng(seed) {}
};

// Server-free variant: every client keeps its own copy of the round-start
// model and applies the prox step locally on identical inputs.
struct Canon2Client {
    int id = 0;
    Vec x0;
    Vec c;
    Vec v;
    Rng rng;

    Canon2Client(int id_, Vec x0_, std::uint64_t seed)
        : id(id_), x0(std::move(x0_)), c(x0.size(), 0.0), v(x0.size(), 0.0), rng(seed) {}
};

struct ScaffoldServer {
    Vec z;
    Vec e;  // server control variable, equals the client mean every round
    int round = 0;
};

struct ScaffoldClient {
    int id = 0;
    Vec e;
    Vec v;
    Rng rng;

    ScaffoldClient(int id_, int dim, std::uint64_t seed)
        : id(id_), e(dim, 0.0), v(dim, 0.0), rng(seed) {}
};

struct ScaffnewClient {
    int id = 0;
    Vec x;
    Vec e;
    Vec v;
    Rng rng;

    ScaffnewClient(int id_, Vec x0, std::uint64_t seed)
        : id(id_), x(std::move(x0)), e(x.size(), 0.0), v(x.size(), 0.0), rng(seed) {}
};

// Per-round outputs shared by all algorithms. delta_bar is the aggregated
// uplink mean; deltas holds the per-client uplinks (normalized for the
// control-variate algorithms, raw model differences elsewhere); gbar_norm_sq
// is ||z - z'||^2 / alpha^2 for prox-based global updates (NaN otherwise).
// Counters hold what the round actually performed.
struct RoundInfo {
    Vec delta_bar;
    std::vector<Vec> deltas;
    double gbar_norm_sq = std::numeric_limits<double>::quiet_NaN();
    std::int64_t prox_evals = 0;
    std::int64_t floats_per_client = 0;
    bool communicated = true;  // scaffnew steps may skip communication
};

// Runs fn(0..n-1); client slots are independent so any schedule yields
// bitwise-identical state. Aggregations afterwards run in ascending id order.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

RoundInfo fedcanon_round(const FedProblem& p, const Regularizer& reg, double alpha, double beta,
                         int K, int B, GradMode mode, ServerState& server,
                         std::vector<ClientState>& clients, int threads = 1);

RoundInfo fedcanon2_round(const FedProblem& p, const Regularizer& reg, double alpha, double beta,
                          int K, int B, GradMode mode, std::vector<Canon2Client>& clients,
                          int threads = 1);

RoundInfo fedpgd_round(const FedProblem& p, const Regularizer& reg, double alpha, double beta,
                       int K, int B, GradMode mode, ServerState& server,
                       std::vector<ClientState>& clients, int threads = 1);

RoundInfo fedavg_round(const FedProblem& p, double beta, int K, int B, GradMode mode,
                       ServerState& server, std::vector<ClientState>& clients, int threads = 1);

// Full participation, control-variate Option II.
RoundInfo scaffold_round(const FedProblem& p, double alpha_s, double beta, int K, int B,
                         GradMode mode, ScaffoldServer& server,
                         std::vector<ScaffoldClient>& clients, int threads = 1);

// One step: a local gradient update per client, then with probability p a
// shared average-and-sync (the coin is common to all clients). Smooth
// objectives only.
RoundInfo scaffnew_step(const FedProblem& p, double beta, double prob, int B, GradMode mode,
                        Rng& coin, std::vector<ScaffnewClient>& clients, int threads = 1);

// Centralized proximal gradient reference: z <- prox_{alpha h}(z - alpha grad_f(z)).
// Returns all iterates including z0.
std::vector<Vec> pgd_reference(const Vec& z0, double alpha, int T,
                               const std::function<Vec(const Vec&)>& grad_f,
                               const Regularizer& reg);

// ||(z - prox_{alpha h}(z - alpha g)) / alpha||^2 with g = grad f(z); vanishes
// exactly at stationary points of f + h.
double prox_gradient_norm_sq(std::span<const double> z, double alpha, std::span<const double> grad,
                             const Regularizer& reg);

// Cost-table constants: proximal evaluations per round and floats exchanged
// per client per round for dimension d.
std::int64_t expected_prox_per_round(Algorithm a, int n_clients, int K);
std::int64_t expected_floats_per_client(Algorithm a, int d);

}  // namespace fedcanon
