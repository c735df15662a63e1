#include "fedcanon/fedalgos.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "fedcanon/errors.hpp"

namespace fedcanon {

namespace {

Vec draw_grad(const FedProblem& p, int client, const Vec& x, int B, GradMode mode, Rng& rng) {
    Vec g(x.size());
    if (mode == GradMode::Exact)
        p.client_grad(client, x, g);
    else
        p.client_stoch_grad(client, x, B, rng, g);
    return g;
}

void check_finite(const Vec& v, const char* what, int round) {
    if (!all_finite(v)) throw DivergedError(std::string("non-finite ") + what, round);
}

// Control variables must stay on the zero-sum manifold. The guard is scaled
// by the control magnitude so a diverging run is reported as divergence, not
// as drift; the absolute 1e-9*sqrt(d) contract is asserted by the test suites
// on well-posed runs.
void check_conservation(const std::vector<Vec>& cs, int round) {
    if (cs.empty()) return;
    const std::size_t d = cs[0].size();
    Vec sum(d, 0.0);
    double scale = 1.0;
    for (const auto& c : cs) {
        axpy(1.0, c, sum);
        scale = std::max(scale, norm(c));
    }
    const double tol = 1e-9 * std::sqrt(static_cast<double>(d)) * scale;
    if (norm(sum) > tol) {
        std::string msg = "control variables drifted off the zero-sum manifold";
        if (round >= 0) msg += " at round " + std::to_string(round);
        throw ConsistencyError(msg);
    }
}

}  // namespace

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::FedCanon: return "fedcanon";
        case Algorithm::FedCanon2: return "fedcanon2";
        case Algorithm::FedPgd: return "fedpgd";
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::Scaffold: return "scaffold";
        case Algorithm::Scaffnew: return "scaffnew";
        case Algorithm::Pgd: return "pgd";
    }
    return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "fedcanon") return Algorithm::FedCanon;
    if (s == "fedcanon2") return Algorithm::FedCanon2;
    if (s == "fedpgd") return Algorithm::FedPgd;
    if (s == "fedavg") return Algorithm::FedAvg;
    if (s == "scaffold") return Algorithm::Scaffold;
    if (s == "scaffnew") return Algorithm::Scaffnew;
    if (s == "pgd") return Algorithm::Pgd;
    throw ConfigError("unknown algorithm '" + s + "'");
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mtx;
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            int i;
            while ((i = next.fetch_add(1)) < n) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mtx);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

RoundInfo fedcanon_round(const FedProblem& p, const Regularizer& reg, double alpha, double beta,
                         int K, int B, GradMode mode, ServerState& server,
                         std::vector<ClientState>& clients, int threads) {
    const int n = static_cast<int>(clients.size());
    const int d = p.dim();
    reg.require_prox_step(alpha);

    std::vector<Vec> deltas(n);
    parallel_for(n, threads, [&](int i) {
        auto& cl = clients[i];
        Vec xhat = server.z;
        std::fill(cl.v.begin(), cl.v.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const Vec g = draw_grad(p, cl.id, xhat, B, mode, cl.rng);
            axpy(1.0, g, cl.v);
            for (int j = 0; j < d; ++j) xhat[j] -= beta * (g[j] + cl.c[j]);
        }
        scale(cl.v, 1.0 / K);
        deltas[i] = sub(server.z, xhat);
        scale(deltas[i], 1.0 / (beta * K));
    });

    RoundInfo info;
    info.delta_bar.assign(d, 0.0);
    for (const auto& dl : deltas) axpy(1.0, dl, info.delta_bar);
    scale(info.delta_bar, 1.0 / n);
    info.deltas = deltas;

    Vec y = server.z;
    axpy(-alpha, info.delta_bar, y);
    const Vec znext = reg.prox(alpha, y);
    info.prox_evals = 1;
    info.gbar_norm_sq = dist_sq(server.z, znext) / (alpha * alpha);
    info.floats_per_client = 3 * static_cast<std::int64_t>(d);  // uplink delta, downlink (mean, model)

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) clients[i].c[j] += info.delta_bar[j] - deltas[i][j];

    check_finite(znext, "global model", server.round);
    for (const auto& cl : clients) check_finite(cl.c, "control variable", server.round);
    {
        std::vector<Vec> cs;
        cs.reserve(n);
        for (const auto& cl : clients) cs.push_back(cl.c);
        check_conservation(cs, server.round);
    }

    server.z = znext;
    ++server.round;
    return info;
}

RoundInfo fedcanon2_round(const FedProblem& p, const Regularizer& reg, double alpha, double beta,
                          int K, int B, GradMode mode, std::vector<Canon2Client>& clients,
                          int threads) {
    const int n = static_cast<int>(clients.size());
    const int d = p.dim();
    reg.require_prox_step(alpha);

    const double tol = 1e-9 * std::sqrt(static_cast<double>(d));
    for (const auto& cl : clients)
        if (max_abs_diff(cl.x0, clients[0].x0) > tol)
            throw ConsistencyError("client model copies diverged before the round");

    std::vector<Vec> deltas(n);
    parallel_for(n, threads, [&](int i) {
        auto& cl = clients[i];
        Vec xhat = cl.x0;
        std::fill(cl.v.begin(), cl.v.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const Vec g = draw_grad(p, cl.id, xhat, B, mode, cl.rng);
            axpy(1.0, g, cl.v);
            for (int j = 0; j < d; ++j) xhat[j] -= beta * (g[j] + cl.c[j]);
        }
        scale(cl.v, 1.0 / K);
        deltas[i] = sub(cl.x0, xhat);
        scale(deltas[i], 1.0 / (beta * K));
    });

    RoundInfo info;
    info.delta_bar.assign(d, 0.0);
    for (const auto& dl : deltas) axpy(1.0, dl, info.delta_bar);
    scale(info.delta_bar, 1.0 / n);
    info.deltas = deltas;

    const Vec before = clients[0].x0;
    std::atomic<std::int64_t> prox_count{0};
    parallel_for(n, threads, [&](int i) {
        auto& cl = clients[i];
        Vec y = cl.x0;
        axpy(-alpha, info.delta_bar, y);
        reg.prox(alpha, y, cl.x0);
        prox_count.fetch_add(1);
    });
    info.prox_evals = prox_count.load();
    info.gbar_norm_sq = dist_sq(before, clients[0].x0) / (alpha * alpha);
    info.floats_per_client = 2 * static_cast<std::int64_t>(d);  // uplink delta, downlink mean

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) clients[i].c[j] += info.delta_bar[j] - deltas[i][j];

    for (const auto& cl : clients) {
        check_finite(cl.x0, "client model", -1);
        check_finite(cl.c, "control variable", -1);
    }
    {
        std::vector<Vec> cs;
        cs.reserve(n);
        for (const auto& cl : clients) cs.push_back(cl.c);
        check_conservation(cs, -1);
    }
    return info;
}

RoundInfo fedpgd_round(const FedProblem& p, const Regularizer& reg, double alpha, double beta,
                       int K, int B, GradMode mode, ServerState& server,
                       std::vector<ClientState>& clients, int threads) {
    const int n = static_cast<int>(clients.size());
    const int d = p.dim();
    reg.require_prox_step(alpha);
    reg.require_prox_step(beta);  // local prox steps need beta * rho < 1 too

    std::vector<Vec> deltas(n);
    std::vector<std::int64_t> prox_counts(n, 0);
    parallel_for(n, threads, [&](int i) {
        auto& cl = clients[i];
        Vec xhat = server.z;
        Vec y(d);
        std::fill(cl.v.begin(), cl.v.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const Vec g = draw_grad(p, cl.id, xhat, B, mode, cl.rng);
            axpy(1.0, g, cl.v);
            for (int j = 0; j < d; ++j) y[j] = xhat[j] - beta * g[j];
            reg.prox(beta, y, xhat);
            ++prox_counts[i];
        }
        scale(cl.v, 1.0 / K);
        deltas[i] = sub(server.z, xhat);  // unnormalized model difference
    });

    RoundInfo info;
    info.delta_bar.assign(d, 0.0);
    for (const auto& dl : deltas) axpy(1.0, dl, info.delta_bar);
    scale(info.delta_bar, 1.0 / n);
    info.deltas = deltas;

    Vec y = server.z;
    axpy(-alpha, info.delta_bar, y);
    const Vec znext = reg.prox(alpha, y);
    info.prox_evals = 1;
    for (auto c : prox_counts) info.prox_evals += c;
    info.gbar_norm_sq = dist_sq(server.z, znext) / (alpha * alpha);
    info.floats_per_client = 2 * static_cast<std::int64_t>(d);  // uplink delta, downlink model

    check_finite(znext, "global model", server.round);
    server.z = znext;
    ++server.round;
    return info;
}

RoundInfo fedavg_round(const FedProblem& p, double beta, int K, int B, GradMode mode,
                       ServerState& server, std::vector<ClientState>& clients, int threads) {
    const int n = static_cast<int>(clients.size());
    const int d = p.dim();

    std::vector<Vec> locals(n);
    parallel_for(n, threads, [&](int i) {
        auto& cl = clients[i];
        Vec xhat = server.z;
        std::fill(cl.v.begin(), cl.v.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const Vec g = draw_grad(p, cl.id, xhat, B, mode, cl.rng);
            axpy(1.0, g, cl.v);
            axpy(-beta, g, xhat);
        }
        scale(cl.v, 1.0 / K);
        locals[i] = std::move(xhat);
    });

    Vec znext(d, 0.0);
    for (const auto& x : locals) axpy(1.0, x, znext);
    scale(znext, 1.0 / n);

    RoundInfo info;
    info.delta_bar = sub(server.z, znext);
    scale(info.delta_bar, 1.0 / (beta * K));
    info.prox_evals = 0;
    info.floats_per_client = 2 * static_cast<std::int64_t>(d);  // model up, model down

    check_finite(znext, "global model", server.round);
    server.z = znext;
    ++server.round;
    return info;
}

RoundInfo scaffold_round(const FedProblem& p, double alpha_s, double beta, int K, int B,
                         GradMode mode, ScaffoldServer& server,
                         std::vector<ScaffoldClient>& clients, int threads) {
    const int n = static_cast<int>(clients.size());
    const int d = p.dim();

    std::vector<Vec> deltas(n), delta_e(n);
    parallel_for(n, threads, [&](int i) {
        auto& cl = clients[i];
        Vec corr = sub(server.e, cl.e);
        Vec xhat = server.z;
        std::fill(cl.v.begin(), cl.v.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const Vec g = draw_grad(p, cl.id, xhat, B, mode, cl.rng);
            axpy(1.0, g, cl.v);
            for (int j = 0; j < d; ++j) xhat[j] -= beta * (g[j] + corr[j]);
        }
        scale(cl.v, 1.0 / K);
        deltas[i] = sub(server.z, xhat);  // unnormalized
        delta_e[i].resize(d);
        for (int j = 0; j < d; ++j) delta_e[i][j] = deltas[i][j] / (beta * K) - server.e[j];
    });

    Vec znext = server.z;
    for (const auto& dl : deltas) axpy(-alpha_s / n, dl, znext);

    Vec mean_de(d, 0.0);
    for (const auto& de : delta_e) axpy(1.0, de, mean_de);
    scale(mean_de, 1.0 / n);

    for (int i = 0; i < n; ++i) axpy(1.0, delta_e[i], clients[i].e);
    axpy(1.0, mean_de, server.e);

    RoundInfo info;
    info.delta_bar.assign(d, 0.0);
    for (const auto& dl : deltas) axpy(1.0 / (beta * K * n), dl, info.delta_bar);
    info.deltas = deltas;
    info.prox_evals = 0;
    info.floats_per_client = 4 * static_cast<std::int64_t>(d);  // two up, two down

    check_finite(znext, "global model", server.round);
    server.z = znext;
    ++server.round;
    return info;
}

RoundInfo scaffnew_step(const FedProblem& p, double beta, double prob, int B, GradMode mode,
                        Rng& coin, std::vector<ScaffnewClient>& clients, int threads) {
    if (!(prob > 0.0 && prob <= 1.0)) throw ConfigError("scaffnew needs p in (0, 1]");
    const int n = static_cast<int>(clients.size());
    const int d = p.dim();

    std::vector<Vec> proposals(n);
    parallel_for(n, threads, [&](int i) {
        auto& cl = clients[i];
        const Vec g = draw_grad(p, cl.id, cl.x, B, mode, cl.rng);
        cl.v = g;
        proposals[i] = cl.x;
        for (int j = 0; j < d; ++j) proposals[i][j] -= beta * (g[j] + cl.e[j]);
    });

    RoundInfo info;
    info.communicated = coin.bernoulli(prob);
    if (info.communicated) {
        Vec avg(d, 0.0);
        for (const auto& x : proposals) axpy(1.0, x, avg);
        scale(avg, 1.0 / n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j)
                clients[i].e[j] += (prob / beta) * (proposals[i][j] - avg[j]);
            clients[i].x = avg;
        }
        info.floats_per_client = 2 * static_cast<std::int64_t>(d);
    } else {
        for (int i = 0; i < n; ++i) clients[i].x = std::move(proposals[i]);
        info.floats_per_client = 0;
    }
    info.prox_evals = 0;
    info.delta_bar.assign(d, 0.0);
    for (const auto& cl : clients) axpy(1.0 / n, cl.v, info.delta_bar);
    for (const auto& cl : clients) {
        check_finite(cl.x, "client model", -1);
        check_finite(cl.e, "control variable", -1);
    }
    return info;
}

std::vector<Vec> pgd_reference(const Vec& z0, double alpha, int T,
                               const std::function<Vec(const Vec&)>& grad_f,
                               const Regularizer& reg) {
    reg.require_prox_step(alpha);
    std::vector<Vec> iterates;
    iterates.reserve(T + 1);
    iterates.push_back(z0);
    Vec z = z0;
    for (int t = 0; t < T; ++t) {
        Vec y = z;
        const Vec g = grad_f(z);
        axpy(-alpha, g, y);
        z = reg.prox(alpha, y);
        check_finite(z, "iterate", t);
        iterates.push_back(z);
    }
    return iterates;
}

double prox_gradient_norm_sq(std::span<const double> z, double alpha, std::span<const double> grad,
                             const Regularizer& reg) {
    reg.require_prox_step(alpha);
    Vec y(z.begin(), z.end());
    axpy(-alpha, grad, y);
    const Vec px = reg.prox(alpha, y);
    return dist_sq(z, px) / (alpha * alpha);
}

std::int64_t expected_prox_per_round(Algorithm a, int n_clients, int K) {
    switch (a) {
        case Algorithm::FedCanon: return 1;
        case Algorithm::FedCanon2: return n_clients;
        case Algorithm::FedPgd: return static_cast<std::int64_t>(n_clients) * K + 1;
        case Algorithm::Pgd: return 1;
        default: return 0;
    }
}

std::int64_t expected_floats_per_client(Algorithm a, int d) {
    switch (a) {
        case Algorithm::FedCanon: return 3LL * d;
        case Algorithm::FedCanon2: return 2LL * d;
        case Algorithm::FedPgd: return 2LL * d;
        case Algorithm::FedAvg: return 2LL * d;
        case Algorithm::Scaffold: return 4LL * d;
        case Algorithm::Scaffnew: return 2LL * d;  // on communicating steps
        case Algorithm::Pgd: return 0;
    }
    return 0;
}

}  // namespace fedcanon
