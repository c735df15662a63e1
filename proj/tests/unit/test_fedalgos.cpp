#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fedcanon/errors.hpp"
#include "fedcanon/fedalgos.hpp"
#include "fedcanon/problems.hpp"

using namespace fedcanon;

namespace {

// f_1 = (x-1)^2/2, f_2 = (x+1)^2/2; the global minimizer is 0.
QuadraticProblem two_client_scalar() {
    return QuadraticProblem({{1.0}, {1.0}}, {{1.0}, {-1.0}});
}

std::vector<ClientState> make_clients(int n, int d, std::uint64_t seed = 0) {
    std::vector<ClientState> cs;
    for (int i = 0; i < n; ++i) cs.emplace_back(i, d, derive_seed(seed, StreamKind::Client, i));
    return cs;
}

std::vector<Canon2Client> make_canon2(int n, const Vec& z0, std::uint64_t seed = 0) {
    std::vector<Canon2Client> cs;
    for (int i = 0; i < n; ++i) cs.emplace_back(i, z0, derive_seed(seed, StreamKind::Client, i));
    return cs;
}

}  // namespace

TEST_CASE("fedcanon round executes the hand-derived two-client example") {
    const auto prob = two_client_scalar();
    const auto reg = Regularizer::zero();

    SUBCASE("starting at the global minimizer") {
        ServerState server{Vec{0.0}, 0};
        auto clients = make_clients(2, 1);
        const auto info = fedcanon_round(prob, reg, 0.1, 0.1, 1, 1, GradMode::Exact, server,
                                         clients);
        CHECK(server.z[0] == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(clients[0].c[0] == doctest::Approx(1.0));
        CHECK(clients[1].c[0] == doctest::Approx(-1.0));
        CHECK(info.delta_bar[0] == doctest::Approx(0.0));
    }

    SUBCASE("starting at z = 1") {
        ServerState server{Vec{1.0}, 0};
        auto clients = make_clients(2, 1);
        const auto info = fedcanon_round(prob, reg, 0.1, 0.1, 1, 1, GradMode::Exact, server,
                                         clients);
        // Delta_1 = 0, Delta_2 = 2, mean 1; z' = 1 - 0.1; controls absorb the spread
        CHECK(info.delta_bar[0] == doctest::Approx(1.0));
        CHECK(server.z[0] == doctest::Approx(0.9));
        CHECK(clients[0].c[0] == doctest::Approx(1.0));
        CHECK(clients[1].c[0] == doctest::Approx(-1.0));
    }
}

TEST_CASE("single client, one local step reduces to gradient descent") {
    const auto prob = synth_quadratic(4, 1, 3.0, 5);
    const auto reg = Regularizer::zero();
    ServerState server{Vec(4, 2.0), 0};
    auto clients = make_clients(1, 4);
    const double alpha = 0.05;
    Vec expected = server.z;
    Vec g(4);
    prob->client_grad(0, expected, g);
    axpy(-alpha, g, expected);

    fedcanon_round(*prob, reg, alpha, 0.1, 1, 1, GradMode::Exact, server, clients);
    CHECK(max_abs_diff(server.z, expected) <= 1e-12);
    CHECK(norm(clients[0].c) == 0.0);
}

TEST_CASE("fedcanon and the server-free variant produce identical trajectories") {
    for (std::uint64_t seed : {1ULL, 9ULL}) {
        const auto prob = synth_quadratic(6, 4, 8.0, seed);
        const auto reg = Regularizer::mcp(0.05, 2.0);
        const double alpha = 0.1, beta = 0.01;
        const int K = 7;

        ServerState server{Vec(6, 1.0), 0};
        auto clients = make_clients(4, 6, seed);
        auto canon2 = make_canon2(4, Vec(6, 1.0), seed);
        for (int t = 0; t < 40; ++t) {
            fedcanon_round(*prob, reg, alpha, beta, K, 1, GradMode::Exact, server, clients);
            fedcanon2_round(*prob, reg, alpha, beta, K, 1, GradMode::Exact, canon2);
            for (const auto& cl : canon2) CHECK(max_abs_diff(server.z, cl.x0) <= 1e-12);
            for (int i = 0; i < 4; ++i)
                CHECK(max_abs_diff(clients[i].c, canon2[i].c) <= 1e-12);
        }
    }
}

TEST_CASE("control identities hold every round") {
    const auto prob = synth_quadratic(5, 3, 6.0, 13);
    const auto reg = Regularizer::l1(0.01);
    ServerState server{Vec(5, 0.5), 0};
    auto clients = make_clients(3, 5);
    const double beta = 0.02;
    const int K = 4;
    for (int t = 0; t < 30; ++t) {
        // capture c^t to validate the delta identity after the round
        std::vector<Vec> c_before;
        for (const auto& cl : clients) c_before.push_back(cl.c);
        const Vec z_before = server.z;

        fedcanon_round(*prob, reg, 0.08, beta, K, 1, GradMode::Exact, server, clients);

        Vec v_bar(5, 0.0);
        for (const auto& cl : clients) axpy(1.0 / 3.0, cl.v, v_bar);
        Vec c_sum(5, 0.0);
        for (int i = 0; i < 3; ++i) {
            // c_i^{t+1} = v_bar^t - v_i^t
            for (int j = 0; j < 5; ++j)
                CHECK(std::fabs(clients[i].c[j] - (v_bar[j] - clients[i].v[j])) <= 1e-12);
            axpy(1.0, clients[i].c, c_sum);
        }
        CHECK(norm(c_sum) <= 1e-9 * std::sqrt(5.0));

        // Delta_i^{t+1} = v_i^t + c_i^t, recomputed from the local update rule
        for (int i = 0; i < 3; ++i) {
            // local pass replay with exact gradients
            Vec xhat = z_before, g(5);
            for (int k = 0; k < K; ++k) {
                prob->client_grad(i, xhat, g);
                for (int j = 0; j < 5; ++j) xhat[j] -= beta * (g[j] + c_before[i][j]);
            }
            for (int j = 0; j < 5; ++j) {
                const double delta = (z_before[j] - xhat[j]) / (beta * K);
                CHECK(std::fabs(delta - (clients[i].v[j] + c_before[i][j])) <= 1e-12);
            }
        }
    }
}

TEST_CASE("a stationary point with matched controls is a fixed point") {
    const auto prob = synth_quadratic(5, 3, 4.0, 21);
    const auto reg = Regularizer::l1(0.05);
    const double alpha = 0.1;

    // stationary point of f + h via a long reference run
    auto grad = [&](const Vec& x) { return prob->grad_f(x); };
    const auto iters = pgd_reference(*prob->smooth_minimizer(), alpha, 20000, grad, reg);
    const Vec zstar = iters.back();

    ServerState server{zstar, 0};
    auto clients = make_clients(3, 5);
    const Vec gbar = prob->grad_f(zstar);
    for (int i = 0; i < 3; ++i) {
        Vec gi(5);
        prob->client_grad(i, zstar, gi);
        clients[i].c = sub(gbar, gi);  // c_i = grad f - grad f_i
    }
    fedcanon_round(*prob, reg, alpha, 0.05, 1, 1, GradMode::Exact, server, clients);
    CHECK(max_abs_diff(server.z, zstar) <= 1e-12);
}

TEST_CASE("fedpgd reduces to an averaged gradient step when h = 0, K = 1, alpha = 1") {
    const auto prob = synth_quadratic(4, 3, 5.0, 2);
    const auto reg = Regularizer::zero();
    const double beta = 0.03;
    ServerState server{Vec(4, 1.5), 0};
    auto clients = make_clients(3, 4);
    Vec expected = server.z;
    const Vec g = prob->grad_f(expected);
    axpy(-beta, g, expected);

    fedpgd_round(*prob, reg, 1.0, beta, 1, 1, GradMode::Exact, server, clients);
    CHECK(max_abs_diff(server.z, expected) <= 1e-12);
}

TEST_CASE("fedpgd counts local and server prox evaluations") {
    const auto prob = synth_quadratic(3, 10, 2.0, 4);
    const auto reg = Regularizer::l1(0.01);
    ServerState server{Vec(3, 0.0), 0};
    auto clients = make_clients(10, 3);
    const auto info =
        fedpgd_round(*prob, reg, 0.1, 0.01, 40, 1, GradMode::Exact, server, clients);
    CHECK(info.prox_evals == 401);  // N*K + 1
    CHECK(info.floats_per_client == 6);
}

TEST_CASE("local prox sparsity does not survive averaging") {
    // two clients whose local solutions zero disjoint coordinates; the third
    // coordinate is asymmetric so the averages do not cancel exactly
    QuadraticProblem prob({{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}},
                          {{2.0, 0.0, 0.6}, {0.0, 2.0, -0.5}});
    const auto reg = Regularizer::l1(0.4);
    ServerState server{Vec(3, 0.0), 0};
    auto clients = make_clients(2, 3);
    for (int t = 0; t < 25; ++t)
        fedpgd_round(prob, reg, 0.3, 0.25, 8, 1, GradMode::Exact, server, clients);

    // replay the local pass from the settled global model
    Vec avg(3, 0.0);
    int max_local_nnz = 0;
    for (int i = 0; i < 2; ++i) {
        Vec xhat = server.z, g(3), y(3);
        for (int k = 0; k < 8; ++k) {
            prob.client_grad(i, xhat, g);
            for (int j = 0; j < 3; ++j) y[j] = xhat[j] - 0.25 * g[j];
            reg.prox(0.25, y, xhat);
        }
        max_local_nnz = std::max(max_local_nnz, count_nonzero(xhat));
        axpy(0.5, xhat, avg);
    }
    CHECK(max_local_nnz <= 2);        // each client's model is sparse
    CHECK(count_nonzero(avg) == 3);   // the average is dense
}

TEST_CASE("fedavg equals local SGD for a single client") {
    const auto prob = synth_quadratic(3, 1, 2.0, 6);
    ServerState server{Vec(3, 1.0), 0};
    auto clients = make_clients(1, 3);
    const double beta = 0.05;
    const int K = 6;
    Vec expected = server.z;
    Vec g(3);
    for (int k = 0; k < K; ++k) {
        prob->client_grad(0, expected, g);
        axpy(-beta, g, expected);
    }
    fedavg_round(*prob, beta, K, 1, GradMode::Exact, server, clients);
    CHECK(max_abs_diff(server.z, expected) <= 1e-13);
}

TEST_CASE("fedavg on homogeneous clients matches fedcanon with alpha = beta*K") {
    // identical clients: control variables stay zero and the mapping is exact
    QuadraticProblem prob({{2.0, 1.0}, {2.0, 1.0}}, {{1.0, -0.5}, {1.0, -0.5}});
    const double beta = 0.03;
    const int K = 5;
    ServerState avg_server{Vec(2, 2.0), 0};
    ServerState fc_server{Vec(2, 2.0), 0};
    auto avg_clients = make_clients(2, 2);
    auto fc_clients = make_clients(2, 2);
    for (int t = 0; t < 60; ++t) {
        fedavg_round(prob, beta, K, 1, GradMode::Exact, avg_server, avg_clients);
        fedcanon_round(prob, Regularizer::zero(), beta * K, beta, K, 1, GradMode::Exact,
                       fc_server, fc_clients);
        CHECK(max_abs_diff(avg_server.z, fc_server.z) <= 1e-10);
    }
}

TEST_CASE("fedavg with heterogeneous curvature drifts to its own fixed point") {
    // distinct per-client curvature: the fixed point is the w-weighted mean of
    // local minimizers with w_i = 1 - (1 - beta D_i)^K, not the true minimizer
    QuadraticProblem prob({{1.0}, {4.0}}, {{1.0}, {-1.0}});
    const double beta = 0.05;
    const int K = 30;
    ServerState server{Vec{0.0}, 0};
    auto clients = make_clients(2, 1);
    for (int t = 0; t < 400; ++t)
        fedavg_round(prob, beta, K, 1, GradMode::Exact, server, clients);

    const double w1 = 1.0 - std::pow(1.0 - beta * 1.0, K);
    const double w2 = 1.0 - std::pow(1.0 - beta * 4.0, K);
    const double fixed = (w1 * 1.0 + w2 * (-1.0)) / (w1 + w2);
    const double zstar = (1.0 * 1.0 + 4.0 * (-1.0)) / 5.0;
    CHECK(server.z[0] == doctest::Approx(fixed).epsilon(1e-9));
    CHECK(std::fabs(server.z[0] - zstar) > 0.05);
}

TEST_CASE("scaffold keeps its server control equal to the client mean") {
    const auto prob = synth_quadratic(4, 3, 6.0, 17);
    ScaffoldServer server{Vec(4, 1.0), Vec(4, 0.0), 0};
    std::vector<ScaffoldClient> clients;
    for (int i = 0; i < 3; ++i) clients.emplace_back(i, 4, derive_seed(0, StreamKind::Client, i));
    for (int t = 0; t < 25; ++t) {
        scaffold_round(*prob, 0.5, 0.02, 5, 1, GradMode::Exact, server, clients);
        Vec mean(4, 0.0);
        for (const auto& cl : clients) axpy(1.0 / 3.0, cl.e, mean);
        CHECK(max_abs_diff(server.e, mean) <= 1e-12);
        // e_i^{t+1} = v_i^t
        for (const auto& cl : clients) CHECK(max_abs_diff(cl.e, cl.v) <= 1e-12);
    }
}

TEST_CASE("scaffold matches fedcanon under the step-size mapping") {
    const auto prob = synth_quadratic(5, 4, 4.0, 23);
    const double beta = 0.02, alpha_s = 0.8;
    const int K = 6;
    const double alpha_fc = alpha_s * beta * K;

    ServerState fc_server{Vec(5, 1.0), 0};
    auto fc_clients = make_clients(4, 5, 3);
    ScaffoldServer sc_server{Vec(5, 1.0), Vec(5, 0.0), 0};
    std::vector<ScaffoldClient> sc_clients;
    for (int i = 0; i < 4; ++i) sc_clients.emplace_back(i, 5, derive_seed(3, StreamKind::Client, i));

    for (int t = 0; t < 100; ++t) {
        fedcanon_round(*prob, Regularizer::zero(), alpha_fc, beta, K, 1, GradMode::Exact,
                       fc_server, fc_clients);
        scaffold_round(*prob, alpha_s, beta, K, 1, GradMode::Exact, sc_server, sc_clients);
        CHECK(max_abs_diff(fc_server.z, sc_server.z) <= 1e-10);
        // e^{t+1} - e_i^{t+1} equals fedcanon's control variable
        for (int i = 0; i < 4; ++i) {
            const Vec diff = sub(sc_server.e, sc_clients[i].e);
            CHECK(max_abs_diff(diff, fc_clients[i].c) <= 1e-10);
        }
    }
}

TEST_CASE("scaffnew conserves the control sum and reduces cleanly") {
    const auto prob = synth_quadratic(4, 3, 3.0, 29);

    SUBCASE("control variables always sum to zero") {
        std::vector<ScaffnewClient> clients;
        for (int i = 0; i < 3; ++i)
            clients.emplace_back(i, Vec(4, 1.0), derive_seed(1, StreamKind::Client, i));
        Rng coin(55);
        for (int t = 0; t < 200; ++t) {
            scaffnew_step(*prob, 0.05, 0.3, 1, GradMode::Exact, coin, clients);
            Vec sum(4, 0.0);
            for (const auto& cl : clients) axpy(1.0, cl.e, sum);
            CHECK(norm(sum) <= 1e-12 * 200);
        }
    }

    SUBCASE("p = 1 synchronizes every step") {
        std::vector<ScaffnewClient> clients;
        for (int i = 0; i < 3; ++i)
            clients.emplace_back(i, Vec(4, 1.0), derive_seed(2, StreamKind::Client, i));
        Rng coin(1);
        const auto info = scaffnew_step(*prob, 0.05, 1.0, 1, GradMode::Exact, coin, clients);
        CHECK(info.communicated);
        for (const auto& cl : clients) CHECK(max_abs_diff(cl.x, clients[0].x) == 0.0);
    }

    SUBCASE("a single client runs plain gradient descent with zero control") {
        const auto solo = synth_quadratic(3, 1, 2.0, 31);
        std::vector<ScaffnewClient> clients;
        clients.emplace_back(0, Vec(3, 1.0), 7);
        Rng coin(9);
        Vec expected(3, 1.0);
        for (int t = 0; t < 50; ++t) {
            Vec g(3);
            solo->client_grad(0, expected, g);
            axpy(-0.05, g, expected);
            scaffnew_step(*solo, 0.05, 0.5, 1, GradMode::Exact, coin, clients);
            CHECK(norm(clients[0].e) == 0.0);
        }
        CHECK(max_abs_diff(clients[0].x, expected) <= 1e-12);
    }
}

TEST_CASE("proximal gradient reference examples") {
    SUBCASE("geometric contraction on f = z^2/2") {
        QuadraticProblem prob({{1.0}}, {{0.0}});
        auto grad = [&](const Vec& x) { return prob.grad_f(x); };
        const auto iters = pgd_reference(Vec{1.0}, 0.5, 3, grad, Regularizer::zero());
        CHECK(iters[0][0] == doctest::Approx(1.0));
        CHECK(iters[1][0] == doctest::Approx(0.5));
        CHECK(iters[2][0] == doctest::Approx(0.25));
        CHECK(iters[3][0] == doctest::Approx(0.125));
    }

    SUBCASE("scalar lasso step soft-thresholds") {
        QuadraticProblem prob({{1.0}}, {{2.0}});  // f = (z-2)^2/2
        auto grad = [&](const Vec& x) { return prob.grad_f(x); };
        const auto iters = pgd_reference(Vec{0.0}, 0.5, 1, grad, Regularizer::l1(1.0));
        CHECK(iters[1][0] == doctest::Approx(0.5));  // prox of 1 at threshold 0.5
    }

    SUBCASE("fedcanon with N = K = 1, full batch walks the same sequence") {
        const auto prob = synth_quadratic(4, 1, 4.0, 37);
        const auto reg = Regularizer::l1(0.02);
        const double alpha = 0.1;
        auto grad = [&](const Vec& x) { return prob->grad_f(x); };
        const auto iters = pgd_reference(Vec(4, 1.0), alpha, 100, grad, reg);
        ServerState server{Vec(4, 1.0), 0};
        auto clients = make_clients(1, 4);
        for (int t = 0; t < 100; ++t) {
            fedcanon_round(*prob, reg, alpha, alpha, 1, 1, GradMode::Exact, server, clients);
            CHECK(max_abs_diff(server.z, iters[t + 1]) <= 1e-12);
        }
    }
}

TEST_CASE("proximal gradient norm identities") {
    QuadraticProblem prob({{1.0}}, {{2.0}});  // f = (z-2)^2/2

    SUBCASE("h = 0 reduces to the squared gradient norm") {
        const Vec z{0.5};
        const Vec g = prob.grad_f(z);
        CHECK(prox_gradient_norm_sq(z, 0.25, g, Regularizer::zero()) ==
              doctest::Approx(norm_sq(g)));
    }

    SUBCASE("vanishes at the lasso stationary point") {
        // kappa = 0.5, alpha = 1: the composite minimizer is z = 1.5
        const Vec z{1.5};
        const Vec g = prob.grad_f(z);
        CHECK(prox_gradient_norm_sq(z, 1.0, g, Regularizer::l1(0.5)) <= 1e-24);
    }

    SUBCASE("vanishes at the smooth minimizer when kappa = 0") {
        const Vec z{2.0};
        const Vec g = prob.grad_f(z);
        CHECK(prox_gradient_norm_sq(z, 0.3, g, Regularizer::l1(0.0)) <= 1e-24);
    }
}

TEST_CASE("accounting constants match the cost table") {
    CHECK(expected_prox_per_round(Algorithm::FedCanon, 10, 40) == 1);
    CHECK(expected_prox_per_round(Algorithm::FedCanon2, 10, 40) == 10);
    CHECK(expected_prox_per_round(Algorithm::FedPgd, 10, 40) == 401);
    CHECK(expected_floats_per_client(Algorithm::FedCanon, 123) == 369);
    CHECK(expected_floats_per_client(Algorithm::FedCanon2, 100) == 200);
    CHECK(expected_floats_per_client(Algorithm::FedPgd, 123) == 246);
}

TEST_CASE("per-round accounting matches the constants at runtime") {
    const auto prob = synth_quadratic(7, 4, 3.0, 41);
    const auto reg = Regularizer::l1(0.01);
    ServerState server{Vec(7, 0.2), 0};
    auto clients = make_clients(4, 7);
    const auto info = fedcanon_round(*prob, reg, 0.1, 0.01, 3, 1, GradMode::Exact, server,
                                     clients);
    CHECK(info.prox_evals == expected_prox_per_round(Algorithm::FedCanon, 4, 3));
    CHECK(info.floats_per_client == expected_floats_per_client(Algorithm::FedCanon, 7));

    auto canon2 = make_canon2(4, Vec(7, 0.2));
    const auto info2 = fedcanon2_round(*prob, reg, 0.1, 0.01, 3, 1, GradMode::Exact, canon2);
    CHECK(info2.prox_evals == expected_prox_per_round(Algorithm::FedCanon2, 4, 3));
    CHECK(info2.floats_per_client == expected_floats_per_client(Algorithm::FedCanon2, 7));
}

TEST_CASE("divergence aborts with the round index") {
    const auto prob = synth_quadratic(3, 2, 10.0, 43);
    ServerState server{Vec(3, 1.0), 0};
    auto clients = make_clients(2, 3);
    // beta far above 2/L blows up the local iterates within a few rounds
    CHECK_THROWS_AS(
        [&] {
            for (int t = 0; t < 200; ++t)
                fedcanon_round(*prob, Regularizer::zero(), 0.1, 150.0, 20, 1, GradMode::Exact,
                               server, clients);
        }(),
        DivergedError);
}

TEST_CASE("client-level concurrency is bitwise deterministic") {
    const auto prob = synth_quadratic(6, 8, 5.0, 47);
    const auto reg = Regularizer::scad(0.05, 3.7);
    auto run = [&](int threads) {
        ServerState server{Vec(6, 0.7), 0};
        auto clients = make_clients(8, 6, 11);
        for (int t = 0; t < 20; ++t)
            fedcanon_round(*prob, reg, 0.1, 0.01, 4, 1, GradMode::Exact, server, clients,
                           threads);
        return server.z;
    };
    const Vec serial = run(1);
    const Vec parallel = run(8);
    CHECK(serial == parallel);
}
