#include "fedcanon/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <thread>

#include "fedcanon/errors.hpp"

namespace fedcanon {

namespace {

constexpr double kProbeEps = 1e-12;  // rounding allowance for exact identities

bool probe_needs_exact(const std::string& name) {
    return name == "descent" || name == "sublinear" || name == "linear_rate";
}

std::unique_ptr<FedProblem> build_problem(const ExperimentConfig& cfg) {
    switch (cfg.problem.type) {
        case ProblemConfig::Type::Quadratic:
            if (!cfg.problem.theta.empty()) {
                if (static_cast<int>(cfg.problem.theta.size()) != cfg.partition.n_clients)
                    throw ConfigError("explicit quadratic needs one theta row per client");
                return std::make_unique<QuadraticProblem>(cfg.problem.curvature,
                                                          cfg.problem.theta);
            }
            return synth_quadratic(cfg.problem.d, cfg.partition.n_clients,
                                   cfg.problem.condition_number, cfg.seed,
                                   cfg.problem.curvature_spread, cfg.problem.theta_scale);
        case ProblemConfig::Type::Blobs: {
            BlobsSpec spec = cfg.problem.blobs;
            spec.seed = cfg.seed;
            Dataset train = synth_blobs(spec, false);
            std::optional<Dataset> test;
            if (spec.test_samples > 0) test = synth_blobs(spec, true);
            ModelSpec model{cfg.problem.model, train.dim, train.num_classes, cfg.problem.hidden};
            PartitionSpec part = cfg.partition;
            part.seed = derive_seed(cfg.seed, StreamKind::Partition, part.seed);
            auto shards = partition(train, part);
            return std::make_unique<DatasetProblem>(std::move(train), std::move(test), model,
                                                    std::move(shards));
        }
        case ProblemConfig::Type::Libsvm: {
            Dataset train = parse_libsvm_file(cfg.problem.train_path, cfg.problem.dim_override);
            std::optional<Dataset> test;
            if (!cfg.problem.test_path.empty())
                test = parse_libsvm_file(cfg.problem.test_path,
                                         cfg.problem.dim_override.value_or(train.dim));
            ModelSpec model{cfg.problem.model, train.dim, train.num_classes, cfg.problem.hidden};
            PartitionSpec part = cfg.partition;
            part.seed = derive_seed(cfg.seed, StreamKind::Partition, part.seed);
            auto shards = partition(train, part);
            return std::make_unique<DatasetProblem>(std::move(train), std::move(test), model,
                                                    std::move(shards));
        }
    }
    throw ConfigError("unknown problem type");
}

// Best composite value reachable by a long proximal-gradient reference run;
// exact closed form when the nonsmooth part vanishes.
double composite_optimum(const FedProblem& prob, const Regularizer& reg) {
    if (reg.kappa == 0.0 || reg.kind == RegKind::Zero) {
        if (auto f = prob.smooth_optimum()) return *f;
        throw ConfigError("problem has no known optimum");
    }
    auto z = prob.smooth_minimizer();
    if (!z) throw ConfigError("problem has no known optimum for the reference run");
    const double rho = reg.rho();
    double step = 1.0 / prob.smoothness();
    if (rho > 0.0) step = std::min(step, 0.5 / rho);
    auto grad = [&](const Vec& x) { return prob.grad_f(x); };
    const auto iterates = pgd_reference(*z, step, 100000, grad, reg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& it : iterates) best = std::min(best, objective_phi(prob, it, reg));
    return best;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (T < 1) throw ConfigError("T must be >= 1");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (B < 1) throw ConfigError("B must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    partition.validate();
    reg.validate();
    const double rho = reg.rho();
    if (alpha * rho >= 1.0)
        throw ConfigError("step size violates 0 < alpha < 1/rho (alpha*rho = " +
                          std::to_string(alpha * rho) + ")");
    if (algorithm == Algorithm::FedPgd && beta * rho >= 1.0)
        throw ConfigError("fedpgd local step violates 0 < beta < 1/rho");
    if (algorithm == Algorithm::Scaffnew) {
        if (!(p > 0.0 && p <= 1.0)) throw ConfigError("scaffnew needs p in (0, 1]");
        if (reg.kappa != 0.0 && reg.kind != RegKind::Zero)
            throw ConfigError("scaffnew supports smooth objectives only (zero regularizer)");
    }
    if (algorithm == Algorithm::Pgd && grad_mode != GradMode::Exact)
        throw ConfigError("pgd reference uses exact gradients");
    for (const auto& name : probes) {
        if (name != "descent" && name != "sublinear" && name != "linear_rate" &&
            name != "accounting")
            throw ConfigError("unknown probe '" + name + "'");
        if (probe_needs_exact(name) && grad_mode != GradMode::Exact)
            throw ConfigError("probe '" + name + "' requires exact gradients (sigma = 0)");
        if (probe_needs_exact(name) && !reg.subgrad_bound_sq(1).has_value())
            throw ConfigError("probe '" + name + "' needs a bounded-subgradient regularizer");
        if (probe_needs_exact(name) && algorithm != Algorithm::FedCanon &&
            algorithm != Algorithm::FedCanon2)
            throw ConfigError("probe '" + name + "' applies to fedcanon/fedcanon2 runs");
        if ((name == "sublinear" || name == "linear_rate") &&
            problem.type != ProblemConfig::Type::Quadratic)
            throw ConfigError("probe '" + name + "' needs a problem with known optimum");
    }
    if (!z0.empty() && problem.type == ProblemConfig::Type::Quadratic &&
        static_cast<int>(z0.size()) != problem.d)
        throw ConfigError("z0 dimension does not match the problem");
}

Constants resolve_constants(const ExperimentConfig& cfg) {
    cfg.validate();
    auto problem = build_problem(cfg);
    Constants consts;
    consts.L = problem->smoothness();
    consts.rho = cfg.reg.rho();
    consts.delta = 1.0 / ((1.0 - cfg.alpha * consts.rho) * (1.0 - cfg.alpha * consts.rho));
    consts.Bh = cfg.reg.subgrad_bound_sq(problem->dim());
    consts.mu = problem->strong_convexity();
    consts.fstar_smooth = problem->smooth_optimum();
    return consts;
}

double epsilon_term(const std::vector<Vec>& client_grads, const Vec& grad_f,
                    const std::vector<Vec>& v_prev) {
    const int n = static_cast<int>(client_grads.size());
    const std::size_t d = grad_f.size();
    Vec v_bar(d, 0.0);
    for (const auto& v : v_prev) axpy(1.0, v, v_bar);
    scale(v_bar, 1.0 / n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double r = client_grads[i][j] - v_prev[i][j] - grad_f[j] + v_bar[j];
            s += r * r;
        }
        total += s;
    }
    return total / n;
}

Trajectory run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    auto problem = build_problem(cfg);
    const int n = problem->num_clients();
    const int d = problem->dim();
    const int threads =
        cfg.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : cfg.threads;

    if (!cfg.z0.empty() && static_cast<int>(cfg.z0.size()) != d)
        throw ConfigError("z0 dimension does not match the problem");

    Trajectory traj;
    traj.cfg = cfg;
    traj.shard_hash = problem->partition_hash();

    Constants& consts = traj.consts;
    consts.L = problem->smoothness();
    consts.rho = cfg.reg.rho();
    consts.delta = 1.0 / ((1.0 - cfg.alpha * consts.rho) * (1.0 - cfg.alpha * consts.rho));
    consts.Bh = cfg.reg.subgrad_bound_sq(d);
    consts.mu = problem->strong_convexity();
    consts.fstar_smooth = problem->smooth_optimum();
    if (cfg.probes.count("sublinear") || cfg.probes.count("linear_rate"))
        consts.phistar = composite_optimum(*problem, cfg.reg);

    Vec z = cfg.z0.empty() ? Vec(d, cfg.z0_fill) : cfg.z0;

    // Algorithm states. Every algorithm keeps per-client recorded averages v
    // so the tracking term E^t is defined uniformly.
    ServerState server{z, 0};
    std::vector<ClientState> clients;
    std::vector<Canon2Client> canon2;
    ScaffoldServer sc_server;
    std::vector<ScaffoldClient> sc_clients;
    std::vector<ScaffnewClient> sn_clients;
    Rng coin(derive_seed(cfg.seed, StreamKind::Coin));

    auto client_seed = [&](int i) { return derive_seed(cfg.seed, StreamKind::Client, i); };
    switch (cfg.algorithm) {
        case Algorithm::FedCanon:
        case Algorithm::FedPgd:
        case Algorithm::FedAvg:
        case Algorithm::Pgd:
            for (int i = 0; i < n; ++i) clients.emplace_back(i, d, client_seed(i));
            break;
        case Algorithm::FedCanon2:
            for (int i = 0; i < n; ++i) canon2.emplace_back(i, z, client_seed(i));
            break;
        case Algorithm::Scaffold:
            sc_server.z = z;
            sc_server.e.assign(d, 0.0);
            for (int i = 0; i < n; ++i) sc_clients.emplace_back(i, d, client_seed(i));
            break;
        case Algorithm::Scaffnew:
            for (int i = 0; i < n; ++i) sn_clients.emplace_back(i, z, client_seed(i));
            break;
    }

    auto current_z = [&]() -> Vec {
        switch (cfg.algorithm) {
            case Algorithm::FedCanon2: return canon2[0].x0;
            case Algorithm::Scaffold: return sc_server.z;
            case Algorithm::Scaffnew: {
                Vec avg(d, 0.0);
                for (const auto& cl : sn_clients) axpy(1.0 / n, cl.x, avg);
                return avg;
            }
            default: return server.z;
        }
    };

    auto collect_v = [&]() {
        std::vector<Vec> vs;
        vs.reserve(n);
        switch (cfg.algorithm) {
            case Algorithm::FedCanon2:
                for (const auto& cl : canon2) vs.push_back(cl.v);
                break;
            case Algorithm::Scaffold:
                for (const auto& cl : sc_clients) vs.push_back(cl.v);
                break;
            case Algorithm::Scaffnew:
                for (const auto& cl : sn_clients) vs.push_back(cl.v);
                break;
            default:
                for (const auto& cl : clients) vs.push_back(cl.v);
                break;
        }
        return vs;
    };

    std::int64_t prox_cum = 0, floats_cum = 0;
    const auto run_start = std::chrono::steady_clock::now();

    for (int t = 0; t <= cfg.T; ++t) {
        const Vec zt = current_z();
        if (!all_finite(zt)) throw DivergedError("non-finite global model", t);
        traj.iterates.push_back(zt);

        // Metrics at z^t with exact gradients (plug-in v in stochastic mode).
        std::vector<Vec> gi(n, Vec(d));
        for (int i = 0; i < n; ++i) problem->client_grad(i, zt, gi[i]);
        Vec gf(d, 0.0);
        for (const auto& g : gi) axpy(1.0 / n, g, gf);

        RoundRecord rec;
        rec.t = t;
        rec.phi = objective_phi(*problem, zt, cfg.reg);
        if (!std::isfinite(rec.phi)) throw DivergedError("non-finite objective", t);
        rec.prox_grad_norm_sq = prox_gradient_norm_sq(zt, cfg.alpha, gf, cfg.reg);
        rec.test_acc = problem->test_accuracy(zt);
        rec.epsilon = epsilon_term(gi, gf, collect_v());
        rec.prox_cum = prox_cum;
        rec.floats_cum = floats_cum;
        traj.records.push_back(rec);

        if (t == cfg.T) break;

        const auto t0 = std::chrono::steady_clock::now();
        RoundInfo info;
        switch (cfg.algorithm) {
            case Algorithm::FedCanon:
                info = fedcanon_round(*problem, cfg.reg, cfg.alpha, cfg.beta, cfg.K, cfg.B,
                                      cfg.grad_mode, server, clients, threads);
                break;
            case Algorithm::FedCanon2:
                info = fedcanon2_round(*problem, cfg.reg, cfg.alpha, cfg.beta, cfg.K, cfg.B,
                                       cfg.grad_mode, canon2, threads);
                break;
            case Algorithm::FedPgd:
                info = fedpgd_round(*problem, cfg.reg, cfg.alpha, cfg.beta, cfg.K, cfg.B,
                                    cfg.grad_mode, server, clients, threads);
                break;
            case Algorithm::FedAvg:
                info = fedavg_round(*problem, cfg.beta, cfg.K, cfg.B, cfg.grad_mode, server,
                                    clients, threads);
                break;
            case Algorithm::Scaffold:
                info = scaffold_round(*problem, cfg.alpha, cfg.beta, cfg.K, cfg.B, cfg.grad_mode,
                                      sc_server, sc_clients, threads);
                break;
            case Algorithm::Scaffnew:
                info = scaffnew_step(*problem, cfg.beta, cfg.p, cfg.B, cfg.grad_mode, coin,
                                     sn_clients, threads);
                break;
            case Algorithm::Pgd: {
                Vec y = server.z;
                axpy(-cfg.alpha, gf, y);
                const Vec znext = cfg.reg.prox(cfg.alpha, y);
                info.delta_bar = gf;
                info.gbar_norm_sq = dist_sq(server.z, znext) / (cfg.alpha * cfg.alpha);
                info.prox_evals = 1;
                info.floats_per_client = 0;
                if (!all_finite(znext)) throw DivergedError("non-finite iterate", t);
                // v for the tracking metric: exact client gradients at z^t.
                for (int i = 0; i < n; ++i) clients[i].v = gi[i];
                server.z = znext;
                ++server.round;
                break;
            }
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        traj.total_wall_ms += ms;
        if (cfg.record_wall_ms) traj.records.back().wall_ms = ms;

        prox_cum += info.prox_evals;
        floats_cum += info.floats_per_client;

        StepStats st;
        st.gbar_norm_sq = info.gbar_norm_sq;
        st.gradf_norm_sq = norm_sq(gf);
        st.prox_evals = info.prox_evals;
        st.floats_per_client = info.floats_per_client;
        st.communicated = info.communicated;
        traj.steps.push_back(st);
    }

    traj.total_wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - run_start)
            .count();
    return traj;
}

StepSizeReport validate_stepsizes(double alpha, double beta, int K, double L, double rho,
                                  std::optional<double> mu) {
    if (!(L > 0.0)) throw ConfigError("validate_stepsizes needs L > 0");
    if (alpha * rho >= 1.0) throw ConfigError("validate_stepsizes needs alpha*rho < 1");
    StepSizeReport rep;
    rep.delta = 1.0 / ((1.0 - alpha * rho) * (1.0 - alpha * rho));
    const double delta = rep.delta;

    auto add = [&](std::string name, std::string expr, double lhs, double rhs) {
        const bool pass = lhs <= rhs;
        rep.checks.push_back({std::move(name), std::move(expr), lhs, rhs, pass});
        rep.all_pass = rep.all_pass && pass;
    };

    add("prox_step", "alpha*rho < 1", alpha * rho, 1.0 - 1e-15);
    add("descent_beta", "beta^2 <= 1/(24*K*(K-1)*L^2)", beta * beta,
        K > 1 ? 1.0 / (24.0 * K * (K - 1) * L * L) : std::numeric_limits<double>::infinity());
    add("sublinear_alpha", "alpha*(rho+L) + 4*alpha^2*L^2 <= 1/2",
        alpha * (rho + L) + 4.0 * alpha * alpha * L * L, 0.5);
    add("sublinear_beta", "192*(6+delta)*beta^2*K^2*L^2 <= 1",
        192.0 * (6.0 + delta) * beta * beta * K * K * L * L, 1.0);
    if (mu) {
        const double m = *mu;
        add("linear_rate_alpha",
            "alpha*(rho+L) + 4*alpha^2*L^2 <= min{1/2, (4*mu*(rho+L) + 64*L^2)/mu^2}",
            alpha * (rho + L) + 4.0 * alpha * alpha * L * L,
            std::min(0.5, (4.0 * m * (rho + L) + 64.0 * L * L) / (m * m)));
        add("linear_rate_beta", "12*(6+delta)*beta^2*K^2*L^2 <= min{1/16, 1 - alpha*mu/4}",
            12.0 * (6.0 + delta) * beta * beta * K * K * L * L,
            std::min(1.0 / 16.0, 1.0 - alpha * m / 4.0));
    }
    return rep;
}

ProbeResult descent_probe(const Trajectory& traj) {
    ProbeResult res{"descent", false, ""};
    const auto& cfg = traj.cfg;
    const auto& c = traj.consts;
    if (cfg.grad_mode != GradMode::Exact) {
        res.detail = "requires exact gradients";
        return res;
    }
    if (!c.Bh) {
        res.detail = "requires a bounded-subgradient regularizer";
        return res;
    }
    if (cfg.K > 1 &&
        cfg.beta * cfg.beta > 1.0 / (24.0 * cfg.K * (cfg.K - 1) * c.L * c.L)) {
        res.detail = "step-size precondition beta^2 <= 1/(24*K*(K-1)*L^2) violated";
        return res;
    }
    const double alpha = cfg.alpha, beta = cfg.beta;
    const double track_coef =
        12.0 * (2.0 + c.delta) * alpha * beta * beta * cfg.K * cfg.K * c.L * c.L;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const double lhs = traj.records[t + 1].phi - traj.records[t].phi;
        const double rhs = -(alpha - 2.0 * (c.rho + c.L) * alpha * alpha) / 4.0 *
                               traj.steps[t].gbar_norm_sq -
                           alpha / 8.0 * traj.records[t].prox_grad_norm_sq -
                           (alpha / 16.0 - track_coef) * traj.steps[t].gradf_norm_sq +
                           alpha * (*c.Bh) / 8.0 + track_coef * traj.records[t].epsilon;
        min_margin = std::min(min_margin, rhs - lhs);
    }
    res.pass = min_margin >= -1e-9;
    res.detail = "min margin " + format_double(min_margin) + " over " +
                 std::to_string(traj.steps.size()) + " rounds";
    return res;
}

ProbeResult sublinear_check(const Trajectory& traj) {
    ProbeResult res{"sublinear", false, ""};
    const auto& cfg = traj.cfg;
    const auto& c = traj.consts;
    if (cfg.grad_mode != GradMode::Exact || !c.Bh || !c.phistar) {
        res.detail = "requires exact gradients, bounded subgradients and a known optimum";
        return res;
    }
    const auto rep = validate_stepsizes(cfg.alpha, cfg.beta, cfg.K, c.L, c.rho);
    for (const auto& chk : rep.checks)
        if ((chk.name == "sublinear_alpha" || chk.name == "sublinear_beta") && !chk.pass) {
            res.detail = "step-size precondition failed: " + chk.expr;
            return res;
        }
    const int T = static_cast<int>(traj.steps.size());
    double avg = 0.0;
    for (int t = 0; t < T; ++t) avg += traj.records[t].prox_grad_norm_sq;
    avg /= T;
    const double bound =
        8.0 * (traj.records[0].phi - *c.phistar + cfg.alpha * traj.records[0].epsilon) /
            (cfg.alpha * T) +
        *c.Bh;
    res.pass = avg <= bound + kProbeEps;
    res.detail = "avg ||G||^2 " + format_double(avg) + " vs bound " + format_double(bound);
    return res;
}

ProbeResult linear_rate_check(const Trajectory& traj) {
    ProbeResult res{"linear_rate", false, ""};
    const auto& cfg = traj.cfg;
    const auto& c = traj.consts;
    if (cfg.grad_mode != GradMode::Exact || !c.Bh || !c.phistar || !c.mu) {
        res.detail = "requires exact gradients, bounded subgradients, known optimum and mu";
        return res;
    }
    const auto rep = validate_stepsizes(cfg.alpha, cfg.beta, cfg.K, c.L, c.rho, c.mu);
    for (const auto& chk : rep.checks)
        if ((chk.name == "linear_rate_alpha" || chk.name == "linear_rate_beta") && !chk.pass) {
            res.detail = "step-size precondition failed: " + chk.expr;
            return res;
        }
    const double mu = *c.mu, alpha = cfg.alpha, Bh = *c.Bh;
    const double factor = 1.0 - alpha * mu / 4.0;
    const double residual = alpha * Bh / 8.0;
    const double floor = Bh / (2.0 * mu);
    auto psi = [&](int t) {
        return traj.records[t].phi - *c.phistar + alpha * traj.records[t].epsilon;
    };
    int checked = 0, violations = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t + 1 < traj.records.size(); ++t) {
        const double pt = psi(static_cast<int>(t));
        if (pt < 2.0 * floor) continue;
        ++checked;
        const double bound = factor * pt + residual + kProbeEps * std::max(1.0, std::fabs(pt));
        const double pnext = psi(static_cast<int>(t) + 1);
        if (pnext > bound) {
            ++violations;
            worst = std::max(worst, pnext - bound);
        }
    }
    res.pass = violations == 0;
    res.detail = std::to_string(checked) + " rounds above the floor, " +
                 std::to_string(violations) + " contraction violations; final Psi " +
                 format_double(psi(static_cast<int>(traj.records.size()) - 1));
    return res;
}

ProbeResult accounting_check(const Trajectory& traj) {
    ProbeResult res{"accounting", true, ""};
    const auto& cfg = traj.cfg;
    const int n = cfg.partition.n_clients;
    int d = 0;
    if (!traj.iterates.empty()) d = static_cast<int>(traj.iterates[0].size());
    const std::int64_t want_prox = expected_prox_per_round(cfg.algorithm, n, cfg.K);
    const std::int64_t want_floats = expected_floats_per_client(cfg.algorithm, d);
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& st = traj.steps[t];
        const std::int64_t floats_expected =
            cfg.algorithm == Algorithm::Scaffnew ? (st.communicated ? want_floats : 0)
                                                 : want_floats;
        if (st.prox_evals != want_prox || st.floats_per_client != floats_expected) {
            res.pass = false;
            res.detail = "round " + std::to_string(t) + ": prox " +
                         std::to_string(st.prox_evals) + " (want " + std::to_string(want_prox) +
                         "), floats " + std::to_string(st.floats_per_client) + " (want " +
                         std::to_string(floats_expected) + ")";
            return res;
        }
    }
    res.detail = "prox/round " + std::to_string(want_prox) + ", floats/client/round " +
                 std::to_string(want_floats);
    return res;
}

std::vector<ProbeResult> run_probes(const Trajectory& traj) {
    std::vector<ProbeResult> out;
    for (const auto& name : traj.cfg.probes) {
        if (name == "descent") out.push_back(descent_probe(traj));
        else if (name == "sublinear") out.push_back(sublinear_check(traj));
        else if (name == "linear_rate") out.push_back(linear_rate_check(traj));
        else if (name == "accounting") out.push_back(accounting_check(traj));
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "round,phi,prox_grad_norm_sq,test_acc,epsilon_t,prox_cum,floats_cum,wall_ms\n";
    for (const auto& r : traj.records) {
        out += std::to_string(r.t);
        out += ',';
        out += format_double(r.phi);
        out += ',';
        out += format_double(r.prox_grad_norm_sq);
        out += ',';
        if (r.test_acc) out += format_double(*r.test_acc);
        out += ',';
        out += format_double(r.epsilon);
        out += ',';
        out += std::to_string(r.prox_cum);
        out += ',';
        out += std::to_string(r.floats_cum);
        out += ',';
        out += format_double(r.wall_ms);
        out += '\n';
    }
    return out;
}

}  // namespace fedcanon
