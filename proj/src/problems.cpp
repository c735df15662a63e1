#include "fedcanon/problems.hpp"

#include <algorithm>
#include <cmath>

#include "fedcanon/errors.hpp"

namespace fedcanon {

double FedProblem::f(std::span<const double> x) const {
    double s = 0.0;
    for (int i = 0; i < num_clients(); ++i) s += client_loss(i, x);
    return s / static_cast<double>(num_clients());
}

Vec FedProblem::grad_f(std::span<const double> x) const {
    Vec g(x.size(), 0.0), gi(x.size());
    for (int i = 0; i < num_clients(); ++i) {
        client_grad(i, x, gi);
        axpy(1.0, gi, g);
    }
    scale(g, 1.0 / static_cast<double>(num_clients()));
    return g;
}

double objective_phi(const FedProblem& p, std::span<const double> x, const Regularizer& reg) {
    return p.f(x) + reg.value(x);
}

QuadraticProblem::QuadraticProblem(std::vector<Vec> curvature, std::vector<Vec> minimizers)
    : curv_(std::move(curvature)), theta_(std::move(minimizers)) {
    if (curv_.empty() || curv_.size() != theta_.size())
        throw ConfigError("quadratic problem needs matching curvature/minimizer lists");
    const int d = static_cast<int>(theta_[0].size());
    const int n = static_cast<int>(theta_.size());
    Vec avg(d, 0.0);
    L_ = 0.0;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(curv_[i].size()) != d || static_cast<int>(theta_[i].size()) != d)
            throw ConfigError("quadratic client dimension mismatch");
        for (int j = 0; j < d; ++j) {
            if (curv_[i][j] <= 0.0) throw ConfigError("quadratic curvature must be positive");
            avg[j] += curv_[i][j];
            L_ = std::max(L_, curv_[i][j]);
        }
    }
    for (auto& v : avg) v /= static_cast<double>(n);
    mu_ = *std::min_element(avg.begin(), avg.end());

    // z* minimizes the average: per coordinate, the curvature-weighted mean of
    // the client minimizers.
    zstar_.assign(d, 0.0);
    for (int j = 0; j < d; ++j) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            num += curv_[i][j] * theta_[i][j];
            den += curv_[i][j];
        }
        zstar_[j] = num / den;
    }
    fstar_ = 0.0;
    for (int i = 0; i < n; ++i) fstar_ += client_loss(i, zstar_);
    fstar_ /= static_cast<double>(n);
}

double QuadraticProblem::client_loss(int client, std::span<const double> x) const {
    const auto& D = curv_[client];
    const auto& th = theta_[client];
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double r = x[j] - th[j];
        s += D[j] * r * r;
    }
    return 0.5 * s;
}

void QuadraticProblem::client_grad(int client, std::span<const double> x,
                                   std::span<double> out) const {
    const auto& D = curv_[client];
    const auto& th = theta_[client];
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = D[j] * (x[j] - th[j]);
}

std::unique_ptr<QuadraticProblem> synth_quadratic(int d, int n_clients, double condition_number,
                                                  std::uint64_t seed, double curvature_spread,
                                                  double theta_scale) {
    if (d < 1 || n_clients < 1) throw ConfigError("synth_quadratic needs d >= 1, N >= 1");
    if (condition_number < 1.0) throw ConfigError("condition_number must be >= 1");
    if (curvature_spread < 0.0 || curvature_spread >= 1.0)
        throw ConfigError("curvature_spread must be in [0, 1)");

    Rng rng(derive_seed(seed, StreamKind::Problem));
    const double mu = 1.0;
    const double L = d == 1 ? 1.0 : condition_number;  // a 1-dim spectrum cannot spread

    // Target spectrum of the average Hessian, endpoints pinned.
    Vec target(d);
    target[0] = L;
    if (d > 1) target[d - 1] = mu;
    for (int j = 1; j + 1 < d; ++j) target[j] = rng.uniform(mu, L);

    std::vector<Vec> curv(n_clients, Vec(d)), theta(n_clients, Vec(d));
    for (int j = 0; j < d; ++j) {
        // Zero-mean offsets keep the per-coordinate client mean exactly on
        // target while each entry stays inside [mu, L].
        Vec u(n_clients);
        double mean = 0.0;
        for (auto& v : u) {
            v = rng.uniform(-1.0, 1.0);
            mean += v;
        }
        mean /= static_cast<double>(n_clients);
        const double room = std::min(target[j] - mu, L - target[j]);
        for (int i = 0; i < n_clients; ++i)
            curv[i][j] = target[j] + curvature_spread * 0.5 * room * (u[i] - mean);
    }
    for (int i = 0; i < n_clients; ++i)
        for (int j = 0; j < d; ++j) theta[i][j] = rng.uniform(-theta_scale, theta_scale);

    return std::make_unique<QuadraticProblem>(std::move(curv), std::move(theta));
}

Dataset synth_blobs(const BlobsSpec& spec, bool test_split) {
    if (spec.features < 1 || spec.classes < 2) throw ConfigError("blobs need features>=1, classes>=2");
    if (!(spec.class_ratio > 0.0)) throw ConfigError("blobs class_ratio must be > 0");
    const int n = test_split ? spec.test_samples : spec.train_samples;
    if (n < spec.classes) throw ConfigError("blobs need at least one sample per class");

    // Shared centers; the split only changes the sample stream.
    Rng centers_rng(derive_seed(spec.seed, StreamKind::Problem, 0));
    std::vector<Vec> centers(spec.classes, Vec(spec.features));
    for (int c = 0; c < spec.classes; ++c) {
        const double frac = spec.classes == 1 ? 0.0 : static_cast<double>(c) / (spec.classes - 1);
        const double scale = spec.center_scale * (1.0 + spec.center_spread * (frac - 0.5));
        for (auto& v : centers[c]) v = centers_rng.normal(0.0, scale);
    }

    // Geometric class shares on the train split, at least one sample per
    // class; evaluation is balanced so minority-class damage shows up.
    std::vector<int> counts(spec.classes, 1);
    {
        const double ratio = test_split ? 1.0 : spec.class_ratio;
        std::vector<double> share(spec.classes);
        double total = 0.0;
        for (int c = 0; c < spec.classes; ++c) {
            share[c] = std::pow(ratio, c);
            total += share[c];
        }
        int assigned = spec.classes;
        for (int c = 0; c < spec.classes && assigned < n; ++c) {
            const int extra = std::min(n - assigned,
                                       static_cast<int>(share[c] / total * (n - spec.classes)));
            counts[c] += extra;
            assigned += extra;
        }
        for (int c = 0; assigned < n; c = (c + 1) % spec.classes) {
            ++counts[c];
            ++assigned;
        }
    }

    Rng rng(derive_seed(spec.seed, StreamKind::Problem, test_split ? 2 : 1));
    Dataset ds;
    ds.dim = spec.features;
    ds.num_classes = spec.classes;
    int label = 0, used = 0;
    for (int j = 0; j < n; ++j) {
        while (used >= counts[label]) {  // advance to the next class with quota left
            ++label;
            used = 0;
        }
        ++used;
        SparseRow row;
        row.reserve(spec.features);
        for (int k = 0; k < spec.features; ++k)
            row.push_back({k, centers[label][k] + rng.normal(0.0, spec.noise)});
        ds.rows.push_back(std::move(row));
        ds.labels.push_back(label);
    }
    return ds;
}

DatasetProblem::DatasetProblem(Dataset train, std::optional<Dataset> test, ModelSpec model,
                               std::vector<Shard> shards)
    : train_(std::move(train)), test_(std::move(test)), model_(model), shards_(std::move(shards)) {
    model_.validate();
    if (model_.feature_dim != train_.dim)
        throw ConfigError("model feature_dim does not match dataset dim");
    if (shards_.empty()) throw ConfigError("dataset problem needs at least one shard");
    for (const auto& s : shards_)
        if (s.indices.empty()) throw ConfigError("empty shard");
    hash_ = shard_hash(shards_);
    // Assumption-level smoothness: bound every client's loss, not the pooled one.
    L_ = 0.0;
    for (const auto& s : shards_) L_ = std::max(L_, estimate_L(model_, train_, s.indices).L);
}

double DatasetProblem::client_loss(int client, std::span<const double> x) const {
    return full_loss(model_, train_, shards_[client], x);
}

void DatasetProblem::client_grad(int client, std::span<const double> x,
                                 std::span<double> out) const {
    model_grad(model_, train_, shards_[client].indices, x, out);
}

void DatasetProblem::client_stoch_grad(int client, std::span<const double> x, int batch, Rng& rng,
                                       std::span<double> out) const {
    const int mi = shards_[client].size();
    const int b = std::min(batch, mi);
    Vec g = stochastic_grad(model_, train_, shards_[client], x, b, rng);
    std::copy(g.begin(), g.end(), out.begin());
}

std::optional<double> DatasetProblem::test_accuracy(std::span<const double> x) const {
    if (!test_) return std::nullopt;
    return accuracy(model_, *test_, x);
}

}  // namespace fedcanon
