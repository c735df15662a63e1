#pragma once

#include <memory>
#include <optional>
#include <span>

#include "fedcanon/dataset.hpp"
#include "fedcanon/models.hpp"
#include "fedcanon/partitioning.hpp"
#include "fedcanon/regularizers.hpp"
#include "fedcanon/rng.hpp"
#include "fedcanon/vec.hpp"

namespace fedcanon {

// A federated objective f = (1/N) sum f_i with per-client gradient oracles.
// Clients are weighted uniformly regardless of sample counts. Immutable after
// construction; all oracles are pure functions of (params, client, rng).
class FedProblem {
public:
    virtual ~FedProblem() = default;

    virtual int dim() const = 0;
    virtual int num_clients() const = 0;
    virtual int client_samples(int client) const = 0;

    virtual double client_loss(int client, std::span<const double> x) const = 0;
    virtual void client_grad(int client, std::span<const double> x,
                             std::span<double> out) const = 0;
    virtual void client_stoch_grad(int client, std::span<const double> x, int batch, Rng& rng,
                                   std::span<double> out) const = 0;

    // Smoothness constant valid for every client loss.
    virtual double smoothness() const = 0;
    // Strong-convexity / PL constant of f when known.
    virtual std::optional<double> strong_convexity() const { return std::nullopt; }
    // Minimizer and optimal value of the smooth part, when known in closed form.
    virtual std::optional<Vec> smooth_minimizer() const { return std::nullopt; }
    virtual std::optional<double> smooth_optimum() const { return std::nullopt; }
    virtual std::optional<double> test_accuracy(std::span<const double> /*x*/) const {
        return std::nullopt;
    }
    virtual std::uint64_t partition_hash() const { return 0; }

    double f(std::span<const double> x) const;
    Vec grad_f(std::span<const double> x) const;
};

// f(x) + h(x) with f the uniform client average.
double objective_phi(const FedProblem& p, std::span<const double> x, const Regularizer& reg);

// Client quadratics f_i(x) = 1/2 (x - theta_i)' D_i (x - theta_i) with diagonal
// curvature matrices. The average Hessian has spectrum inside [mu, L] with both
// endpoints attained, and every client entry lies in [mu, L] so L bounds each
// client's smoothness.
class QuadraticProblem final : public FedProblem {
public:
    QuadraticProblem(std::vector<Vec> curvature, std::vector<Vec> minimizers);

    int dim() const override { return static_cast<int>(theta_[0].size()); }
    int num_clients() const override { return static_cast<int>(theta_.size()); }
    int client_samples(int) const override { return 1; }

    double client_loss(int client, std::span<const double> x) const override;
    void client_grad(int client, std::span<const double> x, std::span<double> out) const override;
    // Exact gradients; the quadratic path realizes sigma = 0.
    void client_stoch_grad(int client, std::span<const double> x, int, Rng&,
                           std::span<double> out) const override {
        client_grad(client, x, out);
    }

    double smoothness() const override { return L_; }
    std::optional<double> strong_convexity() const override { return mu_; }
    std::optional<Vec> smooth_minimizer() const override { return zstar_; }
    std::optional<double> smooth_optimum() const override { return fstar_; }

    const Vec& curvature(int client) const { return curv_[client]; }
    const Vec& minimizer(int client) const { return theta_[client]; }

private:
    std::vector<Vec> curv_, theta_;
    double L_ = 0.0, mu_ = 0.0, fstar_ = 0.0;
    Vec zstar_;
};

// Random quadratic instance: condition_number = L/mu with mu = 1, distinct
// client minimizers in [-theta_scale, theta_scale], and optional per-client
// curvature spread (0 = shared curvature).
std::unique_ptr<QuadraticProblem> synth_quadratic(int d, int n_clients, double condition_number,
                                                  std::uint64_t seed,
                                                  double curvature_spread = 0.5,
                                                  double theta_scale = 1.0);

// Gaussian-blob classification data for desk-scale multiclass experiments.
// center_spread grades the class-center norms from easy to hard classes and
// class_ratio < 1 makes class frequencies geometric; both default to the
// symmetric balanced case.
struct BlobsSpec {
    int features = 20;
    int classes = 10;
    int train_samples = 2000;
    int test_samples = 500;
    double center_scale = 1.0;
    double noise = 0.5;
    double center_spread = 0.0;
    double class_ratio = 1.0;
    std::uint64_t seed = 0;
};
Dataset synth_blobs(const BlobsSpec& spec, bool test_split = false);

// Dataset + model + shards. L is max over per-shard smoothness estimates so it
// bounds each f_i.
class DatasetProblem final : public FedProblem {
public:
    DatasetProblem(Dataset train, std::optional<Dataset> test, ModelSpec model,
                   std::vector<Shard> shards);

    int dim() const override { return model_.param_dim(); }
    int num_clients() const override { return static_cast<int>(shards_.size()); }
    int client_samples(int client) const override { return shards_[client].size(); }

    double client_loss(int client, std::span<const double> x) const override;
    void client_grad(int client, std::span<const double> x, std::span<double> out) const override;
    void client_stoch_grad(int client, std::span<const double> x, int batch, Rng& rng,
                           std::span<double> out) const override;

    double smoothness() const override { return L_; }
    std::optional<double> test_accuracy(std::span<const double> x) const override;
    std::uint64_t partition_hash() const override { return hash_; }

    const Dataset& train() const { return train_; }
    const ModelSpec& model() const { return model_; }
    const std::vector<Shard>& shards() const { return shards_; }

private:
    Dataset train_;
    std::optional<Dataset> test_;
    ModelSpec model_;
    std::vector<Shard> shards_;
    double L_ = 0.0;
    std::uint64_t hash_ = 0;
};

}  // namespace fedcanon
