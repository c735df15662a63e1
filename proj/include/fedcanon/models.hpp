#pragma once

#include <span>
#include <string>
#include <vector>

#include "fedcanon/dataset.hpp"
#include "fedcanon/rng.hpp"
#include "fedcanon/vec.hpp"

namespace fedcanon {

enum class ModelKind { LeastSquares, Logistic, Mlp };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

// Differentiable loss over sparse rows. Parameter dimension d depends on the
// variant:
//   least_squares : d = feature_dim, loss (w.x - label)^2 / 2, binary labels
//   logistic      : binary sigmoid cross-entropy (d = feature_dim) when
//                   num_classes == 2, softmax cross-entropy with a C x feature
//                   weight matrix (d = C * feature_dim) otherwise
//   mlp           : tanh hidden layers + softmax cross-entropy output; tanh is
//                   the fixed activation so the loss stays L-smooth
struct ModelSpec {
    ModelKind kind = ModelKind::Logistic;
    int feature_dim = 0;
    int num_classes = 2;
    std::vector<int> hidden;  // mlp only

    int param_dim() const;
    void validate() const;
};

// Average loss over the given sample indices.
double model_loss(const ModelSpec& m, const Dataset& ds, std::span<const int> idx,
                  std::span<const double> params);

// Average gradient over the given sample indices (exact for that subset).
void model_grad(const ModelSpec& m, const Dataset& ds, std::span<const int> idx,
                std::span<const double> params, std::span<double> grad_out);

double full_loss(const ModelSpec& m, const Dataset& ds, const Shard& shard,
                 std::span<const double> params);
Vec full_grad(const ModelSpec& m, const Dataset& ds, const Shard& shard,
              std::span<const double> params);

enum class SampleMode { WithReplacement, Exhaustive };

// Mini-batch gradient: B samples drawn from the shard with replacement
// (unbiased for full_grad). Exhaustive mode requires B == shard size and
// reproduces full_grad exactly.
Vec stochastic_grad(const ModelSpec& m, const Dataset& ds, const Shard& shard,
                    std::span<const double> params, int batch, Rng& rng,
                    SampleMode mode = SampleMode::WithReplacement);

int predict(const ModelSpec& m, const Dataset& ds, int row, std::span<const double> params);
double accuracy(const ModelSpec& m, const Dataset& ds, std::span<const double> params);

enum class LMethod { Analytic, PowerIteration, Empirical };

struct SmoothnessEstimate {
    double L = 0.0;
    LMethod method = LMethod::Analytic;
};

// Smoothness constant of the average loss over `idx` (whole dataset when
// empty). Least squares / logistic use the top eigenvalue of the averaged Gram
// matrix via power iteration (tolerance 1e-8, at most 1e4 steps); the mlp value
// is an empirical max curvature ratio and is flagged as such.
SmoothnessEstimate estimate_L(const ModelSpec& m, const Dataset& ds,
                              std::span<const int> idx = {});

// Top eigenvalue of (1/|idx|) sum x x^T over sparse rows.
double gram_top_eigenvalue(const Dataset& ds, std::span<const int> idx, double tol = 1e-8,
                           int max_iter = 10000);

}  // namespace fedcanon
