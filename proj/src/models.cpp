#include "fedcanon/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcanon/errors.hpp"

namespace fedcanon {

namespace {

// Stable binary cross-entropy of logit s against label y in {0,1}.
double binary_ce(double s, int y) {
    const double m = std::max(s, 0.0);
    return m - s * static_cast<double>(y) + std::log1p(std::exp(-std::fabs(s)));
}

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

void softmax_inplace(std::vector<double>& s) {
    const double m = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (auto& v : s) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : s) v /= sum;
}

// MLP layout helpers: layer l maps widths[l] -> widths[l+1], parameters stored
// as [W0, b0, W1, b1, ...] with W row-major (out x in).
struct MlpLayout {
    std::vector<int> widths;
    std::vector<int> w_off, b_off;
    int total = 0;

    explicit MlpLayout(const ModelSpec& m) {
        widths.push_back(m.feature_dim);
        for (int h : m.hidden) widths.push_back(h);
        widths.push_back(m.num_classes);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            w_off.push_back(total);
            total += widths[l] * widths[l + 1];
            b_off.push_back(total);
            total += widths[l + 1];
        }
    }
    int layers() const { return static_cast<int>(widths.size()) - 1; }
};

void densify(const SparseRow& row, std::vector<double>& x) {
    std::fill(x.begin(), x.end(), 0.0);
    for (const auto& f : row) x[f.index] = f.value;
}

// Forward pass storing post-activation values per layer; returns class probabilities.
std::vector<std::vector<double>> mlp_forward(const MlpLayout& lay, std::span<const double> p,
                                             const std::vector<double>& x) {
    std::vector<std::vector<double>> act(lay.layers() + 1);
    act[0] = x;
    for (int l = 0; l < lay.layers(); ++l) {
        const int in = lay.widths[l], out = lay.widths[l + 1];
        std::vector<double> z(out);
        const double* W = p.data() + lay.w_off[l];
        const double* b = p.data() + lay.b_off[l];
        for (int o = 0; o < out; ++o) {
            double s = b[o];
            const double* wrow = W + o * in;
            for (int i = 0; i < in; ++i) s += wrow[i] * act[l][i];
            z[o] = s;
        }
        if (l + 1 < lay.layers())
            for (auto& v : z) v = std::tanh(v);
        act[l + 1] = std::move(z);
    }
    softmax_inplace(act.back());
    return act;
}

void mlp_backward(const MlpLayout& lay, std::span<const double> p,
                  const std::vector<std::vector<double>>& act, int label,
                  std::span<double> grad) {
    // act.back() holds probabilities; delta at the output is p - onehot(y).
    std::vector<double> delta = act.back();
    delta[label] -= 1.0;
    for (int l = lay.layers() - 1; l >= 0; --l) {
        const int in = lay.widths[l], out = lay.widths[l + 1];
        const double* W = p.data() + lay.w_off[l];
        double* gW = grad.data() + lay.w_off[l];
        double* gb = grad.data() + lay.b_off[l];
        for (int o = 0; o < out; ++o) {
            gb[o] += delta[o];
            double* grow = gW + o * in;
            for (int i = 0; i < in; ++i) grow[i] += delta[o] * act[l][i];
        }
        if (l == 0) break;
        std::vector<double> prev(in, 0.0);
        for (int o = 0; o < out; ++o) {
            const double* wrow = W + o * in;
            for (int i = 0; i < in; ++i) prev[i] += wrow[i] * delta[o];
        }
        // tanh'(z) = 1 - tanh(z)^2, and act[l] already stores tanh(z).
        for (int i = 0; i < in; ++i) prev[i] *= 1.0 - act[l][i] * act[l][i];
        delta = std::move(prev);
    }
}

double sparse_dot(const SparseRow& row, const double* w) {
    double s = 0.0;
    for (const auto& f : row) s += w[f.index] * f.value;
    return s;
}

}  // namespace

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::LeastSquares: return "least_squares";
        case ModelKind::Logistic: return "logistic";
        case ModelKind::Mlp: return "mlp";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "least_squares" || s == "linear-quadratic" || s == "quadratic")
        return ModelKind::LeastSquares;
    if (s == "logistic") return ModelKind::Logistic;
    if (s == "mlp") return ModelKind::Mlp;
    throw ConfigError("unknown model variant '" + s + "'");
}

int ModelSpec::param_dim() const {
    switch (kind) {
        case ModelKind::LeastSquares: return feature_dim;
        case ModelKind::Logistic:
            return num_classes == 2 ? feature_dim : num_classes * feature_dim;
        case ModelKind::Mlp: return MlpLayout(*this).total;
    }
    return 0;
}

void ModelSpec::validate() const {
    if (feature_dim < 1) throw ConfigError("model feature_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("model num_classes must be >= 2");
    if (kind == ModelKind::LeastSquares && num_classes != 2)
        throw ConfigError("least_squares supports binary labels only");
    for (int h : hidden)
        if (h < 1) throw ConfigError("mlp hidden widths must be >= 1");
}

double model_loss(const ModelSpec& m, const Dataset& ds, std::span<const int> idx,
                  std::span<const double> params) {
    if (idx.empty()) throw ConfigError("loss over empty sample set");
    double total = 0.0;
    switch (m.kind) {
        case ModelKind::LeastSquares:
            for (int j : idx) {
                const double r = sparse_dot(ds.rows[j], params.data()) - ds.labels[j];
                total += 0.5 * r * r;
            }
            break;
        case ModelKind::Logistic:
            if (m.num_classes == 2) {
                for (int j : idx)
                    total += binary_ce(sparse_dot(ds.rows[j], params.data()), ds.labels[j]);
            } else {
                std::vector<double> s(m.num_classes);
                for (int j : idx) {
                    for (int c = 0; c < m.num_classes; ++c)
                        s[c] = sparse_dot(ds.rows[j], params.data() + c * m.feature_dim);
                    const double mx = *std::max_element(s.begin(), s.end());
                    double lse = 0.0;
                    for (double v : s) lse += std::exp(v - mx);
                    total += mx + std::log(lse) - s[ds.labels[j]];
                }
            }
            break;
        case ModelKind::Mlp: {
            MlpLayout lay(m);
            std::vector<double> x(m.feature_dim);
            for (int j : idx) {
                densify(ds.rows[j], x);
                auto act = mlp_forward(lay, params, x);
                total += -std::log(std::max(act.back()[ds.labels[j]], 1e-300));
            }
            break;
        }
    }
    return total / static_cast<double>(idx.size());
}

void model_grad(const ModelSpec& m, const Dataset& ds, std::span<const int> idx,
                std::span<const double> params, std::span<double> grad_out) {
    if (idx.empty()) throw ConfigError("gradient over empty sample set");
    if (static_cast<int>(params.size()) != m.param_dim() ||
        grad_out.size() != params.size())
        throw ConfigError("parameter dimension mismatch");
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    switch (m.kind) {
        case ModelKind::LeastSquares:
            for (int j : idx) {
                const double r = sparse_dot(ds.rows[j], params.data()) - ds.labels[j];
                for (const auto& f : ds.rows[j]) grad_out[f.index] += r * f.value;
            }
            break;
        case ModelKind::Logistic:
            if (m.num_classes == 2) {
                for (int j : idx) {
                    const double r =
                        sigmoid(sparse_dot(ds.rows[j], params.data())) - ds.labels[j];
                    for (const auto& f : ds.rows[j]) grad_out[f.index] += r * f.value;
                }
            } else {
                std::vector<double> s(m.num_classes);
                for (int j : idx) {
                    for (int c = 0; c < m.num_classes; ++c)
                        s[c] = sparse_dot(ds.rows[j], params.data() + c * m.feature_dim);
                    softmax_inplace(s);
                    s[ds.labels[j]] -= 1.0;
                    for (int c = 0; c < m.num_classes; ++c) {
                        double* g = grad_out.data() + c * m.feature_dim;
                        for (const auto& f : ds.rows[j]) g[f.index] += s[c] * f.value;
                    }
                }
            }
            break;
        case ModelKind::Mlp: {
            MlpLayout lay(m);
            std::vector<double> x(m.feature_dim);
            for (int j : idx) {
                densify(ds.rows[j], x);
                auto act = mlp_forward(lay, params, x);
                mlp_backward(lay, params, act, ds.labels[j], grad_out);
            }
            break;
        }
    }
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (auto& g : grad_out) g *= inv;
}

double full_loss(const ModelSpec& m, const Dataset& ds, const Shard& shard,
                 std::span<const double> params) {
    return model_loss(m, ds, shard.indices, params);
}

Vec full_grad(const ModelSpec& m, const Dataset& ds, const Shard& shard,
              std::span<const double> params) {
    Vec g(params.size());
    model_grad(m, ds, shard.indices, params, g);
    return g;
}

Vec stochastic_grad(const ModelSpec& m, const Dataset& ds, const Shard& shard,
                    std::span<const double> params, int batch, Rng& rng, SampleMode mode) {
    const int mi = shard.size();
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (batch > mi) throw ConfigError("batch size exceeds shard size");
    if (mode == SampleMode::Exhaustive) {
        if (batch != mi) throw ConfigError("exhaustive sampling requires batch == shard size");
        return full_grad(m, ds, shard, params);
    }
    std::vector<int> picks(batch);
    for (int b = 0; b < batch; ++b) picks[b] = shard.indices[rng.uniform_int(0, mi - 1)];
    Vec g(params.size());
    model_grad(m, ds, picks, params, g);
    return g;
}

int predict(const ModelSpec& m, const Dataset& ds, int row, std::span<const double> params) {
    switch (m.kind) {
        case ModelKind::LeastSquares:
            return sparse_dot(ds.rows[row], params.data()) > 0.5 ? 1 : 0;
        case ModelKind::Logistic:
            if (m.num_classes == 2)
                return sparse_dot(ds.rows[row], params.data()) > 0.0 ? 1 : 0;
            else {
                int best = 0;
                double best_s = -1e300;
                for (int c = 0; c < m.num_classes; ++c) {
                    const double s = sparse_dot(ds.rows[row], params.data() + c * m.feature_dim);
                    if (s > best_s) {
                        best_s = s;
                        best = c;
                    }
                }
                return best;
            }
        case ModelKind::Mlp: {
            MlpLayout lay(m);
            std::vector<double> x(m.feature_dim);
            densify(ds.rows[row], x);
            auto act = mlp_forward(lay, params, x);
            return static_cast<int>(std::max_element(act.back().begin(), act.back().end()) -
                                    act.back().begin());
        }
    }
    return 0;
}

double accuracy(const ModelSpec& m, const Dataset& ds, std::span<const double> params) {
    int correct = 0;
    for (int j = 0; j < ds.size(); ++j)
        if (predict(m, ds, j, params) == ds.labels[j]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double gram_top_eigenvalue(const Dataset& ds, std::span<const int> idx, double tol, int max_iter) {
    std::vector<int> all;
    if (idx.empty()) {
        all.resize(ds.size());
        std::iota(all.begin(), all.end(), 0);
        idx = all;
    }
    const int d = ds.dim;
    const double inv = 1.0 / static_cast<double>(idx.size());
    Vec v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    Vec gv(d);
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        std::fill(gv.begin(), gv.end(), 0.0);
        for (int j : idx) {
            const double s = sparse_dot(ds.rows[j], v.data());
            for (const auto& f : ds.rows[j]) gv[f.index] += s * f.value;
        }
        for (auto& g : gv) g *= inv;
        const double next = dot(gv, v);  // Rayleigh quotient with unit v
        const double nrm = norm(gv);
        if (nrm == 0.0) return 0.0;  // all rows orthogonal to v; Gram acts as zero here
        for (int i = 0; i < d; ++i) v[i] = gv[i] / nrm;
        if (std::fabs(next - lambda) <= tol * std::max(1.0, std::fabs(next))) return next;
        lambda = next;
    }
    throw ConfigError("power iteration did not converge within " + std::to_string(max_iter) +
                      " steps");
}

SmoothnessEstimate estimate_L(const ModelSpec& m, const Dataset& ds, std::span<const int> idx) {
    if (ds.size() == 0) throw ConfigError("estimate_L on empty dataset");
    switch (m.kind) {
        case ModelKind::LeastSquares:
            return {gram_top_eigenvalue(ds, idx), LMethod::PowerIteration};
        case ModelKind::Logistic: {
            // Sigmoid curvature is bounded by 1/4; the softmax Jacobian
            // diag(p) - p p^T has top eigenvalue at most 1/2.
            const double factor = m.num_classes == 2 ? 0.25 : 0.5;
            return {factor * gram_top_eigenvalue(ds, idx), LMethod::PowerIteration};
        }
        case ModelKind::Mlp: {
            // No tractable closed form; report the largest curvature ratio
            // across random parameter pairs at init scale.
            std::vector<int> all;
            if (idx.empty()) {
                all.resize(ds.size());
                std::iota(all.begin(), all.end(), 0);
                idx = all;
            }
            const int d = m.param_dim();
            Rng rng(derive_seed(0x5e1fULL, StreamKind::Eval));
            Vec x(d), y(d), gx(d), gy(d);
            double best = 0.0;
            for (int trial = 0; trial < 30; ++trial) {
                for (int i = 0; i < d; ++i) {
                    x[i] = rng.normal(0.0, 0.5);
                    y[i] = x[i] + rng.normal(0.0, 0.1);
                }
                model_grad(m, ds, idx, x, gx);
                model_grad(m, ds, idx, y, gy);
                const double dx = std::sqrt(dist_sq(x, y));
                if (dx > 0.0) best = std::max(best, std::sqrt(dist_sq(gx, gy)) / dx);
            }
            return {best, LMethod::Empirical};
        }
    }
    return {};
}

}  // namespace fedcanon
