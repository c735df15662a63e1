#include "fedcanon/config.hpp"

#include <fstream>
#include <set>

#include "fedcanon/errors.hpp"

namespace fedcanon {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

Regularizer reg_from_json(const Json& j) {
    reject_unknown(j, {"variant", "kappa", "gamma", "a", "lo", "hi"}, "regularizer");
    Regularizer r;
    r.kind = reg_kind_from_string(get_or<std::string>(j, "variant", "zero"));
    r.kappa = get_or<double>(j, "kappa", r.kind == RegKind::Box ? 1.0 : 0.0);
    r.gamma = get_or<double>(j, "gamma", 2.0);
    r.a = get_or<double>(j, "a", 3.7);
    r.lo = get_or<double>(j, "lo", -1.0);
    r.hi = get_or<double>(j, "hi", 1.0);
    r.validate();
    return r;
}

PartitionSpec partition_from_json(const Json& j) {
    reject_unknown(j, {"mode", "eta", "n_clients", "seed"}, "partition");
    PartitionSpec p;
    const auto mode = get_or<std::string>(j, "mode", "iid");
    if (mode == "iid")
        p.mode = PartitionSpec::Mode::Iid;
    else if (mode == "dirichlet")
        p.mode = PartitionSpec::Mode::Dirichlet;
    else
        throw ConfigError("unknown partition mode '" + mode + "'");
    p.eta = get_or<double>(j, "eta", 1.0);
    p.n_clients = get_or<int>(j, "n_clients", 1);
    p.seed = get_or<std::uint64_t>(j, "seed", 0);
    p.validate();
    return p;
}

ProblemConfig problem_from_json(const Json& j) {
    ProblemConfig p;
    const auto type = get_or<std::string>(j, "type", "quadratic");
    if (type == "quadratic") {
        reject_unknown(j,
                       {"type", "d", "condition_number", "curvature_spread", "theta_scale",
                        "curvature", "theta"},
                       "problem");
        p.type = ProblemConfig::Type::Quadratic;
        p.d = get_or<int>(j, "d", 10);
        p.condition_number = get_or<double>(j, "condition_number", 10.0);
        p.curvature_spread = get_or<double>(j, "curvature_spread", 0.5);
        p.theta_scale = get_or<double>(j, "theta_scale", 1.0);
        p.curvature = get_or<std::vector<Vec>>(j, "curvature", {});
        p.theta = get_or<std::vector<Vec>>(j, "theta", {});
        if (p.curvature.size() != p.theta.size())
            throw ConfigError("explicit quadratic needs matching curvature/theta lists");
        if (!p.theta.empty()) p.d = static_cast<int>(p.theta[0].size());
    } else if (type == "blobs") {
        reject_unknown(j,
                       {"type", "features", "classes", "train_samples", "test_samples",
                        "center_scale", "noise", "center_spread", "class_ratio", "model",
                        "hidden"},
                       "problem");
        p.type = ProblemConfig::Type::Blobs;
        p.blobs.features = get_or<int>(j, "features", 20);
        p.blobs.classes = get_or<int>(j, "classes", 10);
        p.blobs.train_samples = get_or<int>(j, "train_samples", 2000);
        p.blobs.test_samples = get_or<int>(j, "test_samples", 500);
        p.blobs.center_scale = get_or<double>(j, "center_scale", 1.0);
        p.blobs.noise = get_or<double>(j, "noise", 0.5);
        p.blobs.center_spread = get_or<double>(j, "center_spread", 0.0);
        p.blobs.class_ratio = get_or<double>(j, "class_ratio", 1.0);
        p.model = model_kind_from_string(get_or<std::string>(j, "model", "logistic"));
        p.hidden = get_or<std::vector<int>>(j, "hidden", {});
    } else if (type == "libsvm") {
        reject_unknown(j, {"type", "train", "test", "dim", "model", "hidden"}, "problem");
        p.type = ProblemConfig::Type::Libsvm;
        p.train_path = get_or<std::string>(j, "train", "");
        p.test_path = get_or<std::string>(j, "test", "");
        if (p.train_path.empty()) throw ConfigError("libsvm problem needs a 'train' path");
        if (j.contains("dim")) p.dim_override = j.at("dim").get<int>();
        p.model = model_kind_from_string(get_or<std::string>(j, "model", "logistic"));
        p.hidden = get_or<std::vector<int>>(j, "hidden", {});
    } else {
        throw ConfigError("unknown problem type '" + type + "'");
    }
    return p;
}

}  // namespace

ExperimentConfig config_from_json(const Json& root) {
    const Json& j = root.contains("config") ? root.at("config") : root;
    reject_unknown(j,
                   {"seed", "algorithm", "alpha", "beta", "K", "T", "B", "p", "grad_mode",
                    "problem", "partition", "regularizer", "probes", "z0", "z0_fill", "threads",
                    "record_wall_ms"},
                   "config");
    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    cfg.algorithm = algorithm_from_string(get_or<std::string>(j, "algorithm", "fedcanon"));
    cfg.alpha = get_or<double>(j, "alpha", 0.1);
    cfg.beta = get_or<double>(j, "beta", 0.01);
    cfg.K = get_or<int>(j, "K", 1);
    cfg.T = get_or<int>(j, "T", 10);
    cfg.B = get_or<int>(j, "B", 1);
    cfg.p = get_or<double>(j, "p", 0.5);
    const auto mode = get_or<std::string>(j, "grad_mode", "exact");
    if (mode == "exact")
        cfg.grad_mode = GradMode::Exact;
    else if (mode == "minibatch")
        cfg.grad_mode = GradMode::Minibatch;
    else
        throw ConfigError("unknown grad_mode '" + mode + "'");
    if (j.contains("problem")) cfg.problem = problem_from_json(j.at("problem"));
    if (j.contains("partition")) cfg.partition = partition_from_json(j.at("partition"));
    if (j.contains("regularizer")) cfg.reg = reg_from_json(j.at("regularizer"));
    if (j.contains("probes"))
        for (const auto& p : j.at("probes")) cfg.probes.insert(p.get<std::string>());
    if (j.contains("z0")) {
        if (j.at("z0").is_array())
            cfg.z0 = j.at("z0").get<Vec>();
        else
            cfg.z0_fill = j.at("z0").get<double>();
    }
    cfg.z0_fill = get_or<double>(j, "z0_fill", cfg.z0_fill);
    cfg.threads = get_or<int>(j, "threads", 1);
    cfg.record_wall_ms = get_or<bool>(j, "record_wall_ms", false);
    cfg.validate();
    return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return config_from_json(j);
}

Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["seed"] = cfg.seed;
    j["algorithm"] = to_string(cfg.algorithm);
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["K"] = cfg.K;
    j["T"] = cfg.T;
    j["B"] = cfg.B;
    j["p"] = cfg.p;
    j["grad_mode"] = cfg.grad_mode == GradMode::Exact ? "exact" : "minibatch";

    Json pj;
    switch (cfg.problem.type) {
        case ProblemConfig::Type::Quadratic:
            pj["type"] = "quadratic";
            pj["d"] = cfg.problem.d;
            if (!cfg.problem.theta.empty()) {
                pj["curvature"] = cfg.problem.curvature;
                pj["theta"] = cfg.problem.theta;
            } else {
                pj["condition_number"] = cfg.problem.condition_number;
                pj["curvature_spread"] = cfg.problem.curvature_spread;
                pj["theta_scale"] = cfg.problem.theta_scale;
            }
            break;
        case ProblemConfig::Type::Blobs:
            pj["type"] = "blobs";
            pj["features"] = cfg.problem.blobs.features;
            pj["classes"] = cfg.problem.blobs.classes;
            pj["train_samples"] = cfg.problem.blobs.train_samples;
            pj["test_samples"] = cfg.problem.blobs.test_samples;
            pj["center_scale"] = cfg.problem.blobs.center_scale;
            pj["noise"] = cfg.problem.blobs.noise;
            pj["center_spread"] = cfg.problem.blobs.center_spread;
            pj["class_ratio"] = cfg.problem.blobs.class_ratio;
            pj["model"] = to_string(cfg.problem.model);
            pj["hidden"] = cfg.problem.hidden;
            break;
        case ProblemConfig::Type::Libsvm:
            pj["type"] = "libsvm";
            pj["train"] = cfg.problem.train_path;
            if (!cfg.problem.test_path.empty()) pj["test"] = cfg.problem.test_path;
            if (cfg.problem.dim_override) pj["dim"] = *cfg.problem.dim_override;
            pj["model"] = to_string(cfg.problem.model);
            pj["hidden"] = cfg.problem.hidden;
            break;
    }
    j["problem"] = pj;

    Json qj;
    qj["mode"] = cfg.partition.mode == PartitionSpec::Mode::Iid ? "iid" : "dirichlet";
    qj["eta"] = cfg.partition.eta;
    qj["n_clients"] = cfg.partition.n_clients;
    qj["seed"] = cfg.partition.seed;
    j["partition"] = qj;

    Json rj;
    rj["variant"] = to_string(cfg.reg.kind);
    rj["kappa"] = cfg.reg.kappa;
    if (cfg.reg.kind == RegKind::Mcp) rj["gamma"] = cfg.reg.gamma;
    if (cfg.reg.kind == RegKind::Scad) rj["a"] = cfg.reg.a;
    if (cfg.reg.kind == RegKind::Box) {
        rj["lo"] = cfg.reg.lo;
        rj["hi"] = cfg.reg.hi;
    }
    j["regularizer"] = rj;

    j["probes"] = cfg.probes;
    if (!cfg.z0.empty())
        j["z0"] = cfg.z0;
    else
        j["z0_fill"] = cfg.z0_fill;
    j["threads"] = cfg.threads;
    j["record_wall_ms"] = cfg.record_wall_ms;
    return j;
}

void apply_override(Json& j, const std::string& keyval) {
    const auto eq = keyval.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key.path=value, got '" + keyval + "'");
    const std::string path = keyval.substr(0, eq);
    const std::string raw = keyval.substr(eq + 1);

    Json value;
    try {
        value = Json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;  // plain string value
    }

    Json* node = j.contains("config") ? &j.at("config") : &j;
    std::size_t pos = 0;
    while (true) {
        const auto dotpos = path.find('.', pos);
        const std::string key = path.substr(pos, dotpos - pos);
        if (key.empty()) throw ConfigError("bad override path '" + path + "'");
        if (dotpos == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        pos = dotpos + 1;
    }
}

}  // namespace fedcanon
