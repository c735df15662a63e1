// Python bindings for the main operations: regularizers and their prox maps,
// the LIBSVM parser, data partitioning, step-size validation, and the
// experiment runner (JSON config in, CSV/JSON out).

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fedcanon/config.hpp"
#include "fedcanon/dataset.hpp"
#include "fedcanon/errors.hpp"
#include "fedcanon/fedalgos.hpp"
#include "fedcanon/harness.hpp"
#include "fedcanon/partitioning.hpp"
#include "fedcanon/regularizers.hpp"

namespace py = pybind11;
using namespace fedcanon;

namespace {

Regularizer make_regularizer(const std::string& variant, double kappa, double gamma, double a,
                             double lo, double hi) {
    Regularizer r;
    r.kind = reg_kind_from_string(variant);
    r.kappa = r.kind == RegKind::Box ? 1.0 : kappa;
    r.gamma = gamma;
    r.a = a;
    r.lo = lo;
    r.hi = hi;
    r.validate();
    return r;
}

py::dict dataset_to_dict(const Dataset& ds) {
    py::list rows;
    for (const auto& row : ds.rows) {
        py::list entries;
        for (const auto& f : row) entries.append(py::make_tuple(f.index, f.value));
        rows.append(entries);
    }
    py::dict d;
    d["rows"] = rows;
    d["labels"] = ds.labels;
    d["dim"] = ds.dim;
    d["num_classes"] = ds.num_classes;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Composite federated optimization core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<DivergedError>(m, "DivergedError", PyExc_RuntimeError);

    py::class_<Regularizer>(m, "Regularizer")
        .def(py::init(&make_regularizer), py::arg("variant"), py::arg("kappa") = 0.0,
             py::arg("gamma") = 2.0, py::arg("a") = 3.7, py::arg("lo") = -1.0,
             py::arg("hi") = 1.0)
        .def_property_readonly("variant",
                               [](const Regularizer& r) { return to_string(r.kind); })
        .def_readonly("kappa", &Regularizer::kappa)
        .def("rho", &Regularizer::rho)
        .def("value", [](const Regularizer& r, const Vec& z) { return r.value(z); })
        .def("value_scalar", &Regularizer::value_scalar)
        .def("prox",
             [](const Regularizer& r, double alpha, const Vec& y) { return r.prox(alpha, y); })
        .def("prox_scalar",
             [](const Regularizer& r, double alpha, double y) {
                 r.require_prox_step(alpha);
                 return r.prox_scalar(alpha, y);
             })
        .def("subgrad_bound_sq", [](const Regularizer& r, int d) { return r.subgrad_bound_sq(d); });

    m.def("prox_oracle_scalar", &prox_oracle_scalar, py::arg("reg"), py::arg("alpha"),
          py::arg("y"));

    m.def(
        "parse_libsvm",
        [](const std::string& text, std::optional<int> dim) {
            return dataset_to_dict(parse_libsvm(text, dim));
        },
        py::arg("text"), py::arg("dim") = std::nullopt);

    m.def(
        "partition",
        [](const std::string& libsvm_text, const std::string& mode, double eta, int n_clients,
           std::uint64_t seed) {
            const Dataset ds = parse_libsvm(libsvm_text);
            PartitionSpec spec;
            spec.mode = mode == "dirichlet" ? PartitionSpec::Mode::Dirichlet
                                            : PartitionSpec::Mode::Iid;
            spec.eta = eta;
            spec.n_clients = n_clients;
            spec.seed = seed;
            std::vector<std::vector<int>> out;
            for (const auto& s : partition(ds, spec)) out.push_back(s.indices);
            return out;
        },
        py::arg("libsvm_text"), py::arg("mode") = "iid", py::arg("eta") = 1.0,
        py::arg("n_clients") = 1, py::arg("seed") = 0);

    m.def(
        "prox_gradient_norm_sq",
        [](const Vec& z, double alpha, const Vec& grad, const Regularizer& reg) {
            return prox_gradient_norm_sq(z, alpha, grad, reg);
        },
        py::arg("z"), py::arg("alpha"), py::arg("grad"), py::arg("reg"));

    m.def(
        "validate_stepsizes",
        [](double alpha, double beta, int K, double L, double rho, std::optional<double> mu) {
            const auto rep = validate_stepsizes(alpha, beta, K, L, rho, mu);
            py::list checks;
            for (const auto& c : rep.checks) {
                py::dict d;
                d["name"] = c.name;
                d["expr"] = c.expr;
                d["lhs"] = c.lhs;
                d["rhs"] = c.rhs;
                d["pass"] = c.pass;
                checks.append(d);
            }
            py::dict out;
            out["delta"] = rep.delta;
            out["checks"] = checks;
            out["all_pass"] = rep.all_pass;
            return out;
        },
        py::arg("alpha"), py::arg("beta"), py::arg("K"), py::arg("L"), py::arg("rho"),
        py::arg("mu") = std::nullopt);

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            Json j;
            try {
                j = Json::parse(config_json);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config is not valid JSON: ") + e.what());
            }
            const auto cfg = config_from_json(j);
            const auto traj = run_experiment(cfg);
            const auto probes = run_probes(traj);
            py::dict out;
            out["csv"] = trajectory_csv(traj);
            py::list pr;
            for (const auto& p : probes) {
                py::dict d;
                d["name"] = p.name;
                d["pass"] = p.pass;
                d["detail"] = p.detail;
                pr.append(d);
            }
            out["probes"] = pr;
            py::dict fin;
            const auto& last = traj.records.back();
            fin["phi"] = last.phi;
            fin["prox_grad_norm_sq"] = last.prox_grad_norm_sq;
            if (last.test_acc) fin["test_acc"] = *last.test_acc;
            fin["prox_cum"] = last.prox_cum;
            fin["floats_cum"] = last.floats_cum;
            out["final"] = fin;
            out["resolved_config"] = config_to_json(cfg).dump();
            return out;
        },
        py::arg("config_json"));
}
