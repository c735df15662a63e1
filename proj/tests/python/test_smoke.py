"""Smoke tests for the python bindings: thin checks that the exposed
operations work and stay deterministic; the math is covered by the C++ suites.
"""

import json

import pytest

import fedcanon


BASE_CONFIG = {
    "seed": 11,
    "algorithm": "fedcanon",
    "alpha": 0.05,
    "beta": 0.001,
    "K": 3,
    "T": 15,
    "grad_mode": "exact",
    "problem": {"type": "quadratic", "d": 6, "condition_number": 4.0},
    "partition": {"n_clients": 3},
    "regularizer": {"variant": "l1", "kappa": 0.001},
    "probes": ["descent", "accounting"],
}


def test_soft_threshold_prox():
    reg = fedcanon.Regularizer("l1", kappa=1.0)
    assert reg.prox_scalar(0.5, 2.0) == pytest.approx(1.5)
    assert reg.prox_scalar(0.5, 0.3) == 0.0
    assert reg.prox(0.5, [2.0, -2.0]) == pytest.approx([1.5, -1.5])
    assert reg.rho() == 0.0
    assert fedcanon.Regularizer("mcp", kappa=1.0, gamma=2.0).rho() == pytest.approx(0.5)


def test_prox_matches_oracle():
    reg = fedcanon.Regularizer("scad", kappa=0.8)
    for y in (-3.0, -0.4, 0.0, 1.1, 2.9, 7.0):
        assert reg.prox_scalar(0.6, y) == pytest.approx(
            fedcanon.prox_oracle_scalar(reg, 0.6, y), abs=1e-8
        )


def test_bad_step_raises():
    reg = fedcanon.Regularizer("mcp", kappa=1.0, gamma=2.0)  # rho = 0.5
    with pytest.raises(ValueError):
        reg.prox_scalar(2.5, 1.0)


def test_parse_libsvm():
    ds = fedcanon.parse_libsvm("1 1:0.5 3:-2.0\n-1 2:1.0\n")
    assert ds["dim"] == 3
    assert ds["labels"] == [1, 0]
    assert ds["rows"][0] == [(0, 0.5), (2, -2.0)]
    with pytest.raises(ValueError):
        fedcanon.parse_libsvm("")


def test_partition_is_disjoint_and_deterministic():
    text = "".join(f"{i % 3} 1:{i}.0\n" for i in range(30))
    a = fedcanon.partition(text, mode="dirichlet", eta=0.5, n_clients=4, seed=9)
    b = fedcanon.partition(text, mode="dirichlet", eta=0.5, n_clients=4, seed=9)
    assert a == b
    flat = sorted(i for shard in a for i in shard)
    assert flat == list(range(30))
    assert all(shard for shard in a)


def test_validate_stepsizes():
    rep = fedcanon.validate_stepsizes(0.25, 0.0, 1, 1.0, 0.0, 1.0)
    assert rep["delta"] == pytest.approx(1.0)
    assert rep["all_pass"]
    names = {c["name"] for c in rep["checks"]}
    assert {"sublinear_alpha", "sublinear_beta", "linear_rate_alpha"} <= names


def test_run_experiment_contract():
    records, result = fedcanon.run(BASE_CONFIG)
    assert len(records) == BASE_CONFIG["T"] + 1
    assert records[0]["round"] == 0
    assert records[-1]["prox_cum"] == BASE_CONFIG["T"]
    assert all(p["pass"] for p in result["probes"])
    # monotone progress on a strongly convex problem
    assert records[-1]["phi"] < records[0]["phi"]


def test_run_is_deterministic():
    a = fedcanon.run_experiment(json.dumps(BASE_CONFIG))
    b = fedcanon.run_experiment(json.dumps(BASE_CONFIG))
    assert a["csv"] == b["csv"]


def test_prox_gradient_norm():
    reg = fedcanon.Regularizer("zero")
    g = [0.3, -0.4]
    assert fedcanon.prox_gradient_norm_sq([1.0, 2.0], 0.5, g, reg) == pytest.approx(0.25)


def test_config_errors_surface():
    bad = dict(BASE_CONFIG, T=0)
    with pytest.raises(ValueError):
        fedcanon.run_experiment(json.dumps(bad))
