"""Composite federated optimization: FedCanon, baselines, and theory probes.

Thin wrapper over the C++ core. The heavy lifting (prox maps, federated
rounds, probes) lives in the extension module; this package adds a couple of
convenience helpers around the JSON-config runner.
"""

import json as _json

from ._core import (
    ConfigError,
    DivergedError,
    ParseError,
    Regularizer,
    parse_libsvm,
    partition,
    prox_gradient_norm_sq,
    prox_oracle_scalar,
    run_experiment,
    validate_stepsizes,
)

__all__ = [
    "ConfigError",
    "DivergedError",
    "ParseError",
    "Regularizer",
    "parse_libsvm",
    "partition",
    "prox_gradient_norm_sq",
    "prox_oracle_scalar",
    "run",
    "run_experiment",
    "validate_stepsizes",
]


def run(config):
    """Run an experiment from a config dict; returns (records, result).

    records is a list of per-round dicts parsed from the CSV contract;
    result carries the probe verdicts and final metrics.
    """
    result = run_experiment(_json.dumps(config))
    lines = result["csv"].strip().split("\n")
    header = lines[0].split(",")
    records = []
    for line in lines[1:]:
        row = {}
        for key, cell in zip(header, line.split(",")):
            row[key] = None if cell == "" else (int(cell) if key in ("round", "prox_cum", "floats_cum") else float(cell))
        records.append(row)
    return records, result
