"""Desk-scale experiment presets for the four canonical models.

Defaults: k = 10, n = 200 two-hidden-layer random generator, m grid
{100, 200, 400, 800, 1600}, 10 signals, 5 trials, 10 restarts of 1000
steps. The dithered-sign preset uses lambda = 3 R sqrt(log m) (C = 3, R
the max sampled signal norm); the quantizer preset uses delta = 3.
"""

from __future__ import annotations

from dataclasses import replace

from ..links import LinkSpec
from ..recovery import SolverOptions
from .config import (METRIC_COSINE, METRIC_REL_L2, ExperimentConfig,
                     GeneratorConfig)

PRESET_NAMES = ("onebit", "onebit-dither", "sim-relu", "uqd")

_BASE_GENERATOR = GeneratorConfig(kind="random", dims=(10, 64, 64, 200), seed=7)
_BASE_SOLVER = SolverOptions(restarts=10, steps=1000, seed=0)


def preset(name: str) -> ExperimentConfig:
    """Fully populated config for a named experiment preset."""
    if name == "onebit":
        return ExperimentConfig(experiment_id="onebit",
                                generator=_BASE_GENERATOR,
                                link=LinkSpec(kind="sign"),
                                solver=_BASE_SOLVER,
                                metric=METRIC_COSINE)
    if name == "onebit-dither":
        return ExperimentConfig(experiment_id="onebit-dither",
                                generator=_BASE_GENERATOR,
                                link=LinkSpec(kind="dithered_sign", lambda_=1.0),
                                lambda_auto=True, lambda_c=3.0,
                                solver=_BASE_SOLVER,
                                metric=METRIC_REL_L2)
    if name == "sim-relu":
        return ExperimentConfig(experiment_id="sim-relu",
                                generator=_BASE_GENERATOR,
                                link=LinkSpec(kind="sim", sim_link="relu"),
                                solver=_BASE_SOLVER,
                                metric=METRIC_COSINE)
    if name == "uqd":
        return ExperimentConfig(experiment_id="uqd",
                                generator=_BASE_GENERATOR,
                                link=LinkSpec(kind="quantizer", delta=3.0),
                                solver=_BASE_SOLVER,
                                metric=METRIC_REL_L2)
    raise ValueError(f"unknown preset {name!r}")
