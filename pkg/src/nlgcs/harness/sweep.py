"""Uniform-recovery sweeps with a frozen ensemble per (m, trial).

Ground-truth signals are drawn once from the master seed as G(z) with z
uniform in the latent ball and shared by every (m, trial) cell, matching
the one-ensemble-for-all-signals protocol. Cells are independent given
their derived seeds, so the sweep parallelizes over (m, trial) under the
NLGCS_THREADS cap while reports stay byte-identical across reruns.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..generator import MlpGenerator, forward, load_weights, random_generator
from ..links import KIND_DITHERED_SIGN, KIND_SIM, LinkSpec
from ..recovery import SolverFailure, generalized_lasso, scaling_factor
from ..sensing import observe, sample_ensemble
from ..streams import (STREAM_ENSEMBLE_SEEDS, STREAM_SIGNALS,
                       STREAM_SOLVER_SEEDS, ball_points, counter_rng,
                       derive_seeds)
from .config import METRIC_COSINE, ExperimentConfig

SWEEP_CSV_HEADER = ("experiment_id,m,trial,signal_id,metric_name,"
                    "metric_value,best_loss,restarts_used")
SUMMARY_CSV_HEADER = "m,worst_case_mean,worst_case_std,mean_metric,slope_contribution"

# Floor applied to errors before the log-log fit; exact zeros only occur in
# degenerate noiseless-linear cells.
_ERROR_FLOOR = 1e-12


@dataclass(frozen=True)
class SignalRecord:
    m: int
    trial: int
    signal_id: int
    metric_value: float
    best_loss: float
    restarts_used: int
    failed: bool


@dataclass(frozen=True)
class SweepCell:
    m: int
    trial: int
    records: tuple[SignalRecord, ...]

    @property
    def per_signal(self) -> list[float]:
        return [r.metric_value for r in self.records]

    def worst(self, metric: str) -> float:
        vals = self.per_signal
        return min(vals) if metric == METRIC_COSINE else max(vals)

    def mean(self) -> float:
        return float(np.mean(self.per_signal))


@dataclass
class SweepReport:
    config: ExperimentConfig
    cells: list[SweepCell]
    slope: float
    intercept: float
    r2: float
    slope_se: float
    m_values: list[int]
    median_worst_errors: list[float]

    def worst_by_m(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {m: [] for m in self.m_values}
        for cell in self.cells:
            out[cell.m].append(cell.worst(self.config.metric))
        return out


def fit_slope(pairs) -> tuple[float, float, float]:
    """OLS of log err on log m; returns (slope, intercept, r^2)."""
    slope, intercept, r2, _ = _fit_slope_with_se(pairs)
    return slope, intercept, r2


def _fit_slope_with_se(pairs):
    pts = [(float(m), float(e)) for m, e in pairs]
    if len(pts) < 3:
        raise ValueError("slope fit needs at least 3 points")
    if any(m <= 0 or e <= 0 for m, e in pts):
        raise ValueError("slope fit needs positive m and err values")
    x = np.log([m for m, _ in pts])
    y = np.log([e for _, e in pts])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise ValueError("slope fit needs at least two distinct m values")
    slope = float(xc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if tss == 0 else 1.0 - rss / tss
    dof = len(pts) - 2
    se = math.sqrt(rss / dof / sxx) if dof > 0 else float("nan")
    return slope, intercept, r2, se


def build_generator(cfg: ExperimentConfig) -> MlpGenerator:
    if cfg.generator.kind == "weights":
        return load_weights(cfg.generator.weights_path)
    return random_generator(cfg.generator.dims, cfg.generator.latent_radius,
                            cfg.generator.seed)


def draw_signals(cfg: ExperimentConfig, gen: MlpGenerator) -> np.ndarray:
    """(n_signals, n) ground truths G(z), z uniform in the latent ball."""
    rng = counter_rng(cfg.master_seed, STREAM_SIGNALS)
    z = ball_points(rng, cfg.n_signals, gen.latent_dim, gen.latent_radius)
    return forward(gen, z)


def link_for_m(cfg: ExperimentConfig, m: int, signal_radius: float) -> LinkSpec:
    """Per-m link: applies the lambda = C R sqrt(log m) rule when auto."""
    if cfg.link.kind == KIND_DITHERED_SIGN and cfg.lambda_auto:
        lam = cfg.lambda_c * signal_radius * math.sqrt(math.log(m))
        return replace(cfg.link, lambda_=lam)
    return cfg.link


def t_scale_for(cfg: ExperimentConfig, link: LinkSpec) -> float:
    if not cfg.t_scale_auto:
        return cfg.solver.t_scale
    return scaling_factor(link, seed=cfg.master_seed)


def _run_cell(args) -> SweepCell:
    (cfg, gen, signals, m, trial, link, t_scale, ens_seed, solver_seeds) = args
    ens = sample_ensemble(m, gen.output_dim, link, cfg.noise_sigma, ens_seed)
    records = []
    for j in range(cfg.n_signals):
        x_star = signals[j]
        y = observe(ens, x_star, noise_seed_offset=j)
        opts = replace(cfg.solver, t_scale=t_scale, seed=int(solver_seeds[j]))
        try:
            res = generalized_lasso(ens, y, gen, opts, x_star=x_star)
            metric = res.cosine if cfg.metric == METRIC_COSINE else res.rel_l2
            used = sum(1 for l in res.restart_losses if math.isfinite(l))
            records.append(SignalRecord(m, trial, j, float(metric),
                                        res.best_loss, used, False))
        except SolverFailure:
            metric = 0.0 if cfg.metric == METRIC_COSINE else math.inf
            records.append(SignalRecord(m, trial, j, metric, math.inf, 0, True))
    return SweepCell(m=m, trial=trial, records=tuple(records))


def _thread_cap() -> int:
    raw = os.environ.get("NLGCS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_uniform_sweep(cfg: ExperimentConfig) -> SweepReport:
    gen = build_generator(cfg)
    signals = draw_signals(cfg, gen)
    radius = float(np.max(np.linalg.norm(signals, axis=1)))

    n_m, n_t = len(cfg.m_grid), cfg.n_trials
    ens_seeds = derive_seeds(cfg.master_seed, STREAM_ENSEMBLE_SEEDS,
                             n_m * n_t).reshape(n_m, n_t)
    solver_seeds = derive_seeds(cfg.master_seed, STREAM_SOLVER_SEEDS,
                                n_m * n_t * cfg.n_signals).reshape(n_m, n_t, cfg.n_signals)

    tasks = []
    for mi, m in enumerate(cfg.m_grid):
        link = link_for_m(cfg, m, radius)
        t_scale = t_scale_for(cfg, link)
        for trial in range(n_t):
            tasks.append((cfg, gen, signals, m, trial, link, t_scale,
                          int(ens_seeds[mi, trial]), solver_seeds[mi, trial]))

    workers = _thread_cap()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]
    cells.sort(key=lambda c: (c.m, c.trial))

    m_values = list(cfg.m_grid)
    medians = []
    for m in m_values:
        worsts = [c.worst(cfg.metric) for c in cells if c.m == m]
        errs = [_to_error(cfg.metric, w) for w in worsts]
        medians.append(max(float(np.median(errs)), _ERROR_FLOOR))
    slope, intercept, r2, se = _fit_slope_with_se(list(zip(m_values, medians)))
    return SweepReport(config=cfg, cells=cells, slope=slope, intercept=intercept,
                       r2=r2, slope_se=se, m_values=m_values,
                       median_worst_errors=medians)


def _to_error(metric: str, value: float) -> float:
    return 1.0 - value if metric == METRIC_COSINE else value


def sweep_csv(report: SweepReport) -> str:
    lines = [SWEEP_CSV_HEADER]
    cfg = report.config
    for cell in report.cells:
        for rec in cell.records:
            lines.append(",".join([
                cfg.experiment_id, str(rec.m), str(rec.trial), str(rec.signal_id),
                cfg.metric, repr(rec.metric_value), repr(rec.best_loss),
                str(rec.restarts_used)]))
    return "\n".join(lines) + "\n"


def summary_csv(report: SweepReport) -> str:
    lines = [SUMMARY_CSV_HEADER]
    cfg = report.config
    worst = report.worst_by_m()
    for m, median_err in zip(report.m_values, report.median_worst_errors):
        vals = np.array(worst[m])
        mean_metric = float(np.mean([r.metric_value for c in report.cells
                                     if c.m == m for r in c.records]))
        lines.append(",".join([
            str(m), repr(float(np.mean(vals))),
            repr(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0),
            repr(mean_metric), repr(math.log(median_err))]))
    return "\n".join(lines) + "\n"


def report_json(report: SweepReport) -> str:
    payload = {
        "experiment_id": report.config.experiment_id,
        "metric": report.config.metric,
        "m_grid": report.m_values,
        "median_worst_errors": report.median_worst_errors,
        "slope": report.slope,
        "intercept": report.intercept,
        "r2": report.r2,
        "slope_se": report.slope_se,
        "slope_band_2se": [report.slope - 2 * report.slope_se,
                           report.slope + 2 * report.slope_se],
        "master_seed": report.config.master_seed,
        "flagged_cells": [[c.m, c.trial, r.signal_id] for c in report.cells
                          for r in c.records if r.failed],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
