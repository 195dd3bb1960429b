"""Experiment configuration: a flat key/value text format with dotted keys.

Lines are `section.key = value`; blank lines and `#` comments are ignored.
The full key list with types and defaults is documented in the README
config-schema table and emitted by `preset --emit`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..links import LinkSpec
from ..recovery import MODE_PRIOR_ABSORBS_T, MODE_SCALE_BY_T, SolverOptions

METRIC_COSINE = "cosine"
METRIC_REL_L2 = "rel_l2"

_KIND_ALIASES = {
    "sign": "sign",
    "dithered_sign": "dithered_sign",
    "quantizer": "quantizer",
    "dithered_uniform_quantizer": "quantizer",
    "uqd": "quantizer",
    "sim": "sim",
}


class ConfigError(ValueError):
    """Malformed config file or key."""


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "random"  # random | weights
    dims: tuple[int, ...] = (10, 64, 64, 200)
    seed: int = 7
    latent_radius: float | None = None  # None: sqrt(k)
    weights_path: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str = "custom"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    link: LinkSpec = field(default_factory=lambda: LinkSpec(kind="sign"))
    # Dithered-sign range rule lambda = lambda_c * R * sqrt(log m) with R
    # the max sampled signal norm, applied per m when lambda_auto is set.
    lambda_auto: bool = True
    lambda_c: float = 3.0
    m_grid: tuple[int, ...] = (100, 200, 400, 800, 1600)
    n_signals: int = 10
    n_trials: int = 5
    solver: SolverOptions = field(default_factory=SolverOptions)
    t_scale_auto: bool = True
    noise_sigma: float = 0.0
    metric: str = METRIC_COSINE
    output_dir: str = "out"
    master_seed: int = 1234

    def __post_init__(self):
        if list(self.m_grid) != sorted(set(self.m_grid)):
            raise ConfigError("m_grid must be strictly increasing")
        if self.n_signals < 1 or self.n_trials < 1:
            raise ConfigError("n_signals and n_trials must be at least 1")
        if self.metric not in (METRIC_COSINE, METRIC_REL_L2):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise.sigma must be nonnegative")


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse the dotted key/value format into an ExperimentConfig."""
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        kv[key] = value

    def pop(key: str, default: str | None = None) -> str | None:
        return kv.pop(key, default)

    def pop_float(key: str, default: float) -> float:
        raw = pop(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc

    def pop_int(key: str, default: int) -> int:
        raw = pop(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc

    experiment_id = pop("experiment.id", "custom")

    gen_kind = pop("generator.kind", "random")
    if gen_kind not in ("random", "weights"):
        raise ConfigError(f"generator.kind: unknown value {gen_kind!r}")
    dims_raw = pop("generator.dims", "10 64 64 200")
    try:
        dims = tuple(int(p) for p in dims_raw.split())
    except ValueError as exc:
        raise ConfigError(f"generator.dims: {exc}") from exc
    radius_raw = pop("generator.latent_radius", "auto")
    radius = None if radius_raw.strip().lower() == "auto" else float(radius_raw)
    generator = GeneratorConfig(kind=gen_kind, dims=dims,
                                seed=pop_int("generator.seed", 7),
                                latent_radius=radius,
                                weights_path=pop("generator.weights_path", ""))

    kind_raw = pop("link.kind", "sign")
    if kind_raw not in _KIND_ALIASES:
        raise ConfigError(f"link.kind: unknown value {kind_raw!r}")
    kind = _KIND_ALIASES[kind_raw]
    lam_raw = pop("link.lambda", "auto")
    lambda_auto = lam_raw.strip().lower() == "auto"
    delta = pop_float("link.delta", 3.0)
    sim_link = pop("link.sim_link", "identity")
    sim_sigma = pop_float("link.sim_noise_sigma", 0.0)
    lambda_c = pop_float("link.lambda_c", 3.0)
    try:
        if kind == "sign":
            link = LinkSpec(kind="sign")
        elif kind == "dithered_sign":
            link = LinkSpec(kind="dithered_sign",
                            lambda_=1.0 if lambda_auto else float(lam_raw))
        elif kind == "quantizer":
            link = LinkSpec(kind="quantizer", delta=delta)
        else:
            link = LinkSpec(kind="sim", sim_link=sim_link, sim_noise_sigma=sim_sigma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    t_raw = pop("solver.t_scale", "auto")
    t_auto = t_raw.strip().lower() == "auto"
    step_raw = pop("solver.step_size", "auto")
    step = None if step_raw.strip().lower() == "auto" else float(step_raw)
    mode = pop("solver.constraint_mode", MODE_SCALE_BY_T)
    if mode not in (MODE_SCALE_BY_T, MODE_PRIOR_ABSORBS_T):
        raise ConfigError(f"solver.constraint_mode: unknown value {mode!r}")
    solver = SolverOptions(restarts=pop_int("solver.restarts", 10),
                           steps=pop_int("solver.steps", 1000),
                           step_size=step,
                           t_scale=1.0 if t_auto else float(t_raw),
                           constraint_mode=mode,
                           backtracking=_parse_bool(pop("solver.backtracking", "true"),
                                                    "solver.backtracking"),
                           seed=pop_int("solver.seed", 0))

    m_raw = pop("m.grid", "100 200 400 800 1600")
    try:
        m_grid = tuple(int(p) for p in m_raw.split())
    except ValueError as exc:
        raise ConfigError(f"m.grid: {exc}") from exc

    cfg = ExperimentConfig(experiment_id=experiment_id, generator=generator,
                           link=link, lambda_auto=lambda_auto,
                           lambda_c=lambda_c, m_grid=m_grid,
                           n_signals=pop_int("signals.count", 10),
                           n_trials=pop_int("trials.count", 5),
                           solver=solver, t_scale_auto=t_auto,
                           noise_sigma=pop_float("noise.sigma", 0.0),
                           metric=pop("metric.name", METRIC_COSINE),
                           output_dir=pop("output.dir", "out"),
                           master_seed=pop_int("seed.master", 1234))
    if kv:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(kv))}")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def emit_config(cfg: ExperimentConfig) -> str:
    """Serialize a config back to the flat text format."""
    lines = [
        f"experiment.id = {cfg.experiment_id}",
        f"generator.kind = {cfg.generator.kind}",
        "generator.dims = " + " ".join(str(d) for d in cfg.generator.dims),
        f"generator.seed = {cfg.generator.seed}",
        "generator.latent_radius = " +
        ("auto" if cfg.generator.latent_radius is None else repr(cfg.generator.latent_radius)),
    ]
    if cfg.generator.weights_path:
        lines.append(f"generator.weights_path = {cfg.generator.weights_path}")
    lines += [
        f"link.kind = {cfg.link.kind}",
        "link.lambda = " + ("auto" if cfg.lambda_auto else repr(cfg.link.lambda_)),
        f"link.lambda_c = {cfg.lambda_c!r}",
        f"link.delta = {cfg.link.delta!r}",
        f"link.sim_link = {cfg.link.sim_link}",
        f"link.sim_noise_sigma = {cfg.link.sim_noise_sigma!r}",
        "m.grid = " + " ".join(str(m) for m in cfg.m_grid),
        f"signals.count = {cfg.n_signals}",
        f"trials.count = {cfg.n_trials}",
        f"solver.restarts = {cfg.solver.restarts}",
        f"solver.steps = {cfg.solver.steps}",
        "solver.step_size = " +
        ("auto" if cfg.solver.step_size is None else repr(cfg.solver.step_size)),
        "solver.t_scale = " + ("auto" if cfg.t_scale_auto else repr(cfg.solver.t_scale)),
        f"solver.constraint_mode = {cfg.solver.constraint_mode}",
        f"solver.backtracking = {'true' if cfg.solver.backtracking else 'false'}",
        f"solver.seed = {cfg.solver.seed}",
        f"noise.sigma = {cfg.noise_sigma!r}",
        f"metric.name = {cfg.metric}",
        f"output.dir = {cfg.output_dir}",
        f"seed.master = {cfg.master_seed}",
    ]
    return "\n".join(lines) + "\n"
