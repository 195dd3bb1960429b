"""Nonlinear observation functions and their Lipschitz approximations.

Four link families are implemented: the plain sign, the dithered sign, the
dithered uniform quantizer, and continuous single-index links (identity,
ReLU, tanh, optionally with additive Gaussian noise folded into the link).
For the discontinuous links the band construction replaces the function on
each interval [x0 - beta/2, x0 + beta/2] around a jump x0 by the linear
interpolation through the jump midpoint, which makes the approximation
(L0 + B0/beta)-Lipschitz and its absolute error (2*L0 + B0/beta)-Lipschitz.

All evaluation functions accept scalars or numpy arrays (broadcasting over
u, tau and rng_draw) and are pure given their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KIND_SIGN = "sign"
KIND_DITHERED_SIGN = "dithered_sign"
KIND_QUANTIZER = "quantizer"
KIND_SIM = "sim"
LINK_KINDS = (KIND_SIGN, KIND_DITHERED_SIGN, KIND_QUANTIZER, KIND_SIM)

SIM_IDENTITY = "identity"
SIM_RELU = "relu"
SIM_TANH = "tanh"
SIM_LINKS = (SIM_IDENTITY, SIM_RELU, SIM_TANH)


@dataclass(frozen=True)
class LipschitzParams:
    """Jump structure of a link: max jump b0, piecewise Lipschitz constant
    l0, and minimum jump separation beta0 (inf when at most one jump)."""

    b0: float
    l0: float
    beta0: float


@dataclass(frozen=True)
class LinkSpec:
    """One observation function family and its parameters.

    kind selects the family; lambda_ is the dither half-range (dithered
    sign only), delta the quantizer resolution, sim_link and
    sim_noise_sigma configure the continuous single-index link.
    """

    kind: str
    lambda_: float = 0.0
    delta: float = 0.0
    sim_link: str = SIM_IDENTITY
    sim_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind == KIND_DITHERED_SIGN and self.lambda_ <= 0:
            raise ValueError("dithered_sign requires lambda_ > 0")
        if self.kind == KIND_QUANTIZER and self.delta <= 0:
            raise ValueError("quantizer requires delta > 0")
        if self.kind == KIND_SIM:
            if self.sim_link not in SIM_LINKS:
                raise ValueError(f"unknown sim link {self.sim_link!r}")
            if self.sim_noise_sigma < 0:
                raise ValueError("sim_noise_sigma must be nonnegative")

    @property
    def dithered(self) -> bool:
        return self.kind in (KIND_DITHERED_SIGN, KIND_QUANTIZER)

    @property
    def dither_half_range(self) -> float:
        """Half-range of the uniform dither; 0 for undithered links."""
        if self.kind == KIND_DITHERED_SIGN:
            return self.lambda_
        if self.kind == KIND_QUANTIZER:
            return 0.5 * self.delta
        return 0.0


@dataclass(frozen=True)
class DitherRealization:
    """One frozen draw of the dither vector tau_1..tau_m (empty when the
    link is undithered)."""

    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def link_params(spec: LinkSpec) -> LipschitzParams:
    """(B0, L0, beta0) for the link family."""
    if spec.kind in (KIND_SIGN, KIND_DITHERED_SIGN):
        return LipschitzParams(b0=2.0, l0=0.0, beta0=math.inf)
    if spec.kind == KIND_QUANTIZER:
        return LipschitzParams(b0=spec.delta, l0=0.0, beta0=spec.delta)
    # Continuous sim links are 1-Lipschitz; additive noise is a constant
    # shift per realization and does not change the constant.
    return LipschitzParams(b0=0.0, l0=1.0, beta0=math.inf)


def _sign(u):
    # Right-continuous convention: the value at a jump is the right limit.
    return np.where(np.asarray(u, dtype=float) >= 0.0, 1.0, -1.0)


def _quantize(w, delta: float):
    return delta * (np.floor(np.asarray(w, dtype=float) / delta) + 0.5)


def _sim_base(spec: LinkSpec, u):
    u = np.asarray(u, dtype=float)
    if spec.sim_link == SIM_IDENTITY:
        return u + 0.0
    if spec.sim_link == SIM_RELU:
        return np.maximum(u, 0.0)
    return np.tanh(u)


def _check_dither_args(spec: LinkSpec, tau, rng_draw):
    if spec.dithered and tau is None:
        raise ValueError(f"link kind {spec.kind!r} requires a dither value")
    if spec.kind == KIND_SIM and spec.sim_noise_sigma > 0 and rng_draw is None:
        raise ValueError("sim link with noise requires rng_draw")


def _shift(tau):
    return 0.0 if tau is None else np.asarray(tau, dtype=float)


def link_eval(spec: LinkSpec, u, tau=None, rng_draw=None):
    """f(u) for one realization (dither tau, sim noise draw rng_draw)."""
    _check_dither_args(spec, tau, rng_draw)
    u = np.asarray(u, dtype=float)
    if spec.kind == KIND_SIGN:
        out = _sign(u + _shift(tau))
    elif spec.kind == KIND_DITHERED_SIGN:
        out = _sign(u + np.asarray(tau, dtype=float))
    elif spec.kind == KIND_QUANTIZER:
        out = _quantize(u + np.asarray(tau, dtype=float), spec.delta)
    else:
        out = _sim_base(spec, u)
        if spec.sim_noise_sigma > 0:
            out = out + spec.sim_noise_sigma * np.asarray(rng_draw, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def discontinuities_near(spec: LinkSpec, tau: float, interval) -> list[float]:
    """Sorted discontinuities of f inside the closed interval."""
    lo, hi = float(interval[0]), float(interval[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("interval must be finite")
    if spec.kind in (KIND_SIGN, KIND_DITHERED_SIGN):
        x0 = -float(tau)
        return [x0] if lo <= x0 <= hi else []
    if spec.kind == KIND_QUANTIZER:
        delta = spec.delta
        k_lo = math.ceil((lo + float(tau)) / delta - 1e-12)
        k_hi = math.floor((hi + float(tau)) / delta + 1e-12)
        return [k * delta - float(tau) for k in range(k_lo, k_hi + 1)]
    return []


def _check_beta(spec: LinkSpec, beta: float):
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    beta0 = link_params(spec).beta0
    if beta >= 0.5 * beta0:
        raise ValueError(f"beta must be below beta0/2 = {0.5 * beta0} (bands overlap)")


def lipschitz_approx_eval(spec: LinkSpec, beta: float, u, tau=None, rng_draw=None):
    """f_beta(u): f with each jump replaced by a linear ramp of width beta.

    On a band [x0 - beta/2, x0 + beta/2] around a jump x0 the value runs
    linearly through the jump midpoint (f^- + f^+)/2. Outside every band
    f_beta equals f; band edges agree with both branches by construction
    and are evaluated with the closed-band branch. beta = 0 returns f.
    """
    _check_beta(spec, beta)
    _check_dither_args(spec, tau, rng_draw)
    u = np.asarray(u, dtype=float)
    if beta == 0.0 or spec.kind == KIND_SIM:
        return link_eval(spec, u, tau, rng_draw)
    if spec.kind in (KIND_SIGN, KIND_DITHERED_SIGN):
        w = u + _shift(tau)  # jump sits at w = 0
        band = np.abs(w) <= 0.5 * beta
        out = np.where(band, 2.0 * w / beta, _sign(w))
    else:
        delta = spec.delta
        w = u + np.asarray(tau, dtype=float)  # jumps at w = k*delta
        k = np.round(w / delta)
        d = w - k * delta
        band = np.abs(d) <= 0.5 * beta
        out = np.where(band, k * delta + (delta / beta) * d, _quantize(w, delta))
    return float(out) if np.ndim(out) == 0 else out


def approx_error_eval(spec: LinkSpec, beta: float, u, tau=None, rng_draw=None):
    """epsilon_beta(u) = f_beta(u) - f(u); zero outside the jump bands."""
    fb = lipschitz_approx_eval(spec, beta, u, tau, rng_draw)
    f = link_eval(spec, u, tau, rng_draw)
    out = np.asarray(fb) - np.asarray(f)
    return float(out) if np.ndim(out) == 0 else out


def xi_eval(spec: LinkSpec, beta: float, t_scale: float, u, tau=None, rng_draw=None):
    """xi_beta(u) = f_beta(u) - T*u, the centered-link factor."""
    if t_scale <= 0:
        raise ValueError("t_scale must be positive")
    fb = lipschitz_approx_eval(spec, beta, u, tau, rng_draw)
    out = np.asarray(fb) - t_scale * np.asarray(u, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def in_jump_band(spec: LinkSpec, beta: float, u, tau=None):
    """Indicator of u in D_f + [-beta/2, beta/2] (boolean, broadcasts)."""
    _check_beta(spec, beta)
    u = np.asarray(u, dtype=float)
    if spec.kind == KIND_SIM:
        out = np.zeros(np.shape(u), dtype=bool) if np.ndim(u) else False
        return out
    if spec.kind in (KIND_SIGN, KIND_DITHERED_SIGN):
        out = np.abs(u + _shift(tau)) <= 0.5 * beta
    else:
        w = u + np.asarray(tau, dtype=float)
        d = w - np.round(w / spec.delta) * spec.delta
        out = np.abs(d) <= 0.5 * beta
    return bool(out) if np.ndim(out) == 0 else out
