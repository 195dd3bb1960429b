"""Generalized-Lasso recovery by projected gradient descent in latent space.

The program min_{x in T*K} ||y - Ax||_2 is solved through the latent
parametrization x = c*G(z), z in B_2^k(r), with c = T (scale_by_t) or
c = 1 (prior_absorbs_t, for priors that already absorb the scaling). The
squared loss is optimized (same argmin, smoother gradients); reported
losses use the unsquared norm. Restarts are independent, each seeded from
(seed, restart index), and the best final loss wins with ties broken by
the lowest restart index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .generator import MlpGenerator, backward, forward, lipschitz_upper_bound, project_latent, spectral_norm
from .links import KIND_DITHERED_SIGN, KIND_QUANTIZER, KIND_SIGN, LinkSpec, link_eval
from .sensing import SensingEnsemble
from .streams import STREAM_RESTART_BASE, counter_rng, gaussians

MODE_SCALE_BY_T = "scale_by_t"
MODE_PRIOR_ABSORBS_T = "prior_absorbs_t"

MAX_BACKTRACK_HALVINGS = 30


class SolverFailure(RuntimeError):
    """Every restart diverged to a non-finite loss."""


@dataclass(frozen=True)
class SolverOptions:
    restarts: int = 10
    steps: int = 1000
    step_size: float | None = None  # None: 0.5 / (sigma_max(A)^2 * Lhat^2 * c^2)
    t_scale: float = 1.0
    constraint_mode: str = MODE_SCALE_BY_T
    backtracking: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.steps < 1:
            raise ValueError("restarts and steps must be at least 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.t_scale <= 0:
            raise ValueError("t_scale must be positive")
        if self.constraint_mode not in (MODE_SCALE_BY_T, MODE_PRIOR_ABSORBS_T):
            raise ValueError(f"unknown constraint_mode {self.constraint_mode!r}")


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    z_hat: np.ndarray
    best_loss: float
    restart_losses: list[float]
    cosine: float | None = None
    rel_l2: float | None = None


def scaling_factor(link: LinkSpec, mc_samples: int = 1_000_000, seed: int = 0) -> float:
    """Model-appropriate T: sqrt(2/pi) for sign, 1/lambda for dithered
    sign, 1 for the dithered quantizer, and a Monte-Carlo estimate of
    mu = E[f(g) g] (g standard normal) for Sim links."""
    if link.kind == KIND_SIGN:
        return math.sqrt(2.0 / math.pi)
    if link.kind == KIND_DITHERED_SIGN:
        return 1.0 / link.lambda_
    if link.kind == KIND_QUANTIZER:
        return 1.0
    if mc_samples < 10_000:
        raise ValueError("Sim scaling needs mc_samples >= 1e4")
    rng = counter_rng(seed, 0)
    g = gaussians(rng, mc_samples)
    draw = gaussians(rng, mc_samples) if link.sim_noise_sigma > 0 else None
    return float(np.mean(link_eval(link, g, None, draw) * g))


def cosine_similarity(x_hat: np.ndarray, x_star: np.ndarray) -> float:
    """x_hat . x_star / (||x_hat|| ||x_star||), in [-1, 1]."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    nh, ns = np.linalg.norm(x_hat), np.linalg.norm(x_star)
    if nh == 0 or ns == 0:
        raise ValueError("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(x_hat, x_star) / (nh * ns), -1.0, 1.0))


def relative_l2(x_hat: np.ndarray, x_star: np.ndarray) -> float:
    """||x_hat - x_star||_2 / ||x_star||_2."""
    x_star = np.asarray(x_star, dtype=float)
    ns = np.linalg.norm(x_star)
    if ns == 0:
        raise ValueError("relative error undefined for zero ground truth")
    return float(np.linalg.norm(np.asarray(x_hat, dtype=float) - x_star) / ns)


def default_step_size(ens: SensingEnsemble, gen: MlpGenerator, c: float) -> float:
    """Conservative 0.5 / (sigma_max(A)^2 Lhat^2 c^2) smoothness step."""
    sig = spectral_norm(ens.a_matrix)
    lhat = lipschitz_upper_bound(gen)
    denom = (sig * lhat * c) ** 2
    return 0.5 / denom if denom > 0 else 1.0


def _run_restarts(ens, y, gen, z0s, step0, c, steps, backtracking):
    """All restarts as one batch (rows are independent trajectories).

    Returns (Z, squared losses) with +inf marking diverged restarts; a
    diverged row stops moving. With backtracking a row whose loss would
    increase after 30 halvings keeps its iterate for that step.
    """
    a = ens.a_matrix
    r = gen.latent_radius

    def loss_and_res(z):
        res = y[None, :] - c * (forward(gen, z) @ a.T)
        return np.einsum("ij,ij->i", res, res), res

    z = project_latent(z0s, r)
    cur, res = loss_and_res(z)
    alive = np.isfinite(cur)
    cur = np.where(alive, cur, np.inf)
    for _ in range(steps):
        if not alive.any():
            break
        grad = backward(gen, z, (-2.0 * c) * (res @ a))
        bad = alive & ~np.all(np.isfinite(grad), axis=1)
        if bad.any():
            alive &= ~bad
            cur = np.where(alive, cur, np.inf)
            grad = np.where(np.isfinite(grad), grad, 0.0)
        step = np.full(z.shape[0], step0)
        cand = project_latent(z - step[:, None] * grad, r)
        nxt, cres = loss_and_res(cand)
        if backtracking:
            need = alive & (nxt > cur)
            halvings = 0
            while need.any() and halvings < MAX_BACKTRACK_HALVINGS:
                step = np.where(need, 0.5 * step, step)
                cand2 = project_latent(z - step[:, None] * grad, r)
                nxt2, cres2 = loss_and_res(cand2)
                cand = np.where(need[:, None], cand2, cand)
                cres = np.where(need[:, None], cres2, cres)
                nxt = np.where(need, nxt2, nxt)
                need = alive & (nxt > cur)
                halvings += 1
            accept = alive & (nxt <= cur)
        else:
            accept = alive.copy()
        diverged = accept & ~np.isfinite(nxt)
        if diverged.any():
            alive &= ~diverged
            accept &= ~diverged
        z = np.where(accept[:, None], cand, z)
        res = np.where(accept[:, None], cres, res)
        cur = np.where(accept, nxt, np.where(alive, cur, np.inf))
    return z, np.where(alive, cur, np.inf)


def generalized_lasso(ens: SensingEnsemble, y: np.ndarray, gen: MlpGenerator,
                      opts: SolverOptions, x_star: np.ndarray | None = None) -> RecoveryResult:
    """Solve the generalized Lasso and return the best restart.

    Restart i initializes z ~ N(0, I_k / k) from the (seed, i) counter
    stream, projected to the latent ball. A restart whose loss turns
    non-finite aborts and records +inf; if every restart diverges a
    SolverFailure is raised. When x_star is given, cosine is measured
    against x_star and rel_l2 against t_scale * x_star so that both
    constraint modes report comparable errors.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (ens.m,):
        raise ValueError(f"y must have shape ({ens.m},), got {y.shape}")
    if gen.output_dim != ens.n:
        raise ValueError("generator output dim does not match ensemble n")
    c = opts.t_scale if opts.constraint_mode == MODE_SCALE_BY_T else 1.0
    step0 = opts.step_size if opts.step_size is not None else default_step_size(ens, gen, c)
    k = gen.latent_dim

    z0s = np.stack([gaussians(counter_rng(opts.seed, STREAM_RESTART_BASE + i), k)
                    / math.sqrt(k) for i in range(opts.restarts)])
    finals, loss_sqs = _run_restarts(ens, y, gen, z0s, step0, c,
                                     opts.steps, opts.backtracking)
    losses = [math.sqrt(l) if math.isfinite(l) else math.inf for l in loss_sqs]
    best = int(np.argmin(losses))  # argmin takes the lowest index on ties
    if not math.isfinite(losses[best]):
        raise SolverFailure("all restarts diverged")
    z_hat = finals[best]
    x_hat = c * forward(gen, z_hat)
    result = RecoveryResult(x_hat=x_hat, z_hat=z_hat, best_loss=losses[best],
                            restart_losses=losses)
    if x_star is not None:
        result.cosine = cosine_similarity(x_hat, x_star)
        result.rel_l2 = relative_l2(x_hat, opts.t_scale * np.asarray(x_star, dtype=float))
    return result
