"""Monte-Carlo and closed-form oracles for the framework's lemmas.

Covers the target mismatch rho(x) = ||E[f(a'x) a] - T x||, the band-hit
probability mu_beta(x), metric-entropy upper bounds for the constraint
sets, an empirical S-REC check, Gaussian-norm concentration, and an
empirical supremum of the centered product process over finite nets. Every
oracle is a pure function of its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .generator import MlpGenerator, forward
from .links import LinkSpec, approx_error_eval, in_jump_band, link_eval, xi_eval
from .sensing import SensingEnsemble
from .streams import ball_points, counter_rng, gaussians, uniforms

_MC_CHUNK = 200_000
_JACKKNIFE_BATCHES = 10


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo value with standard error and sample count."""

    value: float
    stderr: float
    n_samples: int


@dataclass(frozen=True)
class SrecParams:
    """S-REC slack: gamma = 1 - alpha and additive slack delta."""

    alpha: float
    slack_delta: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must be in [0, 1)")
        if self.slack_delta < 0:
            raise ValueError("slack_delta must be nonnegative")


@dataclass(frozen=True)
class TheoryParams:
    """Product-process parameters: sub-Gaussian norms (a_*), deterministic
    bounds (u_*), increment constants (m_* in psi_2, l_* pointwise) for the
    two factors, plus the event failure probability p0. Used only for
    reporting predicted-vs-observed bound ratios; the absolute constants
    are unspecified in the source bounds."""

    a_g: float
    u_g: float
    m_g: float
    l_g: float
    a_h: float
    u_h: float
    m_h: float
    l_h: float
    p0: float

    @property
    def s_gh(self) -> float:
        return self.l_g * self.u_h + self.m_g * self.a_h

    @property
    def t_gh(self) -> float:
        return self.l_h * self.u_g + self.m_h * self.a_g


def _fresh_link_randomness(link: LinkSpec, rng, count: int):
    half = link.dither_half_range
    tau = uniforms(rng, count, -half, half) if half > 0 else None
    draw = gaussians(rng, count) if (link.kind == "sim" and link.sim_noise_sigma > 0) else None
    return tau, draw


def target_mismatch_mc(link: LinkSpec, t_scale: float, x: np.ndarray,
                       n_samples: int = 1_000_000, seed: int = 0) -> McEstimate:
    """rho(x) estimate: average f(a'x) a over fresh (a, dither, noise) and
    take the l2 distance to T x.

    The stderr is the norm-level jackknife over 10 equal batches: the l2
    norm of the per-coordinate leave-one-batch-out standard errors of the
    mean (for the mean statistic this equals batch-mean variance / B).
    """
    if n_samples < 1_000:
        raise ValueError("n_samples must be at least 1e3")
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    per_batch = n_samples // _JACKKNIFE_BATCHES
    rng = counter_rng(seed, 0)
    batch_means = np.empty((_JACKKNIFE_BATCHES, n))
    for b in range(_JACKKNIFE_BATCHES):
        acc = np.zeros(n)
        done = 0
        while done < per_batch:
            cnt = min(_MC_CHUNK, per_batch - done)
            a = gaussians(rng, (cnt, n))
            tau, draw = _fresh_link_randomness(link, rng, cnt)
            fv = np.asarray(link_eval(link, a @ x, tau, draw))
            acc += a.T @ fv
            done += cnt
        batch_means[b] = acc / per_batch
    mean_vec = batch_means.mean(axis=0)
    value = float(np.linalg.norm(mean_vec - t_scale * x))
    coord_var = batch_means.var(axis=0, ddof=1) / _JACKKNIFE_BATCHES
    stderr = float(np.sqrt(coord_var.sum()))
    return McEstimate(value=value, stderr=stderr, n_samples=per_batch * _JACKKNIFE_BATCHES)


def mu_beta_mc(link: LinkSpec, x: np.ndarray, beta: float,
               n_samples: int = 1_000_000, seed: int = 0) -> McEstimate:
    """P(a'x in D_f + [-beta/2, beta/2]) with the dither resampled each
    draw."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    rng = counter_rng(seed, 0)
    hits = 0.0
    hits_sq = 0.0
    done = 0
    while done < n_samples:
        cnt = min(_MC_CHUNK, n_samples - done)
        a = gaussians(rng, (cnt, n))
        tau, _ = _fresh_link_randomness(link, rng, cnt)
        ind = np.asarray(in_jump_band(link, beta, a @ x, tau), dtype=float)
        hits += ind.sum()
        hits_sq += (ind * ind).sum()
        done += cnt
    p = hits / n_samples
    var = (hits_sq - n_samples * p * p) / max(n_samples - 1, 1)
    return McEstimate(value=float(p), stderr=float(np.sqrt(max(var, 0.0) / n_samples)),
                      n_samples=n_samples)


ENTROPY_VARIANTS = ("K", "Kminus", "KminusEps", "Normalized")


def entropy_bound(variant: str, k: int, l_lip: float, r: float,
                  t_scale: float = 1.0, eps: float = 0.5, eta: float = 0.1) -> float:
    """Natural-log metric-entropy upper bound for the constraint sets.

    K: k log(3 L r / eta); Kminus: 2k log(6 L r / eta);
    KminusEps: 2k log(12 T L r / eta);
    Normalized: 2k log(12 T L r / (eps * eta)).
    """
    if variant not in ENTROPY_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if not 0.0 < eta <= l_lip * r:
        raise ValueError("eta must lie in (0, l_lip * r]")
    if variant in ("KminusEps", "Normalized") and not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    lr = l_lip * r
    if variant == "K":
        return k * math.log(3.0 * lr / eta)
    if variant == "Kminus":
        return 2.0 * k * math.log(6.0 * lr / eta)
    if variant == "KminusEps":
        return 2.0 * k * math.log(12.0 * t_scale * lr / eta)
    return 2.0 * k * math.log(12.0 * t_scale * lr / (eps * eta))


def srec_empirical(gen: MlpGenerator, ens: SensingEnsemble, n_pairs: int,
                   params: SrecParams, seed: int = 0) -> float:
    """Fraction of sampled latent pairs violating
    ||A(x1 - x2)||/sqrt(m) >= (1 - alpha) ||x1 - x2|| - delta.

    Exact equality (e.g. scaled-identity A at zero slack) counts as
    satisfied; ties are resolved with a relative float tolerance.
    """
    rng = counter_rng(seed, 0)
    z1 = ball_points(rng, n_pairs, gen.latent_dim, gen.latent_radius)
    z2 = ball_points(rng, n_pairs, gen.latent_dim, gen.latent_radius)
    d = forward(gen, z1) - forward(gen, z2)
    norms = np.linalg.norm(d, axis=1)
    lhs = np.linalg.norm(d @ ens.a_matrix.T, axis=1) / math.sqrt(ens.m)
    rhs = (1.0 - params.alpha) * norms - params.slack_delta
    return float(np.mean(lhs + 1e-9 * (1.0 + norms) < rhs))


def gaussian_norm_concentration(n: int, n_samples: int = 100_000,
                                seed: int = 0, ts=(3.0, 5.0)) -> dict[float, float]:
    """Empirical P(| ||a||_2 - sqrt(n) | > t), by default for t in {3, 5}."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = counter_rng(seed, 0)
    root_n = math.sqrt(n)
    counts = {float(t): 0 for t in ts}
    done = 0
    while done < n_samples:
        cnt = min(max(_MC_CHUNK // max(n, 1), 1), n_samples - done)
        norms = np.linalg.norm(gaussians(rng, (cnt, n)), axis=1)
        dev = np.abs(norms - root_n)
        for t in counts:
            counts[t] += int(np.sum(dev > t))
        done += cnt
    return {t: c / n_samples for t, c in counts.items()}


FACTOR_XI = "xi"
FACTOR_ABS_EPS = "abs_eps"


def _factor_values(link: LinkSpec, factor: str, beta: float, t_scale: float, u, tau, draw):
    if factor == FACTOR_XI:
        return np.asarray(xi_eval(link, beta, t_scale, u, tau, draw))
    if factor == FACTOR_ABS_EPS:
        return np.abs(np.asarray(approx_error_eval(link, beta, u, tau, draw)))
    raise ValueError(f"unknown factor {factor!r}")


def product_reference_means(link: LinkSpec, factor: str, beta: float, t_scale: float,
                            scales: np.ndarray, seed: int,
                            ref_samples: int = 1_000_000) -> np.ndarray:
    """c_j = E[g(s_j g0) g0] per net scale s_j by 1-D Monte Carlo.

    Rotation invariance gives E[g(a'x) (a'v)] = (x'v / ||x||) c_j, so one
    cached scalar per net point is enough for the whole reference matrix.
    """
    out = np.empty(len(scales))
    for j, s in enumerate(scales):
        rng = counter_rng(seed, 500_000 + j)
        acc = 0.0
        done = 0
        while done < ref_samples:
            cnt = min(_MC_CHUNK, ref_samples - done)
            g0 = gaussians(rng, cnt)
            tau, draw = _fresh_link_randomness(link, rng, cnt)
            acc += float(np.sum(_factor_values(link, factor, beta, t_scale, s * g0, tau, draw) * g0))
            done += cnt
        out[j] = acc / ref_samples
    return out


def product_process_sup(net_x, net_v, gen: MlpGenerator, link: LinkSpec,
                        t_scale: float, beta: float, m: int, n_trials: int,
                        seed: int = 0, factor: str = FACTOR_XI,
                        ref_samples: int = 1_000_000) -> np.ndarray:
    """Per-trial sup over the net product of the centered product process.

    Each trial draws a fresh size-m ensemble (a_i and link randomness) and
    evaluates sup_{x, v} | (1/m) sum_i g_x(a_i) h_v(a_i) - E[g_x h_v] |
    with g the xi or |epsilon| factor at the net's latent points and
    h_v(a) = a'v. Reference expectations are computed once per net point.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    z_net = np.stack([np.asarray(z, dtype=float) for z in net_x])
    v_net = np.stack([np.asarray(v, dtype=float) for v in net_v])
    x_net = forward(gen, z_net)
    scales = np.linalg.norm(x_net, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        x_unit = np.where(scales[:, None] > 0, x_net / np.maximum(scales[:, None], 1e-300), 0.0)

    c = product_reference_means(link, factor, beta, t_scale, scales, seed, ref_samples)
    ref = c[:, None] * (x_unit @ v_net.T)

    sups = np.empty(n_trials)
    for t in range(n_trials):
        a = gaussians(counter_rng(seed, 1_000 + t), (m, x_net.shape[1]))
        rng_link = counter_rng(seed, 100_000 + t)
        tau, draw = _fresh_link_randomness(link, rng_link, m)
        tau_col = tau[:, None] if tau is not None else None
        draw_col = draw[:, None] if draw is not None else None
        gvals = _factor_values(link, factor, beta, t_scale, a @ x_net.T, tau_col, draw_col)
        emp = gvals.T @ (a @ v_net.T) / m
        sups[t] = float(np.max(np.abs(emp - ref)))
    return sups


def predicted_product_bound(params: TheoryParams, k: int, l_lip: float, r: float,
                            t_scale: float, eps: float, m: int) -> float:
    """(A_g A_h / sqrt(m)) sqrt(H(K, eta1) + H((K_eps^-)*, eta2)) with the
    net radii eta1 = A_g A_h / (sqrt(m) S_gh), eta2 = A_g A_h /
    (sqrt(m) T_gh), absolute constants set to 1 (reporting only)."""
    aa = params.a_g * params.a_h
    eta1 = min(aa / (math.sqrt(m) * params.s_gh), 0.999 * l_lip * r)
    eta2 = min(aa / (math.sqrt(m) * params.t_gh), 0.999 * l_lip * r)
    h1 = entropy_bound("K", k, l_lip, r, t_scale, eps, eta1)
    h2 = entropy_bound("Normalized", k, l_lip, r, t_scale, eps, eta2)
    return aa / math.sqrt(m) * math.sqrt(h1 + h2)


def xi_process_params(link: LinkSpec, n: int, t_scale: float, beta: float,
                      mu: float = 0.0, psi: float = 0.0, f_at_zero: float = 0.0) -> TheoryParams:
    """Documented parameter preset for the xi-factor product process.

    Sign-family links: A_g ~ 1, U_g ~ sqrt(n); quantizer: everything ~
    delta; Sim: A_g ~ psi + mu, U_g ~ (Lhat + mu) sqrt(n) + |f(0)| (psi
    approximated by the caller, e.g. an L2 proxy). Constants are 1.
    """
    from .links import link_params
    lp = link_params(link)
    slope = lp.l0 + t_scale + (lp.b0 / beta if beta > 0 and lp.b0 > 0 else 0.0)
    root_n = math.sqrt(n)
    if link.kind in ("sign", "dithered_sign"):
        return TheoryParams(a_g=1.0, u_g=root_n, m_g=slope, l_g=root_n * slope,
                            a_h=1.0, u_h=root_n, m_h=1.0, l_h=root_n,
                            p0=min(1.0, 2.0 * math.exp(-n / 8.0)))
    if link.kind == "quantizer":
        d = link.delta
        return TheoryParams(a_g=d, u_g=2.0 * d, m_g=slope, l_g=root_n * slope,
                            a_h=1.0, u_h=root_n, m_h=1.0, l_h=root_n, p0=0.0)
    a_g = psi + mu
    u_g = (1.0 + mu) * root_n + abs(f_at_zero)
    return TheoryParams(a_g=a_g, u_g=u_g, m_g=slope, l_g=root_n * slope,
                        a_h=1.0, u_h=root_n, m_h=1.0, l_h=root_n,
                        p0=min(1.0, 2.0 * math.exp(-n / 8.0)))


def eps_process_params(link: LinkSpec, n: int, beta: float) -> TheoryParams:
    """Documented parameter preset for the |epsilon|-factor process."""
    from .links import link_params
    lp = link_params(link)
    slope = 2.0 * lp.l0 + (lp.b0 / beta if beta > 0 and lp.b0 > 0 else 0.0)
    root_n = math.sqrt(n)
    if link.kind == "sim":
        return TheoryParams(a_g=0.0, u_g=0.0, m_g=0.0, l_g=0.0,
                            a_h=1.0, u_h=root_n, m_h=1.0, l_h=root_n, p0=0.0)
    if link.kind == "quantizer":
        return TheoryParams(a_g=link.delta, u_g=link.delta, m_g=slope, l_g=root_n * slope,
                            a_h=1.0, u_h=root_n, m_h=1.0, l_h=root_n, p0=0.0)
    return TheoryParams(a_g=1.0, u_g=lp.b0, m_g=slope, l_g=root_n * slope,
                        a_h=1.0, u_h=root_n, m_h=1.0, l_h=root_n, p0=0.0)
