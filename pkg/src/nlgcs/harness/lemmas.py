"""Lemma-verification suites behind `verify-lemmas`.

Presets: link (Lipschitz constants, approximation-error support bound,
quantizer xi/eps bounds, band-probability identities), scaling (choice-of-T
identities, dithered-quantizer unbiasedness, target-mismatch checks),
entropy (closed-form evaluations plus monotonicity), srec (empirical S-REC
and Gaussian-norm concentration), process (product-process checks). `all`
runs every suite but replaces the process slope study with its fast
subset; the full slope experiment runs under the `process` preset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..generator import MlpGenerator, lipschitz_upper_bound, random_generator
from ..links import (LinkSpec, approx_error_eval, in_jump_band, link_eval,
                     link_params, lipschitz_approx_eval, xi_eval)
from ..recovery import scaling_factor
from ..sensing import DitherRealization, SensingEnsemble, sample_ensemble
from ..streams import ball_points, counter_rng, gaussians, uniforms
from ..theory import (FACTOR_ABS_EPS, SrecParams, entropy_bound,
                      gaussian_norm_concentration, mu_beta_mc,
                      predicted_product_bound, product_process_sup,
                      srec_empirical, target_mismatch_mc, xi_process_params)
from .sweep import fit_slope

LEMMA_PRESETS = ("all", "link", "scaling", "entropy", "srec", "process")
LEMMAS_CSV_HEADER = "lemma_id,statistic,value,threshold,pass"

_GRID_POINTS = 10_000
_REL_SLACK = 1e-9


@dataclass(frozen=True)
class LemmaCheck:
    lemma_id: str
    statistic: str
    value: float
    threshold: float
    passed: bool


def _check(lemma_id: str, statistic: str, value: float, threshold: float) -> LemmaCheck:
    return LemmaCheck(lemma_id, statistic, float(value), float(threshold),
                      bool(value <= threshold))


def _info(lemma_id: str, statistic: str, value: float) -> LemmaCheck:
    return LemmaCheck(lemma_id, statistic, float(value), math.inf, True)


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _grid(lo: float, hi: float, n: int = _GRID_POINTS) -> np.ndarray:
    # Small irrational offset keeps grid points off exact band edges.
    return np.linspace(lo, hi, n) + 1e-7 * math.pi


def _link_cases(seed: int):
    rng = counter_rng(seed, 0)
    lam = 2.0
    tau_sign = float(uniforms(rng, 1, -lam, lam)[0])
    return [
        ("sign", LinkSpec(kind="sign"), None),
        ("dsign", LinkSpec(kind="dithered_sign", lambda_=lam), tau_sign),
        ("uqd", LinkSpec(kind="quantizer", delta=1.0),
         float(uniforms(rng, 1, -0.5, 0.5)[0])),
        ("sim", LinkSpec(kind="sim", sim_link="relu"), None),
    ]


def _lipschitz_checks(seed: int) -> list[LemmaCheck]:
    out = []
    for name, spec, tau in _link_cases(seed):
        lp = link_params(spec)
        betas = [0.01, 0.1]
        if math.isfinite(lp.beta0):
            betas.append(0.4 * lp.beta0)
        for beta in betas:
            u = _grid(-3.0, 3.0)
            fb = np.asarray(lipschitz_approx_eval(spec, beta, u, tau))
            eps = np.abs(np.asarray(approx_error_eval(spec, beta, u, tau)))
            du = np.diff(u)
            f_slope = float(np.max(np.abs(np.diff(fb)) / du))
            e_slope = float(np.max(np.abs(np.diff(eps)) / du))
            f_bound = lp.l0 + (lp.b0 / beta if lp.b0 > 0 else 0.0)
            e_bound = 2.0 * lp.l0 + (lp.b0 / beta if lp.b0 > 0 else 0.0)
            slack = 1.0 + _REL_SLACK
            out.append(_check(f"lip_fbeta_{name}_b{beta:g}",
                              "max |f_b(u)-f_b(u')|/|u-u'| over grid",
                              f_slope, f_bound * slack))
            out.append(_check(f"lip_abs_eps_{name}_b{beta:g}",
                              "max ||eps(u)|-|eps(u')||/|u-u'| over grid",
                              e_slope, e_bound * slack))
            band = np.asarray(in_jump_band(spec, beta, u, tau))
            support_bound = 1.5 * lp.l0 * beta + lp.b0
            outside = float(np.max(np.abs(eps[~band]), initial=0.0))
            inside = float(np.max(eps[band], initial=0.0))
            out.append(_check(f"eps_outside_{name}_b{beta:g}",
                              "max |eps| off the jump bands (exact zero)",
                              outside, 0.0))
            out.append(_check(f"eps_support_{name}_b{beta:g}",
                              "max |eps| on the jump bands vs 3*L0*beta/2 + B0",
                              inside, support_bound * slack))
    return out


def _quantizer_bound_checks(seed: int) -> list[LemmaCheck]:
    out = []
    rng = counter_rng(seed, 1)
    for delta in (1.0, 3.0):
        spec = LinkSpec(kind="quantizer", delta=delta)
        tau = float(uniforms(rng, 1, -delta / 2, delta / 2)[0])
        beta = 0.2 * delta  # below delta/2
        u = _grid(-5.0 * delta, 5.0 * delta)
        xi = np.abs(np.asarray(xi_eval(spec, beta, 1.0, u, tau)))
        eps = np.abs(np.asarray(approx_error_eval(spec, beta, u, tau)))
        slack = 1.0 + _REL_SLACK
        out.append(_check(f"uqd_xi_bound_d{delta:g}", "max |xi| vs 2*delta",
                          float(np.max(xi)), 2.0 * delta * slack))
        out.append(_check(f"uqd_eps_bound_d{delta:g}", "max |eps| vs delta",
                          float(np.max(eps)), delta * slack))
    return out


def _mu_beta_checks(seed: int) -> list[LemmaCheck]:
    out = []
    rng = counter_rng(seed, 2)
    x = gaussians(rng, 10)
    x_unit = x / np.linalg.norm(x)
    for i, beta in enumerate((0.05, 0.1, 0.2)):
        est = mu_beta_mc(LinkSpec(kind="sign"), x_unit, beta,
                         n_samples=1_000_000, seed=seed + 100 + i)
        ref = 2.0 * _phi(beta / 2.0) - 1.0
        out.append(_check(f"mu_beta_sign_b{beta:g}",
                          "|mu_beta - (2*Phi(beta/2)-1)| vs 3*stderr",
                          abs(est.value - ref), 3.0 * est.stderr))
    x2 = gaussians(rng, 10) * 1.7
    est = mu_beta_mc(LinkSpec(kind="quantizer", delta=1.0), x2, 0.2,
                     n_samples=400_000, seed=seed + 200)
    out.append(_check("mu_beta_uqd", "|mu_beta - beta/delta| vs 3*stderr",
                      abs(est.value - 0.2), 3.0 * est.stderr))
    est = mu_beta_mc(LinkSpec(kind="sim", sim_link="relu"), x_unit, 0.3,
                     n_samples=10_000, seed=seed + 300)
    out.append(_check("mu_beta_sim", "mu_beta of a continuous link (exact zero)",
                      est.value, 0.0))
    return out


def link_suite(seed: int) -> list[LemmaCheck]:
    return (_lipschitz_checks(seed) + _quantizer_bound_checks(seed)
            + _mu_beta_checks(seed))


def _scaling_identity_checks(seed: int) -> list[LemmaCheck]:
    n_mc = 1_000_000
    cases = [
        ("t_sign", LinkSpec(kind="sign"), math.sqrt(2.0 / math.pi)),
        ("t_dsign", LinkSpec(kind="dithered_sign", lambda_=5.0), 0.2),
        ("t_sim_relu", LinkSpec(kind="sim", sim_link="relu"), 0.5),
        ("t_uqd", LinkSpec(kind="quantizer", delta=1.0), 1.0),
    ]
    out = []
    for i, (name, spec, ref) in enumerate(cases):
        rng = counter_rng(seed, 10 + i)
        g = gaussians(rng, n_mc)
        half = spec.dither_half_range
        tau = uniforms(rng, n_mc, -half, half) if half > 0 else None
        samples = np.asarray(link_eval(spec, g, tau)) * g
        mean = float(np.mean(samples))
        stderr = float(np.std(samples, ddof=1) / math.sqrt(n_mc))
        out.append(_check(name, "|MC E[f(g)g] - T| vs 4*stderr at 1e6 samples",
                          abs(mean - ref), 4.0 * stderr))
        # The library constant must agree with the same identity.
        t_lib = scaling_factor(spec, n_mc, seed=seed + 50 + i)
        thr = 4.0 * stderr if spec.kind == "sim" else 1e-12
        out.append(_check(name + "_lib", "scaling_factor vs closed form",
                          abs(t_lib - ref), max(thr, 1e-12)))
    return out


def _unbiasedness_checks(seed: int) -> list[LemmaCheck]:
    n_mc = 1_000_000
    delta = 1.0
    out = []
    for i, a in enumerate((0.3, -1.7, 2.5)):
        rng = counter_rng(seed, 20 + i)
        tau = uniforms(rng, n_mc, -delta / 2, delta / 2)
        q = delta * (np.floor((a + tau) / delta) + 0.5)
        stderr = float(np.std(q, ddof=1) / math.sqrt(n_mc))
        out.append(_check(f"uqd_unbiased_a{i}",
                          "|MC E[Q_delta(a + tau)] - a| vs 4*stderr",
                          abs(float(np.mean(q)) - a), 4.0 * stderr))
    return out


def _mismatch_checks(seed: int) -> list[LemmaCheck]:
    n, n_mc, n_x = 10, 1_000_000, 5
    rng = counter_rng(seed, 30)
    out = []
    for i in range(n_x):
        x = gaussians(rng, n)
        x /= np.linalg.norm(x)
        est = target_mismatch_mc(LinkSpec(kind="sign"), math.sqrt(2.0 / math.pi),
                                 x, n_mc, seed=seed + 400 + i)
        out.append(_check(f"rho_sign_x{i}", "rho_hat for the 1-bit model vs 0.03",
                          est.value, 0.03))
    for i in range(n_x):
        x = gaussians(rng, n)
        est = target_mismatch_mc(LinkSpec(kind="sim", sim_link="identity"), 1.0,
                                 x, n_mc, seed=seed + 500 + i)
        out.append(_check(f"rho_identity_x{i}", "rho_hat for the linear model vs 3*stderr",
                          est.value, 3.0 * est.stderr))
    m_ref = 100
    for i in range(n_x):
        x = gaussians(rng, n)
        lam = 3.0 * float(np.linalg.norm(x)) * math.sqrt(math.log(m_ref))
        est = target_mismatch_mc(LinkSpec(kind="dithered_sign", lambda_=lam),
                                 1.0 / lam, x, n_mc, seed=seed + 600 + i)
        out.append(_check(f"rho_dsign_x{i}",
                          "rho_hat for dithered sign (lambda=3R sqrt(log m)) vs 3*stderr",
                          est.value, 3.0 * est.stderr))
    for i in range(n_x):
        x = gaussians(rng, n)
        est = target_mismatch_mc(LinkSpec(kind="quantizer", delta=1.0), 1.0,
                                 x, n_mc, seed=seed + 700 + i)
        out.append(_check(f"rho_uqd_x{i}", "rho_hat for the dithered quantizer vs 3*stderr",
                          est.value, 3.0 * est.stderr))
    return out


def scaling_suite(seed: int) -> list[LemmaCheck]:
    return (_scaling_identity_checks(seed) + _unbiasedness_checks(seed)
            + _mismatch_checks(seed))


def entropy_suite(seed: int) -> list[LemmaCheck]:
    del seed  # deterministic closed forms
    cases = [
        ("entropy_K", ("K", 20, 10.0, 1.0, 1.0, 0.5, 0.3), 20.0 * math.log(100.0)),
        ("entropy_K_boundary", ("K", 20, 10.0, 1.0, 1.0, 0.5, 10.0), 20.0 * math.log(3.0)),
        ("entropy_Kminus", ("Kminus", 20, 10.0, 1.0, 1.0, 0.5, 0.3), 40.0 * math.log(200.0)),
    ]
    out = []
    for name, args, ref in cases:
        val = entropy_bound(*args)
        out.append(_check(name, "relative error vs closed form", abs(val - ref) / ref, 1e-9))
    dec = entropy_bound("K", 20, 10.0, 1.0, eta=0.6) < entropy_bound("K", 20, 10.0, 1.0, eta=0.3)
    out.append(_check("entropy_monotone_eta", "decreasing in eta (0 = holds)",
                      0.0 if dec else 1.0, 0.0))
    lin = abs(entropy_bound("K", 40, 10.0, 1.0, eta=0.3)
              - 2.0 * entropy_bound("K", 20, 10.0, 1.0, eta=0.3))
    out.append(_check("entropy_linear_k", "|H(2k) - 2 H(k)|", lin, 1e-9))
    return out


def srec_suite(seed: int) -> list[LemmaCheck]:
    out = []
    gen = random_generator((5, 32, 50), seed=seed + 1)
    ens = sample_ensemble(200, 50, LinkSpec(kind="sign"), 0.0, seed=seed + 2)
    frac = srec_empirical(gen, ens, 10_000, SrecParams(alpha=0.5, slack_delta=0.1),
                          seed=seed + 3)
    out.append(_check("srec_gaussian", "violation fraction at m=200,k=5,n=50",
                      frac, 0.0))
    ens1 = sample_ensemble(1, 50, LinkSpec(kind="sign"), 0.0, seed=seed + 4)
    frac1 = srec_empirical(gen, ens1, 10_000, SrecParams(alpha=0.5, slack_delta=0.1),
                           seed=seed + 5)
    out.append(_check("srec_undersampled", "1 - violation fraction at m=1 (must violate)",
                      1.0 if frac1 <= 0.0 else 0.0, 0.0))
    n_iso = 5
    iso_gen = MlpGenerator((n_iso, n_iso), (np.eye(n_iso),), (np.zeros(n_iso),),
                           latent_radius=math.sqrt(n_iso))
    iso = SensingEnsemble(m=n_iso, n=n_iso,
                          a_matrix=math.sqrt(n_iso) * np.eye(n_iso),
                          link=LinkSpec(kind="sign"),
                          dithers=DitherRealization(np.zeros(0)),
                          sim_gauss=np.zeros(0), noise_sigma=0.0, seed=0)
    frac_iso = srec_empirical(iso_gen, iso, 1_000,
                              SrecParams(alpha=0.0, slack_delta=0.0), seed=seed + 6)
    out.append(_check("srec_isometry", "violation fraction for sqrt(m)*I", frac_iso, 0.0))
    tails = gaussian_norm_concentration(100, 100_000, seed=seed + 7)
    out.append(_check("anorm_n100_t5", "P(| ||a|| - 10 | > 5) at 1e5 samples",
                      tails[5.0], 0.001))
    tails1 = gaussian_norm_concentration(1, 1_000_000, seed=seed + 8)
    out.append(_check("anorm_n1_t3", "P(|g| > 4) at 1e6 samples", tails1[3.0], 1e-4))
    return out


_PROCESS_GEN_DIMS = (5, 32, 50)
_PROCESS_M_GRID = (250, 500, 1000, 2000, 4000)


def _process_nets(gen: MlpGenerator, seed: int, n_points: int):
    rng = counter_rng(seed, 40)
    z_net = ball_points(rng, n_points, gen.latent_dim, gen.latent_radius)
    v = gaussians(rng, (n_points, gen.output_dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return list(z_net), list(v)


def process_suite(seed: int, full: bool) -> list[LemmaCheck]:
    out = []
    gen = random_generator(_PROCESS_GEN_DIMS, seed=seed + 9)
    net_x, net_v = _process_nets(gen, seed, 3)

    sups0 = product_process_sup(net_x, net_v, gen,
                                LinkSpec(kind="sim", sim_link="identity"),
                                t_scale=1.0, beta=0.0, m=100, n_trials=3,
                                seed=seed + 10, ref_samples=10_000)
    out.append(_check("process_zero", "sup for the identity xi-process (exact zero)",
                      float(np.max(np.abs(sups0))), 0.0))

    sign = LinkSpec(kind="sign")
    # Bounded factor |eps| with a wide band keeps the singleton statistic
    # in the CLT regime; 300 trials stabilize the median ratio.
    single_x, single_v = [net_x[0]], [net_v[0]]
    med = {}
    for m in (500, 2000):
        sups = product_process_sup(single_x, single_v, gen, sign,
                                   t_scale=math.sqrt(2 / math.pi), beta=0.5,
                                   m=m, n_trials=300, seed=seed + 11,
                                   factor=FACTOR_ABS_EPS, ref_samples=1_000_000)
        med[m] = float(np.median(sups))
    ratio = med[2000] / med[500]
    out.append(_check("process_bernstein", "|median ratio at 4x m - 0.5| vs 0.15",
                      abs(ratio - 0.5), 0.15))

    if full:
        medians = []
        for m in _PROCESS_M_GRID:
            sups = product_process_sup(net_x, net_v, gen, sign,
                                       t_scale=math.sqrt(2 / math.pi), beta=0.05,
                                       m=m, n_trials=20, seed=seed + 12 + m,
                                       ref_samples=1_000_000)
            medians.append(float(np.median(sups)))
        slope, _, _ = fit_slope(list(zip(_PROCESS_M_GRID, medians)))
        out.append(_check("process_slope", "|slope + 0.5| vs 0.15 (slope in [-0.65,-0.35])",
                          abs(slope + 0.5), 0.15))
        out.append(_info("process_slope_value", "fitted log-log slope", slope))
        for m, v in zip(_PROCESS_M_GRID, medians):
            out.append(_info(f"process_median_m{m}", "median sup over 20 trials", v))
        params = xi_process_params(sign, _PROCESS_GEN_DIMS[-1],
                                   math.sqrt(2 / math.pi), 0.05)
        pred = predicted_product_bound(params, gen.latent_dim,
                                       lipschitz_upper_bound(gen),
                                       gen.latent_radius,
                                       math.sqrt(2 / math.pi), 0.5,
                                       _PROCESS_M_GRID[-1])
        out.append(_info("process_bound_ratio",
                         "observed/predicted bound at the largest m (informational)",
                         medians[-1] / pred if pred > 0 else math.nan))
    return out


def verify_lemmas(preset: str = "all", seed: int = 0) -> list[LemmaCheck]:
    """Run the named suite; `all` runs every suite at fast scale."""
    if preset not in LEMMA_PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {LEMMA_PRESETS}")
    if preset == "link":
        return link_suite(seed)
    if preset == "scaling":
        return scaling_suite(seed)
    if preset == "entropy":
        return entropy_suite(seed)
    if preset == "srec":
        return srec_suite(seed)
    if preset == "process":
        return process_suite(seed, full=True)
    return (link_suite(seed) + scaling_suite(seed) + entropy_suite(seed)
            + srec_suite(seed) + process_suite(seed, full=False))


def lemmas_csv(checks: list[LemmaCheck]) -> str:
    lines = [LEMMAS_CSV_HEADER]
    for c in checks:
        stat = c.statistic.replace(",", ";")
        lines.append(",".join([c.lemma_id, stat, repr(c.value), repr(c.threshold),
                               "true" if c.passed else "false"]))
    return "\n".join(lines) + "\n"
