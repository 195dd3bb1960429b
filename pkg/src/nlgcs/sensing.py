"""Frozen measurement ensembles y = f(Ax) (+ eta).

One SensingEnsemble is a single realization of the sensing matrix A with
i.i.d. standard Gaussian entries, the dither vector, and (for noisy Sim
links) the frozen per-measurement link noise, all reconstructible from a
64-bit seed through named counter streams. Uniform experiments reuse one
ensemble across every signal; the optional Appendix-style additive noise
eta is drawn per signal from an offset stream so it stays i.i.d. while the
ensemble (A, tau, f) is frozen.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .links import (KIND_DITHERED_SIGN, KIND_QUANTIZER, KIND_SIGN, KIND_SIM,
                    DitherRealization, LinkSpec, link_eval)
from .streams import (STREAM_A_MATRIX, STREAM_DITHER, STREAM_NOISE_BASE,
                      STREAM_SIM_LINK, counter_rng, gaussians, uniforms)

ENSEMBLE_MAGIC = b"nlgcs-ens v1"
_LINK_TAGS = {KIND_SIGN: 0, KIND_DITHERED_SIGN: 1, KIND_QUANTIZER: 2, KIND_SIM: 3}
_SIM_TAGS = {"identity": 0, "relu": 1, "tanh": 2}


@dataclass(frozen=True)
class SensingEnsemble:
    """One frozen draw of (A, dithers, link noise) plus the noise model."""

    m: int
    n: int
    a_matrix: np.ndarray
    link: LinkSpec
    dithers: DitherRealization
    sim_gauss: np.ndarray
    noise_sigma: float
    seed: int


def sample_ensemble(m: int, n: int, link: LinkSpec, noise_sigma: float = 0.0,
                    seed: int = 0) -> SensingEnsemble:
    """Draw A (m x n standard Gaussian), dithers uniform on the link's
    range, and frozen Sim link noise, all determined by seed."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be at least 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    a = gaussians(counter_rng(seed, STREAM_A_MATRIX), (m, n))
    half = link.dither_half_range
    if half > 0:
        taus = uniforms(counter_rng(seed, STREAM_DITHER), m, -half, half)
    else:
        taus = np.zeros(0)
    if link.kind == KIND_SIM and link.sim_noise_sigma > 0:
        sim_gauss = gaussians(counter_rng(seed, STREAM_SIM_LINK), m)
    else:
        sim_gauss = np.zeros(0)
    return SensingEnsemble(m=m, n=n, a_matrix=a, link=link,
                           dithers=DitherRealization(taus),
                           sim_gauss=sim_gauss, noise_sigma=noise_sigma,
                           seed=seed)


def observe(ens: SensingEnsemble, x: np.ndarray, noise_seed_offset: int = 0) -> np.ndarray:
    """y_i = f_i(<a_i, x>) + eta_i with eta from the offset noise stream.

    noise_sigma = 0 gives the noiseless model exactly (no stream is
    consumed).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (ens.n,):
        raise ValueError(f"x must have shape ({ens.n},), got {x.shape}")
    u = ens.a_matrix @ x
    tau = ens.dithers.values if len(ens.dithers) else None
    draw = ens.sim_gauss if len(ens.sim_gauss) else None
    y = link_eval(ens.link, u, tau, draw)
    y = np.asarray(y, dtype=float)
    if ens.noise_sigma > 0:
        rng = counter_rng(ens.seed, STREAM_NOISE_BASE + noise_seed_offset)
        y = y + ens.noise_sigma * gaussians(rng, ens.m)
    return y


def measurement_loss(ens: SensingEnsemble, y: np.ndarray, x: np.ndarray) -> float:
    """||y - Ax||_2, the generalized-Lasso objective at x."""
    return float(np.linalg.norm(y - ens.a_matrix @ x))


def dump_ensemble(ens: SensingEnsemble, path) -> None:
    """Binary dump: magic, little-endian header, A row-major, dithers.

    Header after the 12-byte magic: m, n (u64), seed (i64), link tag
    (u64, kind*8 + sim variant), then doubles lambda, delta,
    sim_noise_sigma, noise_sigma. Sim link noise is regenerated from the
    seed on load rather than stored.
    """
    tag = _LINK_TAGS[ens.link.kind] * 8 + _SIM_TAGS[ens.link.sim_link]
    header = struct.pack("<QQqQdddd", ens.m, ens.n, ens.seed, tag,
                         ens.link.lambda_, ens.link.delta,
                         ens.link.sim_noise_sigma, ens.noise_sigma)
    with open(path, "wb") as fh:
        fh.write(ENSEMBLE_MAGIC)
        fh.write(header)
        fh.write(ens.a_matrix.astype("<f8").tobytes(order="C"))
        fh.write(ens.dithers.values.astype("<f8").tobytes())


def load_ensemble(path) -> SensingEnsemble:
    """Read a dump written by dump_ensemble."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(ENSEMBLE_MAGIC)] != ENSEMBLE_MAGIC:
        raise ValueError("not an nlgcs ensemble dump")
    off = len(ENSEMBLE_MAGIC)
    m, n, seed, tag, lam, delta, sim_sigma, noise_sigma = struct.unpack_from(
        "<QQqQdddd", blob, off)
    off += struct.calcsize("<QQqQdddd")
    kinds = {v: k for k, v in _LINK_TAGS.items()}
    sims = {v: k for k, v in _SIM_TAGS.items()}
    link = LinkSpec(kind=kinds[tag // 8], lambda_=lam, delta=delta,
                    sim_link=sims[tag % 8], sim_noise_sigma=sim_sigma)
    a = np.frombuffer(blob, dtype="<f8", count=m * n, offset=off).reshape(m, n).copy()
    off += m * n * 8
    n_dither = (len(blob) - off) // 8
    taus = np.frombuffer(blob, dtype="<f8", count=n_dither, offset=off).copy()
    if link.kind == KIND_SIM and link.sim_noise_sigma > 0:
        sim_gauss = gaussians(counter_rng(seed, STREAM_SIM_LINK), m)
    else:
        sim_gauss = np.zeros(0)
    return SensingEnsemble(m=int(m), n=int(n), a_matrix=a, link=link,
                           dithers=DitherRealization(taus),
                           sim_gauss=sim_gauss, noise_sigma=noise_sigma,
                           seed=int(seed))
