"""Counter-based random streams shared by every stochastic component.

Streams are identified by a (seed, stream_id) pair mapped onto the two
64-bit key words of a Philox-4x64 counter generator, so any stream can be
reproduced independently of evaluation order. Gaussian variates are drawn
by the Box-Muller transform applied to the uniform counter stream; a port
in another language reproduces the same distributions by doing the same
(bit-exactness across languages is not required, statistical equality is).
"""

from __future__ import annotations

import numpy as np

# Stream ids used by the sensing module for one ensemble seed.
STREAM_A_MATRIX = 0
STREAM_DITHER = 1
STREAM_SIM_LINK = 2
# Appendix-D per-signal noise lives in its own id range so offsets never
# collide with the ensemble streams above.
STREAM_NOISE_BASE = 1 << 32

# Solver restart initializations: one stream per restart index.
STREAM_RESTART_BASE = 1 << 33

# Stream ids for harness-level seeds.
STREAM_SIGNALS = 10
STREAM_ENSEMBLE_SEEDS = 11
STREAM_SOLVER_SEEDS = 12


def counter_rng(seed: int, stream_id: int) -> np.random.Generator:
    """Generator for the (seed, stream_id) counter stream."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF)])
    return np.random.Generator(np.random.Philox(key=key))


def uniforms(rng: np.random.Generator, size, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Uniform draws on [low, high) from the counter stream."""
    return low + (high - low) * rng.random(size)


def gaussians(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws via Box-Muller on the counter stream.

    Uniform pairs (u1, u2) are consumed in order; u1 is reflected to (0, 1]
    so log(u1) is finite.
    """
    n = int(np.prod(size)) if not np.isscalar(size) else int(size)
    half = (n + 1) // 2
    u1 = 1.0 - rng.random(half)
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:n]
    return out.reshape(size) if not np.isscalar(size) else out


def ball_points(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    """(count, dim) array of points uniform in the l2-ball of the given
    radius (Gaussian direction plus radial inverse-CDF)."""
    direction = gaussians(rng, (count, dim))
    norms = np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    radii = radius * rng.random((count, 1)) ** (1.0 / dim)
    return direction / norms * radii


def ball_point(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """One point uniform in the l2-ball."""
    return ball_points(rng, 1, dim, radius)[0]


def derive_seeds(seed: int, stream_id: int, count: int) -> np.ndarray:
    """Deterministic child seeds for per-task streams (sweeps, solvers)."""
    rng = counter_rng(seed, stream_id)
    return rng.integers(0, 2 ** 62, size=count, dtype=np.int64)
